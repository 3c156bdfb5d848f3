//! Report envelope and writers. Identical config and seed must produce
//! byte-identical JSON up to the timestamp field, which is the one field
//! excluded from determinism comparisons.

use crate::Result;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// Versioned wrapper around a study report.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope<T: Serialize> {
    pub schema: u32,
    pub study: String,
    pub timestamp: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub pass: bool,
    pub report: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(study: &str, seed: u64, config: serde_json::Value, pass: bool, report: T) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_else(|_| "0".to_string());
        Envelope {
            schema: 1,
            study: study.to_string(),
            timestamp,
            seed,
            config,
            pass,
            report,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Serialize an envelope to a JSON file.
pub fn write_json<T: Serialize>(path: &Path, envelope: &Envelope<T>) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(envelope.to_json()?.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Remove the timestamp line for byte-comparisons between runs.
pub fn strip_timestamp(json: &str) -> String {
    json.lines()
        .filter(|line| !line.trim_start().starts_with("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Plain CSV writer for ratio tables.
pub fn write_csv(path: &Path, headers: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(headers)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Export a sitewise functional as `(site, value)` CSV.
pub fn write_field_csv(path: &Path, field: &crate::lattice::GridFunction) -> Result<()> {
    let rows: Vec<Vec<String>> = field
        .values()
        .iter()
        .enumerate()
        .map(|(site, v)| vec![site.to_string(), v.re.to_string()])
        .collect();
    write_csv(path, &["site", "value"], &rows)
}

/// JSON summary of a sitewise functional: its `L^p` norms over a `p` list.
pub fn field_summary(
    field: &crate::lattice::GridFunction,
    ps: &[f64],
) -> Result<serde_json::Value> {
    let mut norms = Vec::with_capacity(ps.len());
    for &p in ps {
        norms.push(serde_json::json!({
            "p": p,
            "norm": crate::lattice::lp_quasinorm(field, p)?,
        }));
    }
    Ok(serde_json::json!({ "norms": norms }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_export_helpers() {
        use crate::lattice::{make_grid, GridFunction};
        use num_complex::Complex64;
        let g = make_grid(1, 8).unwrap();
        let f = GridFunction::constant(g, Complex64::from(2.0));
        let dir = std::env::temp_dir().join("hardylab-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("field.csv");
        write_field_csv(&path, &f).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("site,value"));
        assert_eq!(text.lines().count(), 9);
        let summary = field_summary(&f, &[1.0, 2.0]).unwrap();
        let norms = summary["norms"].as_array().unwrap();
        assert_eq!(norms.len(), 2);
        assert!((norms[0]["norm"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn envelope_serializes_and_strips() {
        let env = Envelope::new(
            "demo",
            7,
            serde_json::json!({"n": 1}),
            true,
            serde_json::json!({"value": 0.5}),
        );
        let json = env.to_json().unwrap();
        assert!(json.contains("\"schema\": 1"));
        assert!(json.contains("\"timestamp\""));
        let stripped = strip_timestamp(&json);
        assert!(!stripped.contains("timestamp"));
        assert!(stripped.contains("\"study\": \"demo\""));
    }
}
