//! Experiment configuration: one structured TOML file per run, with CLI
//! flags overriding individual leaves. Validation happens before any
//! computation and names the offending field path.

use anyhow::{bail, Context, Result};
use hardylab::conegeo::{make_time_grid, TimeGrid};
use hardylab::experiments::{FamilySpec, OperatorKind, OperatorSpec};
use hardylab::lattice::{make_grid, TorusGrid};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "N")]
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 1, points: 64 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub m: u32,
    pub kind: String,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            m: 1,
            kind: "polyharmonic".into(),
            delta: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TimeGridConfig {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    /// exponent list
    pub p: Vec<f64>,
    /// functional tokens for equivalence studies
    pub a: String,
    pub b: String,
    pub aperture: f64,
    /// aperture for the non-tangential control in domination studies
    pub gamma: f64,
    /// family seed
    pub family_seed: u64,
    /// run the N -> 2N refinement drift
    pub refine: bool,
    /// spread / drift thresholds
    pub spread_threshold: f64,
    pub drift_threshold: f64,
    /// molecule parameters
    pub molecule_count: usize,
    pub molecule_radius: f64,
    pub vanishing_order: u32,
    pub epsilon: f64,
    /// probe counts
    pub probes: usize,
    /// times for semigroup-bench / pq-probe
    pub times: Vec<f64>,
    /// run the independent Taylor oracle cross-check
    pub oracle: bool,
    /// caccioppoli configuration count and variant
    pub configs: usize,
    pub variant: String,
    pub caccioppoli_epsilon: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            p: vec![0.8, 1.0, 2.0],
            a: "S_L".into(),
            b: "N_hL".into(),
            aperture: 1.0,
            gamma: 8.0,
            family_seed: 5,
            refine: false,
            spread_threshold: 10.0,
            drift_threshold: 2.0,
            molecule_count: 20,
            molecule_radius: 0.08,
            vanishing_order: 2,
            epsilon: 1.0,
            probes: 50,
            times: vec![1e-4, 1e-3, 1e-2, 1e-1],
            oracle: false,
            configs: 50,
            variant: "zero_order".into(),
            caccioppoli_epsilon: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "reports".into(),
            formats: vec!["json".into(), "csv".into()],
        }
    }
}

/// The full configuration tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub grid: GridConfig,
    pub operator: OperatorConfig,
    pub time_grid: TimeGridConfig,
    pub study: StudyConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema: 1,
            grid: GridConfig::default(),
            operator: OperatorConfig::default(),
            time_grid: TimeGridConfig::default(),
            study: StudyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| "config parse error".to_string())?;
        Ok(cfg)
    }

    /// Validate every leaf against the preconditions of the operations it
    /// feeds; error messages name the field path.
    pub fn validate(&self) -> Result<()> {
        if self.schema != 1 {
            bail!("schema: unsupported version {} (expected 1)", self.schema);
        }
        if self.grid.n != 1 && self.grid.n != 2 {
            bail!("grid.n: dimension must be 1 or 2, got {}", self.grid.n);
        }
        if self.grid.points < 4 || self.grid.points % 2 != 0 {
            bail!("grid.N: need an even point count ≥ 4, got {}", self.grid.points);
        }
        if self.operator.m == 0 {
            bail!("operator.m: half-order must be ≥ 1");
        }
        match self.operator.kind.as_str() {
            "polyharmonic" | "random" => {}
            other => bail!("operator.kind: expected polyharmonic|random, got {other}"),
        }
        if !(0.0..1.0).contains(&self.operator.delta) {
            bail!("operator.delta: must lie in [0, 1), got {}", self.operator.delta);
        }
        if let Some(levels) = self.time_grid.levels {
            if levels < 8 {
                bail!("time_grid.levels: need at least 8 levels, got {levels}");
            }
        }
        if let (Some(a), Some(b)) = (self.time_grid.t_min, self.time_grid.t_max) {
            if !(a > 0.0 && b > a) {
                bail!("time_grid: need 0 < t_min < t_max, got [{a}, {b}]");
            }
        }
        for &p in &self.study.p {
            if !(p > 0.0) {
                bail!("study.p: exponents must be positive, got {p}");
            }
        }
        if !(self.study.aperture > 0.0) {
            bail!("study.aperture: must be positive");
        }
        if !(self.study.gamma > 0.0) {
            bail!("study.gamma: must be positive");
        }
        if self.study.spread_threshold <= 1.0 {
            bail!("study.spread_threshold: a spread is ≥ 1, threshold must exceed 1");
        }
        if self.study.molecule_count == 0 {
            bail!("study.molecule_count: must be positive");
        }
        for &t in &self.study.times {
            if !(t > 0.0) {
                bail!("study.times: times must be positive, got {t}");
            }
        }
        match self.study.variant.as_str() {
            "with_epsilon" | "gradient_sum" | "zero_order" => {}
            other => bail!(
                "study.variant: expected with_epsilon|gradient_sum|zero_order, got {other}"
            ),
        }
        Ok(())
    }

    pub fn torus(&self) -> Result<TorusGrid> {
        Ok(make_grid(self.grid.n, self.grid.points)?)
    }

    pub fn operator_spec(&self) -> OperatorSpec {
        let kind = if self.operator.kind == "random" {
            OperatorKind::Random
        } else {
            OperatorKind::Polyharmonic
        };
        OperatorSpec {
            m: self.operator.m,
            kind,
            delta: self.operator.delta,
            seed: self.operator.seed,
        }
    }

    pub fn time_grid_for(&self, grid: TorusGrid) -> Result<TimeGrid> {
        let default = TimeGrid::default_for(grid);
        let t_min = self.time_grid.t_min.unwrap_or_else(|| default.t_min());
        let t_max = self.time_grid.t_max.unwrap_or_else(|| default.t_max());
        let levels = self.time_grid.levels.unwrap_or_else(|| default.levels());
        Ok(make_time_grid(t_min, t_max, levels)?)
    }

    pub fn family_spec(&self) -> FamilySpec {
        FamilySpec::standard(self.study.family_seed)
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn bad_levels_names_the_field() {
        let mut cfg = ExperimentConfig::default();
        cfg.time_grid.levels = Some(3);
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("time_grid.levels"), "{err}");
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back.grid.points, cfg.grid.points);
    }
}
