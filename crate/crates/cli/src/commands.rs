//! Subcommand runners: each realizes the configured operator, runs one
//! study, writes the JSON/CSV reports and prints a one-page summary.

use crate::config::ExperimentConfig;
use anyhow::{bail, Context, Result};
use hardylab::conegeo::make_time_grid;
use hardylab::experiments::{
    aperture_study, caccioppoli_sweep, domination_study, equivalence_suite, gaffney_check,
    gaffney_defaults, molecule_study, pq_interval_probe, riesz_study, tent_domination_check, write_csv, write_json, CaccioppoliVariant, Envelope, FunctionalSpec,
    OperatorSpec,
};
use hardylab::funcalc::{expm_oracle, semigroup_apply, SpectralFactorization};
use hardylab::hardy::calderon_reproduce;
use hardylab::lattice::{make_grid, random_bandlimited, GridFunction};
use hardylab::numeric::subrng;
use serde::Serialize;
use std::path::{Path, PathBuf};

pub struct Outcome {
    pub pass: bool,
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output dir {}", dir.display()))?;
    Ok(dir)
}

fn emit<T: Serialize>(
    cfg: &ExperimentConfig,
    study: &str,
    pass: bool,
    report: T,
    csv: Option<(Vec<&str>, Vec<Vec<String>>)>,
) -> Result<()> {
    let dir = out_dir(cfg)?;
    let envelope = Envelope::new(study, cfg.operator.seed, cfg.echo(), pass, report);
    if cfg.output.formats.iter().any(|f| f == "json") {
        write_json(&dir.join(format!("{study}.json")), &envelope)?;
    }
    if let Some((headers, rows)) = csv {
        if cfg.output.formats.iter().any(|f| f == "csv") {
            write_csv(&dir.join(format!("{study}.csv")), &headers, &rows)?;
        }
    }
    Ok(())
}

fn realize(cfg: &ExperimentConfig) -> Result<SpectralFactorization> {
    let grid = cfg.torus()?;
    Ok(cfg.operator_spec().factorized(grid)?)
}

pub fn validate_operator(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.torus()?;
    let op = cfg.operator_spec().realize(grid)?;
    let fact = hardylab::funcalc::factorize(&op)?;
    let est = op.form_estimate();

    #[derive(Serialize)]
    struct Report {
        lambda1: Option<f64>,
        lambda0_hat: f64,
        lambda_upper_hat: f64,
        type_angle: f64,
        kernel_dimension: usize,
        factorization_residual: f64,
        elliptic: bool,
    }
    let report = Report {
        lambda1: op.pointwise_lower(),
        lambda0_hat: est.lambda0_hat,
        lambda_upper_hat: est.lambda_upper_hat,
        type_angle: op.type_angle(),
        kernel_dimension: fact.kernel_dimension(),
        factorization_residual: fact.residual(),
        elliptic: est.is_elliptic(),
    };
    let pass = report.elliptic;
    println!("operator     {} m={} on n={} N={}", cfg.operator.kind, cfg.operator.m, cfg.grid.n, cfg.grid.points);
    match report.lambda1 {
        Some(l1) => println!("lambda1      {l1:.6}"),
        None => println!("lambda1      (not strongly elliptic)"),
    }
    println!("lambda0^     {:.6}", report.lambda0_hat);
    println!("Lambda0^     {:.6}", report.lambda_upper_hat);
    println!("type angle   {:.6}", report.type_angle);
    println!("kernel dim   {}", report.kernel_dimension);
    println!("residual     {:.3e}", report.factorization_residual);
    emit(cfg, "validate-operator", pass, report, None)?;
    Ok(Outcome { pass })
}

pub fn semigroup_bench(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.torus()?;
    let op = cfg.operator_spec().realize(grid)?;
    let fact = hardylab::funcalc::factorize(&op)?;
    let mut rng = subrng(cfg.study.family_seed, "bench-probes");
    let band = ((grid.points_per_axis() / 2).saturating_sub(1)).min(8) as i64;
    let probes: Vec<GridFunction> = (0..20)
        .map(|_| random_bandlimited(grid, band, &mut rng))
        .collect::<std::result::Result<_, _>>()?;

    #[derive(Serialize)]
    struct Row {
        t: f64,
        max_l2_ratio: f64,
        millis: f64,
        oracle_deviation: Option<f64>,
    }
    let mut rows = Vec::new();
    let mut pass = true;
    for &t in &cfg.study.times {
        let started = std::time::Instant::now();
        let mut worst: f64 = 0.0;
        let mut oracle_dev: f64 = 0.0;
        for f in &probes {
            let u = semigroup_apply(&fact, t, f)?;
            worst = worst.max(u.norm_l2() / f.norm_l2());
            if cfg.study.oracle {
                let v = expm_oracle(op.matrix(), t, f)?;
                oracle_dev = oracle_dev.max(u.sub(&v)?.norm_l2() / v.norm_l2().max(1e-300));
            }
        }
        pass &= worst <= 1.0 + 1e-10;
        if cfg.study.oracle {
            pass &= oracle_dev <= 1e-8;
        }
        rows.push(Row {
            t,
            max_l2_ratio: worst,
            millis: started.elapsed().as_secs_f64() * 1e3,
            oracle_deviation: cfg.study.oracle.then_some(oracle_dev),
        });
    }
    println!("{:<12} {:<22} {:<10} {}", "t", "max |e^-tL f|/|f|", "ms", "oracle dev");
    for r in &rows {
        println!(
            "{:<12.3e} {:<22.12} {:<10.2} {}",
            r.t,
            r.max_l2_ratio,
            r.millis,
            r.oracle_deviation.map_or("-".into(), |d| format!("{d:.3e}"))
        );
    }
    let csv_rows = rows
        .iter()
        .map(|r| {
            vec![
                r.t.to_string(),
                r.max_l2_ratio.to_string(),
                r.millis.to_string(),
                r.oracle_deviation.map_or_else(String::new, |d| d.to_string()),
            ]
        })
        .collect();
    emit(
        cfg,
        "semigroup-bench",
        pass,
        rows,
        Some((vec!["t", "max_l2_ratio", "millis", "oracle_deviation"], csv_rows)),
    )?;
    Ok(Outcome { pass })
}

pub fn gaffney(cfg: &ExperimentConfig) -> Result<Outcome> {
    let fact = realize(cfg)?;
    let (ds, ts) = gaffney_defaults(cfg.operator.m);
    let fit = gaffney_check(&fact, &ds, &ts, cfg.study.probes.min(16).max(1), cfg.study.family_seed)?;
    let dev = (fit.q_hat - fit.q_target).abs() / fit.q_target;
    let pass = !fit.degenerate && fit.monotone && dev <= 0.3;
    println!(
        "q_hat {:.4}  target {:.4}  deviation {:.1}%  residual {:.4}  monotone {}",
        fit.q_hat,
        fit.q_target,
        dev * 100.0,
        fit.residual,
        fit.monotone
    );
    let csv_rows = fit
        .distances
        .iter()
        .enumerate()
        .flat_map(|(di, &d)| {
            let fit = &fit;
            fit.times
                .iter()
                .enumerate()
                .map(move |(ti, &t)| {
                    vec![d.to_string(), t.to_string(), fit.log_ratios[di][ti].to_string()]
                })
        })
        .collect();
    emit(
        cfg,
        "gaffney",
        pass,
        &fit,
        Some((vec!["distance", "time", "log_ratio"], csv_rows)),
    )?;
    Ok(Outcome { pass })
}

pub fn caccioppoli(cfg: &ExperimentConfig) -> Result<Outcome> {
    let fact = realize(cfg)?;
    let grid = fact.grid();
    let variant = match cfg.study.variant.as_str() {
        "with_epsilon" => CaccioppoliVariant::WithEpsilon {
            epsilon: cfg.study.caccioppoli_epsilon,
        },
        "gradient_sum" => CaccioppoliVariant::GradientSum,
        _ => CaccioppoliVariant::ZeroOrder,
    };
    let mut probe_rng = subrng(cfg.study.family_seed, "caccioppoli-probe");
    let band = ((grid.points_per_axis() / 2).saturating_sub(1)).min(8) as i64;
    let f = random_bandlimited(grid, band, &mut probe_rng)?.project_mean_zero();
    let reports = caccioppoli_sweep(&fact, &f, cfg.study.configs, cfg.study.family_seed, variant)?;
    let max_c = reports.iter().map(|r| r.constant).fold(0.0f64, f64::max);
    let pass = max_c.is_finite();
    println!(
        "{} configurations, variant {:?}: max implied constant {:.4e}",
        reports.len(),
        cfg.study.variant,
        max_c
    );
    let csv_rows = reports
        .iter()
        .map(|r| {
            vec![
                r.x0.to_string(),
                r.r.to_string(),
                r.t0.to_string(),
                r.lhs.to_string(),
                r.rhs_raw.to_string(),
                r.constant.to_string(),
            ]
        })
        .collect();
    emit(
        cfg,
        "caccioppoli",
        pass,
        &reports,
        Some((vec!["x0", "r", "t0", "lhs", "rhs_raw", "constant"], csv_rows)),
    )?;
    Ok(Outcome { pass })
}

fn realize_pair(
    cfg: &ExperimentConfig,
) -> Result<(
    SpectralFactorization,
    hardylab::experiments::FunctionFamily,
    hardylab::conegeo::TimeGrid,
)> {
    let fact = realize(cfg)?;
    let family = cfg.family_spec().realize(&fact)?;
    let tg = cfg.time_grid_for(fact.grid())?;
    Ok((fact, family, tg))
}

fn realize_refined(
    cfg: &ExperimentConfig,
) -> Result<(
    SpectralFactorization,
    hardylab::experiments::FunctionFamily,
    hardylab::conegeo::TimeGrid,
)> {
    let grid2 = make_grid(cfg.grid.n, cfg.grid.points * 2)?;
    let fact2 = cfg.operator_spec().factorized(grid2)?;
    let family2 = cfg.family_spec().realize(&fact2)?;
    let tg2 = cfg.time_grid_for(grid2)?;
    Ok((fact2, family2, tg2))
}

pub fn equivalence(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (fact, family, tg) = realize_pair(cfg)?;
    let a = FunctionalSpec::parse(&cfg.study.a, cfg.study.aperture)?;
    let b = FunctionalSpec::parse(&cfg.study.b, cfg.study.aperture)?;
    let refined = if cfg.study.refine {
        Some(realize_refined(cfg)?)
    } else {
        None
    };
    let refined_ref = refined.as_ref().map(|(f, fam, t)| (f, fam, t));
    let reports = equivalence_suite(
        &fact,
        &[(a, b)],
        &cfg.study.p,
        &family,
        &tg,
        (cfg.study.spread_threshold, cfg.study.drift_threshold),
        refined_ref,
    )?;
    let pass = reports.iter().all(|r| r.pass);
    println!(
        "{:<28} {:<28} {:<6} {:<22} {:<9} {}",
        "A", "B", "p", "band", "spread", "pass"
    );
    for r in &reports {
        println!(
            "{:<28} {:<28} {:<6} [{:.4}, {:.4}]     {:<9.3} {}",
            r.functional_a, r.functional_b, r.p, r.band.0, r.band.1, r.spread, r.pass
        );
    }
    let csv_rows = reports
        .iter()
        .flat_map(|r| {
            r.members.iter().map(move |m| {
                vec![
                    r.functional_a.clone(),
                    r.functional_b.clone(),
                    r.p.to_string(),
                    m.label.clone(),
                    m.norm_a.to_string(),
                    m.norm_b.to_string(),
                    m.ratio.to_string(),
                ]
            })
        })
        .collect();
    emit(
        cfg,
        "equivalence",
        pass,
        &reports,
        Some((
            vec!["functional_a", "functional_b", "p", "member", "norm_a", "norm_b", "ratio"],
            csv_rows,
        )),
    )?;
    Ok(Outcome { pass })
}

pub fn domination(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (fact, family, tg) = realize_pair(cfg)?;
    let mut reports = Vec::new();
    let mut pass = true;
    for &p in &cfg.study.p {
        let rep = domination_study(&fact, p, &family, &tg, cfg.study.gamma)?;
        pass &= rep.pass;
        for b in &rep.bounds {
            println!("p={p}: {:<20} max C = {:.4}", b.name, b.family_max);
        }
        println!("p={p}: geometric-mean C0 = {:.4}", rep.geometric_mean_c0);
        reports.push(rep);
    }
    let lemma = tent_domination_check(&fact, &family.members[8], 1.0, &tg)?;
    println!(
        "tent lemma: hypothesis C0 = {:.4}, conclusion C1 = {:.4}",
        lemma.hypothesis_c0, lemma.conclusion_c1
    );
    pass &= lemma.pass;

    #[derive(Serialize)]
    struct Report<'a> {
        dominations: &'a [hardylab::experiments::DominationReport],
        tent_lemma: hardylab::experiments::TentLemmaReport,
    }
    let csv_rows = reports
        .iter()
        .flat_map(|rep| {
            rep.bounds.iter().flat_map(move |b| {
                b.per_member.iter().map(move |m| {
                    vec![
                        rep.p.to_string(),
                        b.name.clone(),
                        m.label.clone(),
                        m.ratio.to_string(),
                    ]
                })
            })
        })
        .collect();
    emit(
        cfg,
        "domination",
        pass,
        Report {
            dominations: &reports,
            tent_lemma: lemma,
        },
        Some((vec!["p", "bound", "member", "constant"], csv_rows)),
    )?;
    Ok(Outcome { pass })
}

pub fn aperture(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (fact, family, tg) = realize_pair(cfg)?;
    let mut reports = Vec::new();
    let mut pass = true;
    for &p in &cfg.study.p {
        let rep = aperture_study(&fact, p, &family, &tg, 4.0)?;
        println!(
            "p={p}: vertical spread {:.3}, lusin spread {:.3} (threshold {})",
            rep.vertical_spread, rep.lusin_spread, rep.threshold
        );
        pass &= rep.pass;
        reports.push(rep);
    }
    let csv_rows = reports
        .iter()
        .flat_map(|r| {
            r.vertical
                .iter()
                .map(move |m| vec![r.p.to_string(), "vertical".into(), m.label.clone(), m.ratio.to_string()])
                .chain(
                    r.lusin
                        .iter()
                        .map(move |m| vec![r.p.to_string(), "lusin".into(), m.label.clone(), m.ratio.to_string()]),
                )
        })
        .collect();
    emit(
        cfg,
        "aperture",
        pass,
        &reports,
        Some((vec!["p", "kind", "member", "ratio"], csv_rows)),
    )?;
    Ok(Outcome { pass })
}

pub fn molecule(cfg: &ExperimentConfig) -> Result<Outcome> {
    let fact = realize(cfg)?;
    let tg = cfg.time_grid_for(fact.grid())?;
    let rep = molecule_study(
        &fact,
        cfg.study.molecule_count,
        cfg.study.molecule_radius,
        1.0,
        cfg.study.vanishing_order,
        cfg.study.epsilon,
        cfg.study.family_seed,
        &tg,
        cfg.study.spread_threshold,
    )?;
    println!(
        "{} molecules: all verified = {}, worst bound = {:.6}, ‖S_L α‖ spread = {:.3}, p-sum C = {:.4e}",
        rep.count, rep.all_verified, rep.worst_bound, rep.spread, rep.psum_constant
    );
    let pass = rep.pass;
    let csv_rows = rep
        .sl_norms
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), v.to_string()])
        .collect();
    emit(cfg, "molecule", pass, &rep, Some((vec!["molecule", "sl_norm"], csv_rows)))?;
    Ok(Outcome { pass })
}

pub fn reproduce(cfg: &ExperimentConfig) -> Result<Outcome> {
    let fact = realize(cfg)?;
    let grid = fact.grid();
    // the reproducing integral wants a wide window; fall back to the
    // dedicated default rather than the cone default
    let tg = if cfg.time_grid.t_min.is_none() {
        make_time_grid(1e-3, 10.0, cfg.time_grid.levels.unwrap_or(200))?
    } else {
        cfg.time_grid_for(grid)?
    };
    let mut rng = subrng(cfg.study.family_seed, "reproduce-probes");
    let band = ((grid.points_per_axis() / 2).saturating_sub(1)).min(8) as i64;

    #[derive(Serialize)]
    struct Row {
        probe: usize,
        relative_error: f64,
    }
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        let f = random_bandlimited(grid, band, &mut rng)?.project_mean_zero();
        let rec = calderon_reproduce(&fact, &f, cfg.study.vanishing_order, &tg)?;
        let err = rec.sub(&f)?.norm_l2() / f.norm_l2();
        worst = worst.max(err);
        rows.push(Row {
            probe: i,
            relative_error: err,
        });
    }
    let pass = worst <= 1e-3;
    println!("max reproduction error over {} probes: {:.3e} (limit 1e-3)", rows.len(), worst);
    let csv_rows = rows
        .iter()
        .map(|r| vec![r.probe.to_string(), r.relative_error.to_string()])
        .collect();
    emit(cfg, "reproduce", pass, rows, Some((vec!["probe", "relative_error"], csv_rows)))?;
    Ok(Outcome { pass })
}

pub fn pq_probe(cfg: &ExperimentConfig) -> Result<Outcome> {
    let fact = realize(cfg)?;
    let rep = pq_interval_probe(
        &fact,
        &cfg.study.p,
        &cfg.study.times,
        cfg.study.probes,
        cfg.study.family_seed,
    )?;
    println!("{:<8} {}", "p", "sup_t estimate (lower bound)");
    for (p, s) in &rep.sup_per_p {
        println!("{p:<8} {s:.8}");
    }
    let pass = rep.sup_per_p.iter().all(|(_, s)| s.is_finite());
    let csv_rows = rep
        .rows
        .iter()
        .map(|(p, t, e)| vec![p.to_string(), t.to_string(), e.to_string()])
        .collect();
    emit(cfg, "pq-probe", pass, &rep, Some((vec!["p", "t", "estimate"], csv_rows)))?;
    Ok(Outcome { pass })
}

pub fn riesz(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (fact, family, tg) = realize_pair(cfg)?;
    let reference = OperatorSpec::polyharmonic(1).factorized(fact.grid())?;
    let mut pass = true;
    let mut reports = Vec::new();
    for &p in &cfg.study.p {
        let rep = riesz_study(&fact, &reference, p, &family, &tg)?;
        println!("p={p}: family max constant {:.4}", rep.family_max);
        pass &= rep.pass;
        reports.push(rep);
    }
    let csv_rows = reports
        .iter()
        .flat_map(|r| {
            r.per_member
                .iter()
                .map(move |m| vec![r.p.to_string(), m.label.clone(), m.ratio.to_string()])
        })
        .collect();
    emit(cfg, "riesz", pass, &reports, Some((vec!["p", "member", "constant"], csv_rows)))?;
    Ok(Outcome { pass })
}

pub fn report_merge(cfg: &ExperimentConfig, inputs: &[PathBuf], output: Option<&Path>) -> Result<Outcome> {
    if inputs.is_empty() {
        bail!("report-merge: no input reports given");
    }
    let mut reports = Vec::new();
    let mut pass = true;
    let mut rows = Vec::new();
    for path in inputs {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read report {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let study = value
            .get("study")
            .and_then(|v| v.as_str())
            .unwrap_or("unknown")
            .to_string();
        let this_pass = value.get("pass").and_then(|v| v.as_bool()).unwrap_or(false);
        pass &= this_pass;
        rows.push(vec![study.clone(), this_pass.to_string()]);
        reports.push(value);
    }
    let envelope = Envelope::new("report-merge", cfg.operator.seed, cfg.echo(), pass, reports);
    let dir = out_dir(cfg)?;
    let path = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join("merged.json"));
    write_json(&path, &envelope)?;
    write_csv(&dir.join("merged.csv"), &["study", "pass"], &rows)?;
    println!("merged {} reports -> {} (pass = {pass})", rows.len(), path.display());
    Ok(Outcome { pass })
}
