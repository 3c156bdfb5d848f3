//! Configuration-driven experiment runner.
//!
//! One structured TOML config per run; flags override individual leaves.
//! Exit codes: 0 = study passed, 1 = study ran but a pass flag is false,
//! 2 = configuration or usage error.

mod commands;
mod config;

use anyhow::Result;
use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hardylab",
    about = "Heat-semigroup functionals and Hardy quasi-norm experiments for higher-order elliptic operators on the torus"
)]
struct Cli {
    /// TOML configuration file (defaults apply when omitted)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory override
    #[arg(long, global = true)]
    out: Option<String>,

    /// Operator seed override
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Points per axis override
    #[arg(long, global = true, value_name = "N")]
    points: Option<usize>,

    /// Dimension override (1 or 2)
    #[arg(long, global = true)]
    dim: Option<usize>,

    /// Half-order override
    #[arg(long, global = true)]
    m: Option<u32>,

    /// Operator kind override (polyharmonic | random)
    #[arg(long, global = true)]
    kind: Option<String>,

    /// Perturbation size override
    #[arg(long, global = true)]
    delta: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the operator and print its ellipticity certificate
    ValidateOperator,
    /// Timed semigroup applications with contraction checks
    SemigroupBench {
        /// also cross-check against the independent Taylor oracle
        #[arg(long)]
        oracle: bool,
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Off-diagonal decay measurement and exponent fit
    Gaffney {
        #[arg(long)]
        probes: Option<usize>,
    },
    /// Parabolic Caccioppoli constants over random configurations
    Caccioppoli {
        #[arg(long)]
        configs: Option<usize>,
        /// with_epsilon | gradient_sum | zero_order
        #[arg(long)]
        variant: Option<String>,
    },
    /// Quasi-norm ratio band between two functionals
    Equivalence {
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        b: Option<String>,
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        #[arg(long)]
        aperture: Option<f64>,
        /// also measure the N -> 2N refinement drift
        #[arg(long)]
        refine: bool,
    },
    /// One-sided domination constants and the tent-space lemma check
    Domination {
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
    },
    /// Aperture robustness of the square functions
    Aperture {
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
    },
    /// Generate and verify molecules; measure their square-function spread
    Molecule {
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        vanishing_order: Option<u32>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Reproducing-formula reconstruction errors
    Reproduce {
        #[arg(long)]
        vanishing_order: Option<u32>,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Heuristic L^p boundedness scan of the semigroup
    PqProbe {
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long)]
        probes: Option<usize>,
    },
    /// Riesz transform versus Hardy quasi-norm comparison
    Riesz {
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
    },
    /// Merge report JSON files into one summary
    ReportMerge {
        inputs: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.operator.seed = seed;
    }
    if let Some(points) = cli.points {
        cfg.grid.points = points;
    }
    if let Some(dim) = cli.dim {
        cfg.grid.n = dim;
    }
    if let Some(m) = cli.m {
        cfg.operator.m = m;
    }
    if let Some(kind) = &cli.kind {
        cfg.operator.kind = kind.clone();
    }
    if let Some(delta) = cli.delta {
        cfg.operator.delta = delta;
    }

    // study-level flag overrides
    match &cli.command {
        Command::SemigroupBench { oracle, times } => {
            cfg.study.oracle = *oracle;
            if let Some(times) = times {
                cfg.study.times = times.clone();
            }
        }
        Command::Gaffney { probes } => {
            if let Some(p) = probes {
                cfg.study.probes = *p;
            }
        }
        Command::Caccioppoli { configs, variant } => {
            if let Some(c) = configs {
                cfg.study.configs = *c;
            }
            if let Some(v) = variant {
                cfg.study.variant = v.clone();
            }
        }
        Command::Equivalence {
            a,
            b,
            p,
            aperture,
            refine,
        } => {
            if let Some(a) = a {
                cfg.study.a = a.clone();
            }
            if let Some(b) = b {
                cfg.study.b = b.clone();
            }
            if let Some(p) = p {
                cfg.study.p = p.clone();
            }
            if let Some(l) = aperture {
                cfg.study.aperture = *l;
            }
            cfg.study.refine |= *refine;
        }
        Command::Domination { gamma, p } => {
            if let Some(g) = gamma {
                cfg.study.gamma = *g;
            }
            if let Some(p) = p {
                cfg.study.p = p.clone();
            }
        }
        Command::Aperture { p } => {
            if let Some(p) = p {
                cfg.study.p = p.clone();
            }
        }
        Command::Molecule {
            count,
            radius,
            vanishing_order,
            epsilon,
        } => {
            if let Some(c) = count {
                cfg.study.molecule_count = *c;
            }
            if let Some(r) = radius {
                cfg.study.molecule_radius = *r;
            }
            if let Some(m) = vanishing_order {
                cfg.study.vanishing_order = *m;
            }
            if let Some(e) = epsilon {
                cfg.study.epsilon = *e;
            }
        }
        Command::Reproduce {
            vanishing_order,
            levels,
        } => {
            if let Some(m) = vanishing_order {
                cfg.study.vanishing_order = *m;
            }
            if let Some(l) = levels {
                cfg.time_grid.levels = Some(*l);
            }
        }
        Command::PqProbe { p, times, probes } => {
            if let Some(p) = p {
                cfg.study.p = p.clone();
            }
            if let Some(t) = times {
                cfg.study.times = t.clone();
            }
            if let Some(c) = probes {
                cfg.study.probes = *c;
            }
        }
        Command::Riesz { p } => {
            if let Some(p) = p {
                cfg.study.p = p.clone();
            }
        }
        Command::ValidateOperator | Command::ReportMerge { .. } => {}
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("configuration error: {err:#}");
            return ExitCode::from(2);
        }
    };
    if let Err(err) = cfg.validate() {
        eprintln!("configuration error: {err:#}");
        return ExitCode::from(2);
    }

    let result = match &cli.command {
        Command::ValidateOperator => commands::validate_operator(&cfg),
        Command::SemigroupBench { .. } => commands::semigroup_bench(&cfg),
        Command::Gaffney { .. } => commands::gaffney(&cfg),
        Command::Caccioppoli { .. } => commands::caccioppoli(&cfg),
        Command::Equivalence { .. } => commands::equivalence(&cfg),
        Command::Domination { .. } => commands::domination(&cfg),
        Command::Aperture { .. } => commands::aperture(&cfg),
        Command::Molecule { .. } => commands::molecule(&cfg),
        Command::Reproduce { .. } => commands::reproduce(&cfg),
        Command::PqProbe { .. } => commands::pq_probe(&cfg),
        Command::Riesz { .. } => commands::riesz(&cfg),
        Command::ReportMerge { inputs, output } => {
            commands::report_merge(&cfg, inputs, output.as_deref())
        }
    };

    match result {
        Ok(outcome) if outcome.pass => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("study completed with failing pass flags");
            ExitCode::from(1)
        }
        Err(err) => {
            // precondition violations are usage errors; numeric failures are
            // study failures
            let usage = err
                .downcast_ref::<hardylab::Error>()
                .map(|e| matches!(e, hardylab::Error::InvalidParameter { .. }))
                .unwrap_or(false);
            eprintln!("error: {err:#}");
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
