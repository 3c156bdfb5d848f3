//! The individual studies: equivalence ratio bands, one-sided dominations,
//! aperture robustness, parabolic Caccioppoli constants, off-diagonal decay
//! fits, L^p boundedness probes, Riesz-transform comparisons and molecule
//! suites.

use super::{FunctionFamily, FunctionalSpec};
use crate::conegeo::{
    a_functional_all, build_tent_field, ConeSampling, Generator, TimeGrid,
};
use crate::funcalc::{semigroup_apply, SpectralFactorization, Symbol};
use crate::functionals::CutoffDescriptor;
use crate::hardy::{generate_molecule, hardy_quasinorm, MolecularRepresentation, Molecule};
use crate::lattice::{
    ball_indices, gradient_block, lp_quasinorm, random_bandlimited, GridFunction,
};
use crate::numeric::subrng;
use crate::{Error, Result};
use ndarray::Array1;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Per-member ratio entry of an equivalence study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberRatio {
    pub label: String,
    pub norm_a: f64,
    pub norm_b: f64,
    pub ratio: f64,
}

/// Spread movement under grid refinement `N → 2N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementDrift {
    pub coarse_spread: f64,
    pub fine_spread: f64,
    /// `max(fine/coarse, coarse/fine) ≥ 1`
    pub drift: f64,
}

/// Outcome of one quasi-norm equivalence measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub functional_a: String,
    pub functional_b: String,
    pub p: f64,
    pub members: Vec<MemberRatio>,
    pub band: (f64, f64),
    pub spread: f64,
    pub spread_threshold: f64,
    pub drift_threshold: f64,
    pub refinement: Option<RefinementDrift>,
    pub pass: bool,
}

fn ratio_stats(members: &[MemberRatio]) -> ((f64, f64), f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for m in members {
        lo = lo.min(m.ratio);
        hi = hi.max(m.ratio);
    }
    ((lo, hi), hi / lo)
}

fn member_ratios(
    fact: &SpectralFactorization,
    a: FunctionalSpec,
    b: FunctionalSpec,
    p: f64,
    family: &FunctionFamily,
    tg: &TimeGrid,
    cutoff: &CutoffDescriptor,
) -> Result<Vec<MemberRatio>> {
    family
        .descriptors
        .iter()
        .zip(&family.members)
        .map(|(d, f)| {
            let na = a.norm(fact, f, p, tg, cutoff)?;
            let nb = b.norm(fact, f, p, tg, cutoff)?;
            Ok(MemberRatio {
                label: d.label(),
                norm_a: na,
                norm_b: nb,
                ratio: na / nb,
            })
        })
        .collect()
}

/// Measure `‖A f‖_p / ‖B f‖_p` over the family; pass iff the spread stays
/// under its threshold and, when a refined realization is supplied, the
/// spread moves by at most the drift threshold.
#[allow(clippy::too_many_arguments)]
pub fn equivalence_study(
    fact: &SpectralFactorization,
    a: FunctionalSpec,
    b: FunctionalSpec,
    p: f64,
    family: &FunctionFamily,
    tg: &TimeGrid,
    thresholds: (f64, f64),
    refined: Option<(&SpectralFactorization, &FunctionFamily, &TimeGrid)>,
) -> Result<EquivalenceReport> {
    let cutoff = CutoffDescriptor::standard(fact.half_order());
    let members = member_ratios(fact, a, b, p, family, tg, &cutoff)?;
    let (band, spread) = ratio_stats(&members);
    let refinement = match refined {
        None => None,
        Some((fact2, family2, tg2)) => {
            let members2 = member_ratios(fact2, a, b, p, family2, tg2, &cutoff)?;
            let (_, fine_spread) = ratio_stats(&members2);
            Some(RefinementDrift {
                coarse_spread: spread,
                fine_spread,
                drift: (fine_spread / spread).max(spread / fine_spread),
            })
        }
    };
    let finite = members.iter().all(|m| m.ratio.is_finite() && m.ratio > 0.0);
    let pass = finite
        && spread <= thresholds.0
        && refinement.as_ref().map_or(true, |r| r.drift <= thresholds.1);
    Ok(EquivalenceReport {
        functional_a: a.label(),
        functional_b: b.label(),
        p,
        members,
        band,
        spread,
        spread_threshold: thresholds.0,
        drift_threshold: thresholds.1,
        refinement,
        pass,
    })
}

/// Run several functional pairs at several exponents, reusing the sitewise
/// fields across exponents.
#[allow(clippy::too_many_arguments)]
pub fn equivalence_suite(
    fact: &SpectralFactorization,
    pairs: &[(FunctionalSpec, FunctionalSpec)],
    ps: &[f64],
    family: &FunctionFamily,
    tg: &TimeGrid,
    thresholds: (f64, f64),
    refined: Option<(&SpectralFactorization, &FunctionFamily, &TimeGrid)>,
) -> Result<Vec<EquivalenceReport>> {
    let cutoff = CutoffDescriptor::standard(fact.half_order());
    // distinct functionals across all pairs
    let mut specs: Vec<FunctionalSpec> = Vec::new();
    for (a, b) in pairs {
        for s in [a, b] {
            if !specs.contains(s) {
                specs.push(*s);
            }
        }
    }
    let eval_fields = |fct: &SpectralFactorization,
                       fam: &FunctionFamily,
                       grid_tg: &TimeGrid|
     -> Result<Vec<Vec<GridFunction>>> {
        fam.members
            .iter()
            .map(|f| {
                specs
                    .iter()
                    .map(|s| s.field(fct, f, grid_tg, &cutoff))
                    .collect::<Result<Vec<_>>>()
            })
            .collect()
    };
    let coarse_fields = eval_fields(fact, family, tg)?;
    let fine_fields = match refined {
        None => None,
        Some((fact2, family2, tg2)) => Some(eval_fields(fact2, family2, tg2)?),
    };

    let spec_index = |s: &FunctionalSpec| specs.iter().position(|x| x == s).unwrap();
    let mut reports = Vec::new();
    for &(a, b) in pairs {
        let (ia, ib) = (spec_index(&a), spec_index(&b));
        for &p in ps {
            let build = |fields: &Vec<Vec<GridFunction>>| -> Result<Vec<MemberRatio>> {
                family
                    .descriptors
                    .iter()
                    .enumerate()
                    .map(|(mi, d)| {
                        let na = lp_quasinorm(&fields[mi][ia], p)?;
                        let nb = lp_quasinorm(&fields[mi][ib], p)?;
                        Ok(MemberRatio {
                            label: d.label(),
                            norm_a: na,
                            norm_b: nb,
                            ratio: na / nb,
                        })
                    })
                    .collect()
            };
            let members = build(&coarse_fields)?;
            let (band, spread) = ratio_stats(&members);
            let refinement = match &fine_fields {
                None => None,
                Some(ff) => {
                    let members2 = build(ff)?;
                    let (_, fine_spread) = ratio_stats(&members2);
                    Some(RefinementDrift {
                        coarse_spread: spread,
                        fine_spread,
                        drift: (fine_spread / spread).max(spread / fine_spread),
                    })
                }
            };
            let finite = members.iter().all(|m| m.ratio.is_finite() && m.ratio > 0.0);
            let pass = finite
                && spread <= thresholds.0
                && refinement.as_ref().map_or(true, |r| r.drift <= thresholds.1);
            reports.push(EquivalenceReport {
                functional_a: a.label(),
                functional_b: b.label(),
                p,
                members,
                band,
                spread,
                spread_threshold: thresholds.0,
                drift_threshold: thresholds.1,
                refinement,
                pass,
            });
        }
    }
    Ok(reports)
}

/// Aperture robustness: spread of `‖S^{λ=2} f‖_p / ‖S^{λ=1} f‖_p` over the
/// family, for both square-function kinds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApertureReport {
    pub p: f64,
    pub vertical: Vec<MemberRatio>,
    pub vertical_spread: f64,
    pub lusin: Vec<MemberRatio>,
    pub lusin_spread: f64,
    pub threshold: f64,
    pub pass: bool,
}

pub fn aperture_study(
    fact: &SpectralFactorization,
    p: f64,
    family: &FunctionFamily,
    tg: &TimeGrid,
    threshold: f64,
) -> Result<ApertureReport> {
    let cutoff = CutoffDescriptor::standard(fact.half_order());
    let vertical = member_ratios(
        fact,
        FunctionalSpec::SquareVertical { k: 1, aperture: 2.0 },
        FunctionalSpec::SquareVertical { k: 1, aperture: 1.0 },
        p,
        family,
        tg,
        &cutoff,
    )?;
    let lusin = member_ratios(
        fact,
        FunctionalSpec::SquareLusin { k: 0, aperture: 2.0 },
        FunctionalSpec::SquareLusin { k: 0, aperture: 1.0 },
        p,
        family,
        tg,
        &cutoff,
    )?;
    let (_, vertical_spread) = ratio_stats(&vertical);
    let (_, lusin_spread) = ratio_stats(&lusin);
    let pass = vertical_spread <= threshold && lusin_spread <= threshold;
    Ok(ApertureReport {
        p,
        vertical,
        vertical_spread,
        lusin,
        lusin_spread,
        threshold,
        pass,
    })
}

/// One directed bound `‖A f‖_p ≤ C ‖B f‖_p` with its per-member implied
/// constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub per_member: Vec<MemberRatio>,
    pub family_max: f64,
    pub skipped: Vec<String>,
    pub pass: bool,
}

/// One-sided domination suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationReport {
    pub p: f64,
    pub gamma: f64,
    pub bounds: Vec<BoundReport>,
    /// sitewise geometric-mean constant `C_0` over the first members
    pub geometric_mean_c0: f64,
    /// per-(k,m) implied constants of the gradient interpolation inequality
    pub interpolation: Vec<(u32, u32, f64)>,
    pub pass: bool,
}

fn directed_bound(
    fact: &SpectralFactorization,
    name: &str,
    a: FunctionalSpec,
    b: FunctionalSpec,
    p: f64,
    family: &FunctionFamily,
    tg: &TimeGrid,
    cutoff: &CutoffDescriptor,
) -> Result<BoundReport> {
    let mut per_member = Vec::new();
    let mut skipped = Vec::new();
    for (d, f) in family.descriptors.iter().zip(&family.members) {
        let na = a.norm(fact, f, p, tg, cutoff)?;
        let nb = b.norm(fact, f, p, tg, cutoff)?;
        if nb == 0.0 {
            skipped.push(format!("{}: functional b vanished", d.label()));
            continue;
        }
        per_member.push(MemberRatio {
            label: d.label(),
            norm_a: na,
            norm_b: nb,
            ratio: na / nb,
        });
    }
    let family_max = per_member.iter().map(|m| m.ratio).fold(0.0, f64::max);
    let pass = family_max.is_finite() && !per_member.is_empty();
    Ok(BoundReport {
        name: name.to_string(),
        per_member,
        family_max,
        skipped,
        pass,
    })
}

/// Evaluate the one-sided bounds, the pointwise geometric-mean inequality
/// and the gradient interpolation inequality.
pub fn domination_study(
    fact: &SpectralFactorization,
    p: f64,
    family: &FunctionFamily,
    tg: &TimeGrid,
    gamma: f64,
) -> Result<DominationReport> {
    let cutoff = CutoffDescriptor::standard(fact.half_order());
    let bounds = vec![
        directed_bound(
            fact,
            "S_L <= C S_hL",
            FunctionalSpec::SquareVertical { k: 1, aperture: 1.0 },
            FunctionalSpec::SquareLusin { k: 0, aperture: 1.0 },
            p,
            family,
            tg,
            &cutoff,
        )?,
        directed_bound(
            fact,
            "S_hL1 <= C S_L",
            FunctionalSpec::SquareLusin { k: 1, aperture: 1.0 },
            FunctionalSpec::SquareVertical { k: 1, aperture: 1.0 },
            p,
            family,
            tg,
            &cutoff,
        )?,
        directed_bound(
            fact,
            "S_hL <= C N^γ_hL",
            FunctionalSpec::SquareLusin { k: 0, aperture: 1.0 },
            FunctionalSpec::MaximalNonTangential { aperture: gamma },
            p,
            family,
            tg,
            &cutoff,
        )?,
        directed_bound(
            fact,
            "S_L <= C Lp",
            FunctionalSpec::SquareVertical { k: 1, aperture: 1.0 },
            FunctionalSpec::Lebesgue,
            p,
            family,
            tg,
            &cutoff,
        )?,
        directed_bound(
            fact,
            "Lp <= C S_L",
            FunctionalSpec::Lebesgue,
            FunctionalSpec::SquareVertical { k: 1, aperture: 1.0 },
            p,
            family,
            tg,
            &cutoff,
        )?,
    ];

    // pointwise S_L(f)(x) ≤ C0 [S²_hL(f)(x)]^{1/2} [S²_L(f)(x)]^{1/2} on the
    // first five members
    let mut c0: f64 = 0.0;
    for f in family.members.iter().take(5) {
        let s = FunctionalSpec::SquareVertical { k: 1, aperture: 1.0 }.field(fact, f, tg, &cutoff)?;
        let sh2 = FunctionalSpec::SquareLusin { k: 0, aperture: 2.0 }.field(fact, f, tg, &cutoff)?;
        let s2 = FunctionalSpec::SquareVertical { k: 1, aperture: 2.0 }.field(fact, f, tg, &cutoff)?;
        for i in 0..s.len() {
            let denom = (sh2.values()[i].re * s2.values()[i].re).sqrt();
            if denom > 0.0 {
                c0 = c0.max(s.values()[i].re / denom);
            }
        }
    }

    // ‖∇^k f‖₂ ≤ C ‖∇^m f‖₂^{k/m} ‖f‖₂^{1-k/m} over random band-limited f
    let m = fact.half_order();
    let mut interpolation = Vec::new();
    let mut rng = subrng(77, "interpolation");
    for k in 1..m {
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let f = random_bandlimited(fact.grid(), 6, &mut rng)?.project_mean_zero();
            let gk = gradient_block(&f, k).norm_l2_sqr().sqrt();
            let gm = gradient_block(&f, m).norm_l2_sqr().sqrt();
            let l2 = f.norm_l2();
            let bound = gm.powf(k as f64 / m as f64) * l2.powf(1.0 - k as f64 / m as f64);
            worst = worst.max(gk / bound);
        }
        interpolation.push((k, m, worst));
    }

    let pass = bounds.iter().all(|b| b.pass)
        && c0.is_finite()
        && interpolation.iter().all(|(_, _, c)| c.is_finite());
    Ok(DominationReport {
        p,
        gamma,
        bounds,
        geometric_mean_c0: c0,
        interpolation,
        pass,
    })
}

/// Data-level check of the tent-space domination lemma: measure the
/// hypothesis constant `Ĉ0` in
/// `A_k(F) ≤ C0 [A_{k+1}(G)]^{1/2} [A_{k+1}(F)]^{1/2}` for `k ≤ 4` and the
/// conclusion constant `C1` in `‖F‖_{T^p} ≤ C1 ‖G‖_{T^p}` on the same data,
/// with `F` the heat-power field and `G` the gradient field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TentLemmaReport {
    pub p: f64,
    pub hypothesis_c0: f64,
    pub conclusion_c1: f64,
    pub pass: bool,
}

pub fn tent_domination_check(
    fact: &SpectralFactorization,
    f: &GridFunction,
    p: f64,
    tg: &TimeGrid,
) -> Result<TentLemmaReport> {
    let grid = fact.grid();
    let field_f = build_tent_field(fact, f, Generator::HeatPower { k: 1 }, tg)?;
    let field_g = build_tent_field(fact, f, Generator::GradHeatPower { k: 0 }, tg)?;
    let mut c0: f64 = 0.0;
    for k in 0..=4u32 {
        let cone_k = ConeSampling::new(grid, 2f64.powi(k as i32), tg)?;
        let cone_k1 = ConeSampling::new(grid, 2f64.powi(k as i32 + 1), tg)?;
        let ak_f = a_functional_all(&field_f, &cone_k)?;
        let ak1_f = a_functional_all(&field_f, &cone_k1)?;
        let ak1_g = a_functional_all(&field_g, &cone_k1)?;
        for i in 0..grid.total_points() {
            let denom = (ak1_g.values()[i].re * ak1_f.values()[i].re).sqrt();
            if denom > 0.0 {
                c0 = c0.max(ak_f.values()[i].re / denom);
            }
        }
    }
    let cone1 = ConeSampling::new(grid, 1.0, tg)?;
    let tf = lp_quasinorm(&a_functional_all(&field_f, &cone1)?, p)?;
    let tgn = lp_quasinorm(&a_functional_all(&field_g, &cone1)?, p)?;
    let c1 = tf / tgn;
    Ok(TentLemmaReport {
        p,
        hypothesis_c0: c0,
        conclusion_c1: c1,
        pass: c0.is_finite() && c1.is_finite() && c1 > 0.0,
    })
}

/// Parabolic Caccioppoli variants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CaccioppoliVariant {
    /// `∬_1 |∇^m u|² ≤ ε ∬_2 |∇^m u|² + C_ε r^{-2m} ∬_2 |u|²`
    WithEpsilon { epsilon: f64 },
    /// `∬_1 |∇^m u|² ≤ C Σ_{j<m} r^{-2(m-j)} ∬_2 |∇^j u|²`
    GradientSum,
    /// `∬_1 |∇^m u|² ≤ C r^{-2m} ∬_2 |u|²`
    ZeroOrder,
}

/// Measured sides of one Caccioppoli configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaccioppoliReport {
    pub variant: CaccioppoliVariant,
    pub x0: usize,
    pub r: f64,
    pub t0: f64,
    pub lhs: f64,
    /// the right-hand side with the constant factored out
    pub rhs_raw: f64,
    /// implied constant `Ĉ = LHS / RHS_raw` (after removing the ε-term for
    /// the first variant)
    pub constant: f64,
}

/// Time samples per window (the spec floor is 32).
const CACCIOPPOLI_TIME_SAMPLES: usize = 33;

/// Evaluate one Caccioppoli configuration for `u(·,t) = e^{-t^{2m}L} f`.
pub fn caccioppoli_check(
    fact: &SpectralFactorization,
    f: &GridFunction,
    x0: usize,
    r: f64,
    t0: f64,
    variant: CaccioppoliVariant,
) -> Result<CaccioppoliReport> {
    if !(t0 > 3.0 * r) {
        return Err(Error::param("t0", format!("need t0 > 3r, got t0={t0}, r={r}")));
    }
    if 2.0 * r >= 0.5 {
        return Err(Error::param("r", "2r must stay below the injectivity radius 1/2"));
    }
    let grid = fact.grid();
    let m = fact.half_order();
    let vol = grid.cell_volume();
    let inner = ball_indices(grid, x0, r)?;
    let outer = ball_indices(grid, x0, 2.0 * r)?;

    // trapezoid in time over a uniform sampling of the window
    let window = |a: f64, b: f64, weights: &mut Vec<(f64, f64)>| {
        let steps = CACCIOPPOLI_TIME_SAMPLES;
        let dt = (b - a) / (steps - 1) as f64;
        for i in 0..steps {
            let w = if i == 0 || i == steps - 1 { 0.5 } else { 1.0 };
            weights.push((a + i as f64 * dt, w * dt));
        }
    };
    let mut inner_window = Vec::new();
    window(t0 - r, t0 + r, &mut inner_window);
    let mut outer_window = Vec::new();
    window(t0 - 2.0 * r, t0 + 2.0 * r, &mut outer_window);

    let heat = |t: f64| -> Result<GridFunction> {
        let s = t.powi(2 * m as i32);
        fact.applier(Symbol::heat_power(0, s))?.apply(f)
    };

    // LHS: ∫_{t0-r}^{t0+r} ∫_{B(x0,r)} |∇^m u|²
    let mut lhs = 0.0f64;
    for &(t, w) in &inner_window {
        let u = heat(t)?;
        let mag = gradient_block(&u, m).magnitude();
        let space: f64 = inner.sites.iter().map(|&s| mag.values()[s].norm_sqr()).sum();
        lhs += w * vol * space;
    }

    // RHS ingredients on the doubled window/ball
    let mut grad_m_outer = 0.0f64;
    let mut zero_outer = 0.0f64;
    let mut grads_outer = vec![0.0f64; m as usize]; // ∇^j for j = 0..m-1
    for &(t, w) in &outer_window {
        let u = heat(t)?;
        let mag = gradient_block(&u, m).magnitude();
        grad_m_outer += w
            * vol
            * outer
                .sites
                .iter()
                .map(|&s| mag.values()[s].norm_sqr())
                .sum::<f64>();
        zero_outer += w
            * vol
            * outer
                .sites
                .iter()
                .map(|&s| u.values()[s].norm_sqr())
                .sum::<f64>();
        for j in 0..m {
            let mj = gradient_block(&u, j).magnitude();
            grads_outer[j as usize] += w
                * vol
                * outer
                    .sites
                    .iter()
                    .map(|&s| mj.values()[s].norm_sqr())
                    .sum::<f64>();
        }
    }

    let (rhs_raw, constant) = match variant {
        CaccioppoliVariant::WithEpsilon { epsilon } => {
            let raw = zero_outer / r.powi(2 * m as i32);
            let c = ((lhs - epsilon * grad_m_outer).max(0.0)) / raw.max(1e-300);
            (raw, c)
        }
        CaccioppoliVariant::GradientSum => {
            let raw: f64 = (0..m)
                .map(|j| grads_outer[j as usize] / r.powi(2 * (m - j) as i32))
                .sum();
            (raw, lhs / raw.max(1e-300))
        }
        CaccioppoliVariant::ZeroOrder => {
            let raw = zero_outer / r.powi(2 * m as i32);
            (raw, lhs / raw.max(1e-300))
        }
    };
    Ok(CaccioppoliReport {
        variant,
        x0,
        r,
        t0,
        lhs,
        rhs_raw,
        constant,
    })
}

/// Seeded sweep of random Caccioppoli configurations `(x0, r, t0)` with
/// `r ∈ [4h, 0.1]` and `t0 ∈ (3r, ∞)` as the standing assumption requires.
pub fn caccioppoli_sweep(
    fact: &SpectralFactorization,
    f: &GridFunction,
    configs: usize,
    seed: u64,
    variant: CaccioppoliVariant,
) -> Result<Vec<CaccioppoliReport>> {
    let grid = fact.grid();
    let h = grid.spacing();
    let mut rng = subrng(seed, "caccioppoli-configs");
    let mut out = Vec::with_capacity(configs);
    for _ in 0..configs {
        let x0 = rng.random_range(0..grid.total_points());
        let r = 4.0 * h + rng.random::<f64>() * (0.1 - 4.0 * h).max(0.0);
        // keep t0 just above the 3r floor so the heat extension has not
        // fully decayed at order 2m
        let t0 = 3.0 * r * (1.05 + 0.25 * rng.random::<f64>());
        out.push(caccioppoli_check(fact, f, x0, r, t0, variant)?);
    }
    Ok(out)
}

/// Off-diagonal decay measurement and exponent fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub distances: Vec<f64>,
    pub times: Vec<f64>,
    /// `log ‖χ_F e^{-tL}(χ_E f)‖ - log ‖χ_E f‖`, row per distance
    pub log_ratios: Vec<Vec<f64>>,
    pub q_hat: f64,
    pub q_target: f64,
    pub residual: f64,
    /// measured norms strictly decrease in distance at every fixed time
    pub monotone: bool,
    /// true when too few measurements survived the roundoff floor
    pub degenerate: bool,
}

/// Patch half-width used for the supported sets.
const GAFFNEY_PATCH_WIDTH: f64 = 0.05;
/// Relative floor below which a measured norm is roundoff, not decay (the
/// factorized semigroup resolves ratios down to roughly 1e-10).
const GAFFNEY_FLOOR: f64 = 1e-9;

/// Built-in (distances, times) schedules per half-order for 1-d probes.
pub fn gaffney_defaults(m: u32) -> (Vec<f64>, Vec<f64>) {
    match m {
        1 => (
            vec![0.15, 0.2, 0.25, 0.3, 0.35],
            vec![5e-4, 1e-3, 2e-3, 4e-3],
        ),
        // for m ≥ 2 the kernel oscillates once d/t^{1/4} gets small, so the
        // schedule stays in the envelope-dominated window
        _ => (
            vec![0.15, 0.2, 0.25, 0.3, 0.35],
            vec![1e-7, 3e-7, 1e-6],
        ),
    }
}

/// Measure `‖χ_F e^{-tL}(χ_E f)‖₂` between separated arcs and fit the decay
/// exponent `q` in `log ∝ -d^q / t^{q/2m}`.
pub fn gaffney_check(
    fact: &SpectralFactorization,
    separations: &[f64],
    times: &[f64],
    probes: usize,
    seed: u64,
) -> Result<DecayFit> {
    let grid = fact.grid();
    if grid.dim() != 1 {
        return Err(Error::param("grid", "decay probes are implemented for 1-d grids"));
    }
    if separations.is_empty() || times.is_empty() || probes == 0 {
        return Err(Error::param("gaffney", "need distances, times and probes"));
    }
    let m = fact.half_order();
    let w = GAFFNEY_PATCH_WIDTH;
    let total = grid.total_points();
    let h = grid.spacing();

    let arc = |lo: f64, hi: f64| -> Vec<usize> {
        (0..total)
            .filter(|&i| {
                let x = i as f64 * h;
                let x = if x > 0.5 { x - 1.0 } else { x };
                x >= lo && x <= hi
            })
            .collect()
    };
    let source = arc(-w / 2.0, w / 2.0);

    // an aligned (constant-on-E) probe realizes the kernel mass between the
    // sets; random draws alone cancel the smooth kernel and overstate decay
    let mut rng = subrng(seed, "gaffney-probe");
    let mut probe_fns: Vec<GridFunction> = Vec::with_capacity(probes + 1);
    {
        let mut vals = Array1::<Complex64>::zeros(total);
        for &s in &source {
            vals[s] = Complex64::new(1.0, 0.0);
        }
        probe_fns.push(GridFunction::from_values(grid, vals)?);
    }
    for _ in 0..probes {
        let mut vals = Array1::<Complex64>::zeros(total);
        for &s in &source {
            vals[s] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        probe_fns.push(GridFunction::from_values(grid, vals)?);
    }

    let mut log_ratios = vec![vec![f64::NEG_INFINITY; times.len()]; separations.len()];
    let mut monotone = true;
    let floor = GAFFNEY_FLOOR.ln();
    for (ti, &t) in times.iter().enumerate() {
        // evolve all probes once per time
        let evolved: Vec<GridFunction> = probe_fns
            .iter()
            .map(|f| semigroup_apply(fact, t, f))
            .collect::<Result<Vec<_>>>()?;
        let mut prev = f64::INFINITY;
        for (di, &d) in separations.iter().enumerate() {
            let target = arc(w / 2.0 + d, w / 2.0 + d + w);
            if target.is_empty() {
                return Err(Error::param("separations", format!("distance {d} leaves no target arc")));
            }
            let mut worst: f64 = 0.0;
            for (f, uf) in probe_fns.iter().zip(&evolved) {
                let masked: f64 = target.iter().map(|&s| uf.values()[s].norm_sqr()).sum();
                let ratio = (grid.cell_volume() * masked).sqrt() / f.norm_l2();
                worst = worst.max(ratio);
            }
            let y = worst.max(1e-300).ln();
            // monotonicity is only meaningful above the roundoff floor
            if y > floor {
                if y >= prev {
                    monotone = false;
                }
                prev = y;
            }
            log_ratios[di][ti] = y;
        }
    }

    // least squares over q: y = a - c · d^q / t^{q/2m}, scanning q densely
    let mut observations = Vec::new();
    for (di, &d) in separations.iter().enumerate() {
        for (ti, &t) in times.iter().enumerate() {
            let y = log_ratios[di][ti];
            if y > floor {
                observations.push((d, t, y));
            }
        }
    }
    if observations.len() < 4 {
        return Ok(DecayFit {
            distances: separations.to_vec(),
            times: times.to_vec(),
            log_ratios,
            q_hat: f64::NAN,
            q_target: 2.0 * m as f64 / (2.0 * m as f64 - 1.0),
            residual: f64::NAN,
            monotone,
            degenerate: true,
        });
    }

    let mut best = (f64::NAN, f64::INFINITY);
    let mut q = 1.05f64;
    while q <= 4.0 {
        // linear LS in (a, c) for fixed q
        let (mut su, mut sy, mut suu, mut suy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let n_obs = observations.len() as f64;
        for &(d, t, y) in &observations {
            let u = d.powf(q) / t.powf(q / (2.0 * m as f64));
            su += u;
            sy += y;
            suu += u * u;
            suy += u * y;
        }
        let det = n_obs * suu - su * su;
        if det.abs() > 1e-14 {
            let c = -(n_obs * suy - su * sy) / det;
            let a = (sy + c * su) / n_obs;
            let rss: f64 = observations
                .iter()
                .map(|&(d, t, y)| {
                    let u = d.powf(q) / t.powf(q / (2.0 * m as f64));
                    (y - a + c * u).powi(2)
                })
                .sum();
            if rss < best.1 {
                best = (q, rss);
            }
        }
        q += 0.005;
    }
    let residual = (best.1 / observations.len() as f64).sqrt();
    Ok(DecayFit {
        distances: separations.to_vec(),
        times: times.to_vec(),
        log_ratios,
        q_hat: best.0,
        q_target: 2.0 * m as f64 / (2.0 * m as f64 - 1.0),
        residual,
        monotone,
        degenerate: false,
    })
}

/// Heuristic `sup_t ‖e^{-tL}‖_{p→p}` lower-bound table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PqReport {
    /// (p, t, estimate) rows
    pub rows: Vec<(f64, f64, f64)>,
    /// per-p supremum over the probed times
    pub sup_per_p: Vec<(f64, f64)>,
    /// explicitly a lower-bound-only scan
    pub lower_bound_only: bool,
}

/// Probe `max_f ‖e^{-tL} f‖_p / ‖f‖_p` over a deterministic probe set.
pub fn pq_interval_probe(
    fact: &SpectralFactorization,
    ps: &[f64],
    ts: &[f64],
    probes: usize,
    seed: u64,
) -> Result<PqReport> {
    if probes < 50 {
        return Err(Error::param("probes", "need at least 50 probes"));
    }
    let grid = fact.grid();
    let mut rng = subrng(seed, "pq-probe");
    let mut probe_fns: Vec<GridFunction> = vec![
        GridFunction::constant(grid, Complex64::from(1.0)),
        GridFunction::fourier_mode(grid, &[1, 0]),
        GridFunction::fourier_mode(grid, &[3, 0]),
    ];
    // a sharp bump stresses p away from 2
    probe_fns.push(GridFunction::from_fn(grid, |x| {
        let d = x[0].min(1.0 - x[0]);
        Complex64::from((-d * d / (2.0 * 0.02f64.powi(2))).exp())
    }));
    let band = ((grid.points_per_axis() / 2).saturating_sub(1)).min(8) as i64;
    while probe_fns.len() < probes {
        probe_fns.push(random_bandlimited(grid, band, &mut rng)?);
    }

    let mut rows = Vec::new();
    let mut sup_per_p: Vec<(f64, f64)> = ps.iter().map(|&p| (p, 0.0)).collect();
    for &t in ts {
        let evolved: Vec<GridFunction> = probe_fns
            .iter()
            .map(|f| semigroup_apply(fact, t, f))
            .collect::<Result<Vec<_>>>()?;
        for (pi, &p) in ps.iter().enumerate() {
            let mut worst: f64 = 0.0;
            for (f, uf) in probe_fns.iter().zip(&evolved) {
                worst = worst.max(lp_quasinorm(uf, p)? / lp_quasinorm(f, p)?);
            }
            rows.push((p, t, worst));
            if worst > sup_per_p[pi].1 {
                sup_per_p[pi].1 = worst;
            }
        }
    }
    Ok(PqReport {
        rows,
        sup_per_p,
        lower_bound_only: true,
    })
}

/// Riesz transform comparison: the classical square-function norm of
/// `∇^m L^{-1/2} f` (through the reference operator) against `‖f‖_{H_L^p}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RieszReport {
    pub p: f64,
    pub per_member: Vec<MemberRatio>,
    pub family_max: f64,
    pub pass: bool,
}

pub fn riesz_study(
    fact: &SpectralFactorization,
    reference: &SpectralFactorization,
    p: f64,
    family: &FunctionFamily,
    tg: &TimeGrid,
) -> Result<RieszReport> {
    let n = fact.grid().dim() as f64;
    let m = fact.half_order() as f64;
    if !(p > n / (n + m)) {
        return Err(Error::param("p", format!("need p > n/(n+m) = {:.3}", n / (n + m))));
    }
    let mut per_member = Vec::new();
    for (d, f) in family.descriptors.iter().zip(&family.members) {
        let riesz = crate::funcalc::riesz_transform(fact, f)?;
        // classical proxy: sitewise ℓ² aggregate of the reference square
        // functions of the components
        let mut agg = vec![0.0f64; fact.grid().total_points()];
        for comp in riesz.components() {
            let s = crate::functionals::square_function(
                reference,
                &comp.project_mean_zero(),
                crate::functionals::SquareKind::Vertical,
                1,
                1.0,
                tg,
            )?;
            for (a, v) in agg.iter_mut().zip(s.values().iter()) {
                *a += v.re * v.re;
            }
        }
        let classical = GridFunction::from_values(
            fact.grid(),
            agg.into_iter()
                .map(|v| Complex64::from(v.sqrt()))
                .collect::<Array1<Complex64>>(),
        )?;
        let na = lp_quasinorm(&classical, p)?;
        let (nb, _) = hardy_quasinorm(fact, f, p, tg)?;
        per_member.push(MemberRatio {
            label: d.label(),
            norm_a: na,
            norm_b: nb,
            ratio: na / nb,
        });
    }
    let family_max = per_member.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let pass = per_member.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0);
    Ok(RieszReport {
        p,
        per_member,
        family_max,
        pass,
    })
}

/// Molecule suite: generate, verify, measure `‖S_L α‖_{L^p}` spread and the
/// p-sum control constant of a random finite representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoleculeStudyReport {
    pub count: usize,
    pub p: f64,
    pub vanishing_order: u32,
    pub epsilon: f64,
    pub all_verified: bool,
    pub worst_bound: f64,
    pub sl_norms: Vec<f64>,
    pub spread: f64,
    pub spread_threshold: f64,
    /// `‖Σ λ_j α_j‖_{H^p}^p / Σ |λ_j|^p` for a seeded coefficient draw
    pub psum_constant: f64,
    pub pass: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn molecule_study(
    fact: &SpectralFactorization,
    count: usize,
    radius: f64,
    p: f64,
    vanishing_order: u32,
    epsilon: f64,
    seed: u64,
    tg: &TimeGrid,
    spread_threshold: f64,
) -> Result<MoleculeStudyReport> {
    let grid = fact.grid();
    let mut rng = subrng(seed, "molecule-study");
    let mut molecules: Vec<Molecule> = Vec::with_capacity(count);
    let mut worst: f64 = 0.0;
    let mut all_verified = true;
    for i in 0..count {
        // centers are drawn as continuum positions so the same seed builds
        // the same configuration on every resolution
        let n_axis = grid.points_per_axis();
        let coord0 = (rng.random::<f64>() * n_axis as f64) as usize % n_axis;
        let coord1 = (rng.random::<f64>() * n_axis as f64) as usize % n_axis;
        let center = if grid.dim() == 1 {
            coord0
        } else {
            grid.site_index(&[coord0, coord1])
        };
        let mol = generate_molecule(
            fact,
            center,
            radius,
            p,
            vanishing_order,
            epsilon,
            seed.wrapping_add(i as u64),
        )?;
        worst = worst.max(mol.achieved.worst());
        all_verified &= mol.achieved.all_within(1e-9);
        molecules.push(mol);
    }

    let mut sl_norms = Vec::with_capacity(count);
    for mol in &molecules {
        let (norm, _) = hardy_quasinorm(fact, &mol.sample, p, tg)?;
        sl_norms.push(norm);
    }
    let lo = sl_norms.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sl_norms.iter().copied().fold(0.0f64, f64::max);
    let spread = hi / lo;

    // p-sum control of a random finite representation
    let coefficients: Vec<Complex64> = (0..count)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let rep = MolecularRepresentation::new(molecules, coefficients, p)?;
    let sum = rep.reconstruct()?;
    let (hnorm, _) = hardy_quasinorm(fact, &sum, p, tg)?;
    let psum_constant = hnorm.powf(p) / rep.p_sum();

    let pass = all_verified && spread <= spread_threshold && psum_constant.is_finite();
    Ok(MoleculeStudyReport {
        count,
        p,
        vanishing_order,
        epsilon,
        all_verified,
        worst_bound: worst,
        sl_norms,
        spread,
        spread_threshold,
        psum_constant,
        pass,
    })
}
