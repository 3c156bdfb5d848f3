//! Discretized parabolic cones `Γ^λ(x) = {(y,t) : |y−x| < λt}`, geometric
//! time grids for `dt/t` quadrature, tent fields `F(y, t_j)` and the
//! tent-space A-functional and quasi-norms built from them.
//!
//! The `dt/t^{n+1}` measure splits as `(dt/t)·t^{-n}` with log-uniform
//! weights: on the geometric grid `t_j = t_min ρ^j` each level carries the
//! weight `Δ = ln ρ`, which is the midpoint-in-log rule and is exact on
//! power-law integrands.

use crate::funcalc::{SpectralFactorization, Symbol};
use crate::lattice::{
    apply_offset, gradient_block, lp_quasinorm, offsets_within, GridFunction, SiteOffset,
    TorusGrid,
};
use crate::{par, Error, Result};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Geometric time grid `t_j = t_min ρ^j`, `j = 0..levels`, with
/// `ρ = (t_max/t_min)^{1/(levels-1)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t_min: f64,
    t_max: f64,
    levels: usize,
    samples: Vec<f64>,
    log_weight: f64,
}

/// Minimum level count for a meaningful `dt/t` quadrature.
pub const MIN_LEVELS: usize = 8;

/// Build a geometric time grid; rejects inverted bounds and fewer than
/// [`MIN_LEVELS`] levels.
pub fn make_time_grid(t_min: f64, t_max: f64, levels: usize) -> Result<TimeGrid> {
    if !(t_min > 0.0 && t_max > t_min) {
        return Err(Error::param(
            "time_grid",
            format!("need 0 < t_min < t_max, got [{t_min}, {t_max}]"),
        ));
    }
    if levels < MIN_LEVELS {
        return Err(Error::param(
            "time_grid.levels",
            format!("need at least {MIN_LEVELS} levels, got {levels}"),
        ));
    }
    let rho = (t_max / t_min).powf(1.0 / (levels - 1) as f64);
    let log_weight = rho.ln();
    let samples: Vec<f64> = (0..levels)
        .map(|j| t_min * rho.powi(j as i32))
        .collect();
    Ok(TimeGrid {
        t_min,
        t_max,
        levels,
        samples,
        log_weight,
    })
}

impl TimeGrid {
    /// Defaults for a grid: `t_min = h` (below it cones hold only the
    /// center), `t_max = 1/4` (above it balls wrap), 32 levels.
    pub fn default_for(grid: TorusGrid) -> TimeGrid {
        make_time_grid(grid.spacing(), 0.25, 32).expect("defaults are valid")
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Quadrature weight `Δ = ln ρ` for `dt/t`.
    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    /// Widen the span by whole levels at the same log-spacing, so the sample
    /// set is a superset of the original (the monotone way to enlarge
    /// `[t_min, t_max]`).
    pub fn extended(&self, extra_low: usize, extra_high: usize) -> TimeGrid {
        let rho = self.log_weight.exp();
        let lo = extra_low as i32;
        let levels = self.levels + extra_low + extra_high;
        let samples: Vec<f64> = (0..levels)
            .map(|j| self.t_min * rho.powi(j as i32 - lo))
            .collect();
        TimeGrid {
            t_min: samples[0],
            t_max: samples[levels - 1],
            levels,
            samples,
            log_weight: self.log_weight,
        }
    }
}

/// Cone membership offsets per time level for one aperture, precomputed once
/// and shared. Level sets are nested as `t` grows and always include the
/// center offset.
#[derive(Debug, Clone)]
pub struct ConeSampling {
    grid: TorusGrid,
    aperture: f64,
    time_grid: TimeGrid,
    offsets_per_level: Vec<Vec<SiteOffset>>,
}

impl ConeSampling {
    pub fn new(grid: TorusGrid, aperture: f64, time_grid: &TimeGrid) -> Result<Self> {
        if !(aperture > 0.0) {
            return Err(Error::param("aperture", "aperture must be positive"));
        }
        let offsets_per_level = time_grid
            .samples()
            .iter()
            .map(|&t| offsets_within(grid, aperture * t))
            .collect();
        Ok(ConeSampling {
            grid,
            aperture,
            time_grid: time_grid.clone(),
            offsets_per_level,
        })
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn offsets(&self, level: usize) -> &[SiteOffset] {
        &self.offsets_per_level[level]
    }
}

/// Complex field `F(y, t_j)` over grid × time levels.
#[derive(Debug, Clone)]
pub struct TentField {
    grid: TorusGrid,
    time_grid: TimeGrid,
    /// levels × sites, row per level
    values: Array2<Complex64>,
}

impl TentField {
    pub fn new(grid: TorusGrid, time_grid: TimeGrid, values: Array2<Complex64>) -> Result<Self> {
        if values.dim() != (time_grid.levels(), grid.total_points()) {
            return Err(Error::ShapeMismatch(format!(
                "tent field needs {} × {} values, got {:?}",
                time_grid.levels(),
                grid.total_points(),
                values.dim()
            )));
        }
        if !values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::ShapeMismatch("tent field has non-finite values".into()));
        }
        Ok(TentField {
            grid,
            time_grid,
            values,
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn value(&self, level: usize, site: usize) -> Complex64 {
        self.values[(level, site)]
    }

    pub fn scale(&self, c: Complex64) -> TentField {
        TentField {
            grid: self.grid,
            time_grid: self.time_grid.clone(),
            values: self.values.mapv(|v| v * c),
        }
    }

    /// Per-level spatial energy `h^n Σ_y |F(y, t_j)|²`.
    pub fn level_energies(&self) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        (0..self.time_grid.levels())
            .map(|j| {
                self.values
                    .row(j)
                    .iter()
                    .map(|v| v.norm_sqr())
                    .sum::<f64>()
                    * vol
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct TentFieldRepr {
    n: usize,
    #[serde(rename = "N")]
    points_per_axis: usize,
    t_samples: Vec<f64>,
    values: Vec<[f64; 2]>,
}

impl Serialize for TentField {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        TentFieldRepr {
            n: self.grid.dim(),
            points_per_axis: self.grid.points_per_axis(),
            t_samples: self.time_grid.samples().to_vec(),
            values: self.values.iter().map(|v| [v.re, v.im]).collect(),
        }
        .serialize(serializer)
    }
}

/// Heat-extension generators for tent fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// `(t^{2m}L)^k e^{-t^{2m}L} f`, `k ≥ 1`
    HeatPower { k: u32 },
    /// pointwise magnitude `|(t∇)^m (t^{2m}L)^k e^{-t^{2m}L} f|`, `k ≥ 0`
    GradHeatPower { k: u32 },
    /// plain heat extension `e^{-t^{2m}L} f`
    Semigroup,
}

/// Evaluate the generator for a batch of inputs, sharing the per-level
/// matrix function across the batch.
pub fn build_tent_fields(
    fact: &SpectralFactorization,
    inputs: &[GridFunction],
    generator: Generator,
    time_grid: &TimeGrid,
) -> Result<Vec<TentField>> {
    let grid = fact.grid();
    for f in inputs {
        if f.grid() != grid {
            return Err(Error::ShapeMismatch("input grid mismatch".into()));
        }
    }
    let levels = time_grid.levels();
    let total = grid.total_points();
    let m = fact.half_order();
    let mut fields: Vec<Array2<Complex64>> =
        vec![Array2::zeros((levels, total)); inputs.len()];
    for (j, &t) in time_grid.samples().iter().enumerate() {
        let s = t.powi(2 * m as i32);
        let k = match generator {
            Generator::HeatPower { k } => k,
            Generator::GradHeatPower { k } => k,
            Generator::Semigroup => 0,
        };
        let applier = fact.applier(Symbol::heat_power(k, s))?;
        for (fi, f) in inputs.iter().enumerate() {
            let base = applier.apply(f)?;
            let row = match generator {
                Generator::HeatPower { .. } | Generator::Semigroup => base.into_values(),
                Generator::GradHeatPower { .. } => {
                    let mag = gradient_block(&base, m).magnitude();
                    let tm = t.powi(m as i32);
                    mag.values().mapv(|v| v * Complex64::from(tm))
                }
            };
            fields[fi].row_mut(j).assign(&row);
        }
    }
    inputs
        .iter()
        .zip(fields)
        .map(|(_, v)| TentField::new(grid, time_grid.clone(), v))
        .collect()
}

/// Single-input convenience for [`build_tent_fields`].
pub fn build_tent_field(
    fact: &SpectralFactorization,
    f: &GridFunction,
    generator: Generator,
    time_grid: &TimeGrid,
) -> Result<TentField> {
    Ok(build_tent_fields(fact, std::slice::from_ref(f), generator, time_grid)?
        .pop()
        .expect("one input"))
}

/// `A(F)(x) = (Σ_j Δ t_j^{-n} Σ_{o ∈ cone(j)} h^n |F(x+o, t_j)|²)^{1/2}`,
/// the Riemann sum for `∬_{Γ^λ(x)} |F|² dy dt/t^{n+1}`.
pub fn a_functional(field: &TentField, cone: &ConeSampling, site: usize) -> f64 {
    a_functional_sq(field, cone, site, None).sqrt()
}

fn a_functional_sq(
    field: &TentField,
    cone: &ConeSampling,
    site: usize,
    level_totals: Option<&[f64]>,
) -> f64 {
    let grid = field.grid();
    let n = grid.dim() as i32;
    let vol = grid.cell_volume();
    let delta = field.time_grid().log_weight();
    let total = grid.total_points();
    let mut acc = 0.0f64;
    for (j, &t) in field.time_grid().samples().iter().enumerate() {
        let offs = cone.offsets(j);
        let energy = if offs.len() == total {
            match level_totals {
                Some(tot) => tot[j],
                None => field.values().row(j).iter().map(|v| v.norm_sqr()).sum(),
            }
        } else {
            let row = field.values().row(j);
            offs.iter()
                .map(|&o| row[apply_offset(grid, site, o)].norm_sqr())
                .sum()
        };
        acc += delta * vol * energy / t.powi(n);
    }
    acc
}

/// The A-functional at every site, as a real-valued grid function.
pub fn a_functional_all(field: &TentField, cone: &ConeSampling) -> Result<GridFunction> {
    if field.grid() != cone.grid || field.time_grid() != cone.time_grid() {
        return Err(Error::ShapeMismatch("field/cone sampling mismatch".into()));
    }
    let totals: Vec<f64> = (0..field.time_grid().levels())
        .map(|j| field.values().row(j).iter().map(|v| v.norm_sqr()).sum())
        .collect();
    let vals = par::map_range(field.grid().total_points(), |site| {
        Complex64::new(a_functional_sq(field, cone, site, Some(&totals)).sqrt(), 0.0)
    });
    GridFunction::from_values(field.grid(), Array1::from_vec(vals))
}

/// Tent-space quasi-norm `‖F‖_{T^p} = ‖A(F)‖_{L^p}`.
pub fn tent_quasinorm(field: &TentField, p: f64, cone: &ConeSampling) -> Result<f64> {
    lp_quasinorm(&a_functional_all(field, cone)?, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{assemble, polyharmonic_coefficients};
    use crate::funcalc::factorize;
    use crate::lattice::make_grid;
    use crate::numeric::subrng;
    use rand::Rng;
    use std::f64::consts::PI;

    #[test]
    fn time_grid_construction() {
        assert!(make_time_grid(0.01, 1.0, 3).is_err());
        assert!(make_time_grid(1.0, 0.01, 9).is_err());
        let tg = make_time_grid(0.01, 1.0, 9).unwrap();
        let rho = tg.samples()[1] / tg.samples()[0];
        assert!((rho - 100f64.powf(1.0 / 8.0)).abs() < 1e-12);
        assert!((tg.samples()[0] - 0.01).abs() < 1e-15);
        assert!((tg.samples()[8] - 1.0).abs() < 1e-12);
        // Σ_j Δ = J·Δ = ln(t_max/t_min)·J/(J-1)
        let total = tg.log_weight() * tg.levels() as f64;
        let expect = (100f64).ln() * 9.0 / 8.0;
        assert!((total - expect).abs() < 1e-12);
    }

    #[test]
    fn extended_grid_is_superset() {
        let tg = make_time_grid(0.01, 0.3, 12).unwrap();
        let ext = tg.extended(3, 2);
        assert_eq!(ext.levels(), 17);
        for (j, &t) in tg.samples().iter().enumerate() {
            let t2 = ext.samples()[j + 3];
            assert!((t - t2).abs() <= 1e-15 * t);
        }
    }

    #[test]
    fn cone_offsets_nest_and_contain_center() {
        let g = make_grid(1, 32).unwrap();
        let tg = make_time_grid(g.spacing(), 0.25, 16).unwrap();
        let cone = ConeSampling::new(g, 1.0, &tg).unwrap();
        for j in 0..tg.levels() {
            assert!(cone.offsets(j).contains(&[0, 0]), "level {j} lost the center");
            if j > 0 {
                let prev: std::collections::HashSet<_> =
                    cone.offsets(j - 1).iter().copied().collect();
                assert!(prev.iter().all(|o| cone.offsets(j).contains(o)));
            }
        }
    }

    fn random_tent(grid: TorusGrid, tg: &TimeGrid, seed: u64) -> TentField {
        let mut rng = subrng(seed, "tent");
        let values = Array2::from_shape_fn((tg.levels(), grid.total_points()), |_| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        TentField::new(grid, tg.clone(), values).unwrap()
    }

    #[test]
    fn a_functional_examples() {
        let g = make_grid(1, 16).unwrap();
        let tg = make_time_grid(g.spacing(), 0.25, 8).unwrap();
        let cone = ConeSampling::new(g, 1.0, &tg).unwrap();

        let zero = TentField::new(g, tg.clone(), Array2::zeros((8, 16))).unwrap();
        assert_eq!(a_functional(&zero, &cone, 3), 0.0);

        // single nonzero entry at (level j0, site x): contributes Δ h^n / t^n
        let j0 = 4;
        let mut vals = Array2::<Complex64>::zeros((8, 16));
        vals[(j0, 5)] = Complex64::new(1.0, 0.0);
        let single = TentField::new(g, tg.clone(), vals).unwrap();
        let expect = (tg.log_weight() * g.cell_volume() / tg.samples()[j0]).sqrt();
        let got = a_functional(&single, &cone, 5);
        assert!((got - expect).abs() < 1e-14, "{got} vs {expect}");
    }

    #[test]
    fn a_functional_matches_enumeration_oracle() {
        // independently coded double loop over the cone, no shared helpers
        let g = make_grid(1, 16).unwrap();
        let tg = make_time_grid(g.spacing(), 0.2, 10).unwrap();
        let cone = ConeSampling::new(g, 1.5, &tg).unwrap();
        let field = random_tent(g, &tg, 99);

        let n = g.points_per_axis() as i64;
        let h = g.spacing();
        for site in [0usize, 3, 9, 15] {
            let mut acc = 0.0f64;
            for (j, &t) in tg.samples().iter().enumerate() {
                for y in 0..n {
                    let dist_idx = (y - site as i64).rem_euclid(n);
                    let dist = dist_idx.min(n - dist_idx) as f64 * h;
                    if dist < 1.5 * t || y == site as i64 {
                        acc += tg.log_weight() * h * field.value(j, y as usize).norm_sqr() / t;
                    }
                }
            }
            let got = a_functional(&field, &cone, site);
            assert!(
                (got - acc.sqrt()).abs() <= 1e-12 * acc.sqrt(),
                "site {site}: {got} vs {}",
                acc.sqrt()
            );
        }
    }

    #[test]
    fn tent_norm_p2_fubini_oracle() {
        // ‖A(F)‖₂² = Σ_j Δ h^n (#offsets_j) t_j^{-n} · h^n Σ_y |F(y,t_j)|²
        let g = make_grid(1, 16).unwrap();
        let tg = make_time_grid(g.spacing(), 0.2, 9).unwrap();
        let cone = ConeSampling::new(g, 1.0, &tg).unwrap();
        let field = random_tent(g, &tg, 7);
        let h = g.spacing();
        let mut oracle = 0.0f64;
        for (j, &t) in tg.samples().iter().enumerate() {
            let energy: f64 = field.values().row(j).iter().map(|v| v.norm_sqr()).sum();
            oracle += tg.log_weight() * h * cone.offsets(j).len() as f64 / t * (h * energy);
        }
        let got = tent_quasinorm(&field, 2.0, &cone).unwrap();
        assert!(
            (got * got - oracle).abs() <= 1e-12 * oracle,
            "{} vs {oracle}",
            got * got
        );
    }

    #[test]
    fn homogeneity_and_aperture_monotonicity() {
        let g = make_grid(1, 16).unwrap();
        let tg = make_time_grid(g.spacing(), 0.2, 9).unwrap();
        let field = random_tent(g, &tg, 13);
        let narrow = ConeSampling::new(g, 1.0, &tg).unwrap();
        let wide = ConeSampling::new(g, 2.0, &tg).unwrap();
        let c = Complex64::new(-1.5, 2.0);
        for site in 0..g.total_points() {
            let a1 = a_functional(&field, &narrow, site);
            let a2 = a_functional(&field, &wide, site);
            assert!(a2 >= a1, "wider cone must dominate at site {site}");
            let scaled = a_functional(&field.scale(c), &narrow, site);
            assert!((scaled - c.norm() * a1).abs() < 1e-12 * (1.0 + a1));
        }
    }

    #[test]
    fn truncation_monotonicity_via_extension() {
        let g = make_grid(1, 16).unwrap();
        let tg = make_time_grid(2.0 * g.spacing(), 0.2, 8).unwrap();
        let op = assemble(&polyharmonic_coefficients(1, g).unwrap()).unwrap();
        let fact = factorize(&op).unwrap();
        let f = GridFunction::fourier_mode(g, &[2]);
        let narrow_field = build_tent_field(&fact, &f, Generator::HeatPower { k: 1 }, &tg).unwrap();
        let ext = tg.extended(2, 2);
        let wide_field = build_tent_field(&fact, &f, Generator::HeatPower { k: 1 }, &ext).unwrap();
        let cone_n = ConeSampling::new(g, 1.0, &tg).unwrap();
        let cone_w = ConeSampling::new(g, 1.0, &ext).unwrap();
        for site in 0..g.total_points() {
            let a = a_functional(&narrow_field, &cone_n, site);
            let b = a_functional(&wide_field, &cone_w, site);
            assert!(b >= a - 1e-13, "site {site}: {b} < {a}");
        }
    }

    #[test]
    fn tent_field_generators_on_modes() {
        let g = make_grid(1, 32).unwrap();
        let tg = make_time_grid(g.spacing(), 0.25, 12).unwrap();
        let op = assemble(&polyharmonic_coefficients(1, g).unwrap()).unwrap();
        let fact = factorize(&op).unwrap();

        // Q_1 of a constant vanishes
        let one = GridFunction::constant(g, Complex64::from(1.0));
        let f0 = build_tent_field(&fact, &one, Generator::HeatPower { k: 1 }, &tg).unwrap();
        assert!(f0.values().iter().all(|v| v.norm() < 1e-10));

        // Q_1 of e^{2πix}: F(y,t) = (4π²t²) e^{-4π²t²} e^{2πiy}
        let mode = GridFunction::fourier_mode(g, &[1]);
        let f1 = build_tent_field(&fact, &mode, Generator::HeatPower { k: 1 }, &tg).unwrap();
        let s = 4.0 * PI * PI;
        for (j, &t) in tg.samples().iter().enumerate() {
            let scalar = (s * t * t) * (-s * t * t).exp();
            for (site, v) in f1.values().row(j).iter().enumerate() {
                let expect = mode.values()[site] * Complex64::from(scalar);
                assert!((v - expect).norm() < 1e-11, "level {j} site {site}");
            }
        }

        // gradient generator with k = 0: |F|(y,t) = 2πt e^{-4π²t²}
        let fg = build_tent_field(&fact, &mode, Generator::GradHeatPower { k: 0 }, &tg).unwrap();
        for (j, &t) in tg.samples().iter().enumerate() {
            let expect = 2.0 * PI * t * (-s * t * t).exp();
            for v in fg.values().row(j) {
                assert!((v.re - expect).abs() < 1e-11 && v.im == 0.0);
            }
        }
    }

    #[test]
    fn level_refinement_is_stable() {
        // doubling the number of levels moves the A-functional by ≤ 2% for a
        // smooth band-limited generator
        let g = make_grid(1, 64).unwrap();
        let op = assemble(&polyharmonic_coefficients(1, g).unwrap()).unwrap();
        let fact = factorize(&op).unwrap();
        let f = GridFunction::fourier_mode(g, &[2]);
        let coarse = make_time_grid(4.0 * g.spacing(), 0.25, 16).unwrap();
        let fine = make_time_grid(4.0 * g.spacing(), 0.25, 32).unwrap();
        let field_c = build_tent_field(&fact, &f, Generator::HeatPower { k: 1 }, &coarse).unwrap();
        let field_f = build_tent_field(&fact, &f, Generator::HeatPower { k: 1 }, &fine).unwrap();
        let cone_c = ConeSampling::new(g, 1.0, &coarse).unwrap();
        let cone_f = ConeSampling::new(g, 1.0, &fine).unwrap();
        let a_c = a_functional(&field_c, &cone_c, 0);
        let a_f = a_functional(&field_f, &cone_f, 0);
        let drift = (a_c - a_f).abs() / a_f;
        assert!(drift <= 0.02, "refinement drift {drift}");
    }

    #[test]
    fn serde_shape() {
        let g = make_grid(1, 8).unwrap();
        let tg = make_time_grid(0.1, 0.2, 8).unwrap();
        let field = random_tent(g, &tg, 1);
        let json = serde_json::to_string(&field).unwrap();
        assert!(json.contains("\"t_samples\""));
        assert!(json.contains("\"N\":8"));
    }
}
