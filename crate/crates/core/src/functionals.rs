//! Sitewise square functions and maximal functions of the heat extension.
//!
//! Square functions aggregate `(t^{2m}L)^k e^{-t^{2m}L} f` (vertical kind) or
//! `(t∇)^m (t^{2m}L)^k e^{-t^{2m}L} f` (Lusin kind) in L² over the parabolic
//! cone. Maximal functions take sups of L² ball averages of the heat
//! extension, over the cone axis (radial kinds) or the whole cone
//! (non-tangential kinds), optionally summing lower-order gradients or
//! windowing by a moving cutoff before differentiating.
//!
//! Ball averages are normalized by `(λt)^n` exactly as in the defining
//! formulas, not by the discrete ball cardinality, so small-time behavior
//! stays visible.

use crate::conegeo::{build_tent_fields, ConeSampling, Generator, TimeGrid};
use crate::funcalc::SpectralFactorization;
use crate::lattice::{
    apply_offset, distance, gradient_block, GridFunction,
};
use crate::{par, Error, Result};
use ndarray::Array1;
use num_complex::Complex64;

/// Square-function family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SquareKind {
    /// `S_{L,k}`: the heat-power aggregate, defined for `k ≥ 1`
    Vertical,
    /// `S_{h,L,k}`: the gradient (Lusin) aggregate, defined for `k ≥ 0`
    Lusin,
}

/// Evaluate one square function at every site.
pub fn square_function(
    fact: &SpectralFactorization,
    f: &GridFunction,
    kind: SquareKind,
    k: u32,
    aperture: f64,
    time_grid: &TimeGrid,
) -> Result<GridFunction> {
    Ok(
        square_functions_batch(fact, std::slice::from_ref(f), kind, k, aperture, time_grid)?
            .pop()
            .expect("one input"),
    )
}

/// Batch evaluation sharing the per-level calculus across the family.
pub fn square_functions_batch(
    fact: &SpectralFactorization,
    inputs: &[GridFunction],
    kind: SquareKind,
    k: u32,
    aperture: f64,
    time_grid: &TimeGrid,
) -> Result<Vec<GridFunction>> {
    let generator = match kind {
        SquareKind::Vertical => {
            if k == 0 {
                return Err(Error::param(
                    "k",
                    "the vertical square function is defined for k ≥ 1 only",
                ));
            }
            Generator::HeatPower { k }
        }
        SquareKind::Lusin => Generator::GradHeatPower { k },
    };
    let cone = ConeSampling::new(fact.grid(), aperture, time_grid)?;
    let fields = build_tent_fields(fact, inputs, generator, time_grid)?;
    fields
        .iter()
        .map(|field| crate::conegeo::a_functional_all(field, &cone))
        .collect()
}

/// Maximal-function family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaximalKind {
    /// sup over t of ball averages at the cone axis
    Radial,
    /// sup over the whole cone
    NonTangential,
    /// radial with the gradient sum `Σ_{k<m} |(t∇)^k · |²`
    RadialGrad,
    /// non-tangential with the gradient sum
    NonTangentialGrad,
    /// non-tangential of `(t∇)^{m-1}(ψ_{x,t} e^{-t^{2m}L} f)` with a moving
    /// cutoff window
    Cutoff,
}

/// Smooth radial bump: 1 on `|s| ≤ 1`, 0 on `|s| ≥ 2`, monotone in between,
/// with numerically measured derivative bounds.
#[derive(Debug, Clone)]
pub struct CutoffDescriptor {
    derivative_bounds: Vec<f64>,
}

impl CutoffDescriptor {
    /// Build the standard profile and measure `sup |d^k/ds^k profile|` for
    /// `k ≤ max_order` by dense sampling and central differences.
    pub fn standard(max_order: u32) -> CutoffDescriptor {
        let samples = 1 << 14;
        let ds = 3.0 / samples as f64;
        let mut bounds = Vec::with_capacity(max_order as usize + 1);
        for k in 0..=max_order {
            let mut sup: f64 = 0.0;
            // central differences of order k on a fine grid over [0, 3]
            let pts = k as i64 + 1;
            for i in 0..samples {
                let s = i as f64 * ds;
                let mut acc = 0.0;
                for j in 0..=pts - 1 {
                    let sign = if (pts - 1 - j) % 2 == 0 { 1.0 } else { -1.0 };
                    let binom = binomial(pts - 1, j) as f64;
                    acc += sign * binom * profile(s + j as f64 * ds);
                }
                sup = sup.max((acc / ds.powi(k as i32)).abs());
            }
            bounds.push(sup);
        }
        CutoffDescriptor {
            derivative_bounds: bounds,
        }
    }

    /// The profile value at radial argument `s`.
    pub fn profile(&self, s: f64) -> f64 {
        profile(s)
    }

    /// `sup |profile^{(k)}|` for `k = 0..=max_order`.
    pub fn derivative_bounds(&self) -> &[f64] {
        &self.derivative_bounds
    }
}

fn binomial(n: i64, k: i64) -> i64 {
    let mut r = 1i64;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

fn profile(s: f64) -> f64 {
    let s = s.abs();
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        // C^∞ smooth-step on the [1,2] transition
        let g = |v: f64| (-1.0 / v).exp();
        let u = s - 1.0;
        g(1.0 - u) / (g(1.0 - u) + g(u))
    }
}

/// Evaluate one maximal function at every site. The `cutoff` argument is
/// required for (and only used by) [`MaximalKind::Cutoff`].
pub fn maximal_function(
    fact: &SpectralFactorization,
    f: &GridFunction,
    kind: MaximalKind,
    aperture: f64,
    time_grid: &TimeGrid,
    cutoff: Option<&CutoffDescriptor>,
) -> Result<GridFunction> {
    let grid = fact.grid();
    if f.grid() != grid {
        return Err(Error::ShapeMismatch("function grid mismatch".into()));
    }
    if matches!(kind, MaximalKind::Cutoff) {
        if cutoff.is_none() {
            return Err(Error::param("cutoff", "the cutoff kind needs a CutoffDescriptor"));
        }
        if fact.half_order() < 1 {
            return Err(Error::param("m", "the cutoff kind needs m ≥ 1"));
        }
        return cutoff_maximal(fact, f, aperture, time_grid, cutoff.unwrap());
    }

    let cone = ConeSampling::new(grid, aperture, time_grid)?;
    let heat = build_tent_fields(fact, std::slice::from_ref(f), Generator::Semigroup, time_grid)?
        .pop()
        .expect("one input");
    let m = fact.half_order();
    let n = grid.dim() as i32;
    let vol = grid.cell_volume();
    let total = grid.total_points();

    // per-level integrand w_j(z): |u|² or Σ_{k<m} |t^k ∇^k u|²
    let with_gradients = matches!(kind, MaximalKind::RadialGrad | MaximalKind::NonTangentialGrad);
    let levels = time_grid.levels();
    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(levels);
    for (j, &t) in time_grid.samples().iter().enumerate() {
        let u = GridFunction::from_values(grid, heat.values().row(j).to_owned())?;
        let mut w: Vec<f64> = u.values().iter().map(|v| v.norm_sqr()).collect();
        if with_gradients {
            for k in 1..m {
                let mag = gradient_block(&u, k).magnitude();
                let tk = t.powi(k as i32);
                for (acc, v) in w.iter_mut().zip(mag.values().iter()) {
                    *acc += (tk * v.re).powi(2);
                }
            }
        }
        weights.push(w);
    }

    // ball averages (λt)^{-n} h^n Σ_{ball} w at every site and level
    let averages: Vec<Vec<f64>> = (0..levels)
        .map(|j| {
            let t = time_grid.samples()[j];
            let scale = vol / (aperture * t).powi(n);
            let offs = cone.offsets(j);
            let w = &weights[j];
            par::map_range(total, |y| {
                let s: f64 = offs.iter().map(|&o| w[apply_offset(grid, y, o)]).sum();
                s * scale
            })
        })
        .collect();

    let radial_only = matches!(kind, MaximalKind::Radial | MaximalKind::RadialGrad);
    let out = par::map_range(total, |x| {
        let mut best = 0.0f64;
        for j in 0..levels {
            if radial_only {
                best = best.max(averages[j][x]);
            } else {
                for &o in cone.offsets(j) {
                    best = best.max(averages[j][apply_offset(grid, x, o)]);
                }
            }
        }
        Complex64::new(best.sqrt(), 0.0)
    });
    GridFunction::from_values(grid, Array1::from_vec(out))
}

/// `sup_{(y,t) ∈ Γ^λ(x)} ((λt)^{-n} ∫_{B(y,λt)} |(t∇)^{m-1}(ψ_{x,t} u(·,t))|²)^{1/2}`.
fn cutoff_maximal(
    fact: &SpectralFactorization,
    f: &GridFunction,
    aperture: f64,
    time_grid: &TimeGrid,
    cutoff: &CutoffDescriptor,
) -> Result<GridFunction> {
    let grid = fact.grid();
    let cone = ConeSampling::new(grid, aperture, time_grid)?;
    let m = fact.half_order();
    let n = grid.dim() as i32;
    let vol = grid.cell_volume();
    let total = grid.total_points();
    let heat = build_tent_fields(fact, std::slice::from_ref(f), Generator::Semigroup, time_grid)?
        .pop()
        .expect("one input");

    let heat_levels: Vec<GridFunction> = (0..time_grid.levels())
        .map(|j| GridFunction::from_values(grid, heat.values().row(j).to_owned()))
        .collect::<Result<Vec<_>>>()?;

    let out = par::map_range(total, |x| {
        let mut best = 0.0f64;
        for (j, &t) in time_grid.samples().iter().enumerate() {
            // window the heat slice around x at scale t, then take the
            // (m-1)-gradient magnitude
            let u = &heat_levels[j];
            let windowed: Array1<Complex64> = (0..total)
                .map(|z| u.values()[z] * Complex64::from(cutoff.profile(distance(grid, z, x) / t)))
                .collect();
            let v = GridFunction::from_values(grid, windowed).expect("windowed slice is finite");
            let mag = gradient_block(&v, m - 1).magnitude();
            let tpow = t.powi(m as i32 - 1);
            let g: Vec<f64> = mag.values().iter().map(|w| (tpow * w.re).powi(2)).collect();

            let scale = vol / (aperture * t).powi(n);
            for &oc in cone.offsets(j) {
                let y = apply_offset(grid, x, oc);
                let s: f64 = cone
                    .offsets(j)
                    .iter()
                    .map(|&ob| g[apply_offset(grid, y, ob)])
                    .sum();
                best = best.max(s * scale);
            }
        }
        Complex64::new(best.sqrt(), 0.0)
    });
    GridFunction::from_values(grid, Array1::from_vec(out))
}
