//! Fourier-spectral calculus on the lattice.
//!
//! Differentiation is exact on the band: a derivative `∂^α` multiplies the
//! coefficient at integer frequency `k ∈ [-N/2, N/2)^n` by `Π_a (2πi k_a)^{α_a}`.
//! Coefficients are normalized so that `f(x) = Σ_k f̂_k e^{2πi k·x}`, which
//! makes Plancherel read `h^n Σ_x |f|^2 = Σ_k |f̂_k|^2` with no extra factor.

use super::{GridFunction, MultiIndex, TorusGrid};
use crate::{Error, Result};
use ndarray::Array1;
use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type PlanKey = (usize, bool);
static PLANS: OnceLock<Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>> = OnceLock::new();

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap();
    cache
        .entry((len, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(len)
            } else {
                planner.plan_fft_inverse(len)
            }
        })
        .clone()
}

/// In-place FFT along each axis of the row-major buffer.
fn transform(grid: TorusGrid, data: &mut Array1<Complex64>, forward: bool) {
    let n = grid.points_per_axis();
    let fft = plan(n, forward);
    match grid.dim() {
        1 => {
            fft.process(data.as_slice_mut().unwrap());
        }
        _ => {
            let buf = data.as_slice_mut().unwrap();
            // axis 1: contiguous rows
            for row in buf.chunks_mut(n) {
                fft.process(row);
            }
            // axis 0: strided columns through a scratch buffer
            let mut scratch = vec![Complex64::default(); n];
            for col in 0..n {
                for i in 0..n {
                    scratch[i] = buf[i * n + col];
                }
                fft.process(&mut scratch);
                for i in 0..n {
                    buf[i * n + col] = scratch[i];
                }
            }
        }
    }
}

/// Fourier coefficients `f̂_k` indexed row-major like sites, frequency
/// `k = j` for `j < N/2` and `j - N` otherwise along each axis.
pub fn forward_coefficients(f: &GridFunction) -> Array1<Complex64> {
    let grid = f.grid();
    let mut data = f.values().clone();
    transform(grid, &mut data, true);
    let scale = Complex64::from(1.0 / grid.total_points() as f64);
    data.mapv_inplace(|v| v * scale);
    data
}

/// Rebuild samples from coefficients (inverse of [`forward_coefficients`]).
pub fn synthesize(grid: TorusGrid, coefficients: &Array1<Complex64>) -> Result<GridFunction> {
    if coefficients.len() != grid.total_points() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} coefficients, got {}",
            grid.total_points(),
            coefficients.len()
        )));
    }
    let mut data = coefficients.clone();
    transform(grid, &mut data, false);
    GridFunction::from_values(grid, data)
}

/// The multiplier `Π_a (2πi k_a)^{α_a}` at coefficient index `idx`.
fn derivative_symbol(grid: TorusGrid, alpha: &MultiIndex, idx: usize) -> Complex64 {
    let freqs = grid.frequencies(idx);
    let mut s = Complex64::new(1.0, 0.0);
    for (a, &ord) in alpha.components().iter().enumerate() {
        if ord == 0 {
            continue;
        }
        let factor = Complex64::new(0.0, 2.0 * std::f64::consts::PI * freqs[a] as f64);
        for _ in 0..ord {
            s *= factor;
        }
    }
    s
}

/// Spectral partial derivative `∂^α f`.
pub fn partial_derivative(f: &GridFunction, alpha: &MultiIndex) -> Result<GridFunction> {
    let grid = f.grid();
    if alpha.len() != grid.dim() {
        return Err(Error::ShapeMismatch(format!(
            "multi-index has {} components on a {}-d grid",
            alpha.len(),
            grid.dim()
        )));
    }
    if alpha.order() == 0 {
        return Ok(f.clone());
    }
    let mut coeffs = forward_coefficients(f);
    for (idx, c) in coeffs.iter_mut().enumerate() {
        *c *= derivative_symbol(grid, alpha, idx);
    }
    synthesize(grid, &coeffs)
}

/// All multi-indices of order `k` in `n` components, lexicographically
/// ascending.
pub fn multi_indices(n: usize, k: u32) -> Vec<MultiIndex> {
    fn rec(n: usize, k: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if n == 1 {
            prefix.push(k);
            out.push(MultiIndex::new(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in 0..=k {
            prefix.push(first);
            rec(n - 1, k - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, &mut Vec::new(), &mut out);
    out
}

/// The indexed family `{∂^γ f : |γ| = k}` with its pointwise magnitude
/// `|∇^k f|(x) = (Σ_γ |∂^γ f(x)|^2)^{1/2}`.
#[derive(Debug, Clone)]
pub struct GradientBlock {
    order: u32,
    indices: Vec<MultiIndex>,
    components: Vec<GridFunction>,
}

impl GradientBlock {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn components(&self) -> &[GridFunction] {
        &self.components
    }

    /// Pointwise Euclidean magnitude over the family, returned as a
    /// real-valued grid function.
    pub fn magnitude(&self) -> GridFunction {
        let grid = self.components[0].grid();
        let mut acc = vec![0.0f64; grid.total_points()];
        for comp in &self.components {
            for (a, v) in acc.iter_mut().zip(comp.values().iter()) {
                *a += v.norm_sqr();
            }
        }
        let values: Array1<Complex64> = acc
            .into_iter()
            .map(|s| Complex64::new(s.sqrt(), 0.0))
            .collect();
        GridFunction::from_values(grid, values).expect("magnitude is finite")
    }

    /// Sum of squared `L^2` norms of the components, `‖∇^k f‖_2^2`.
    pub fn norm_l2_sqr(&self) -> f64 {
        self.components.iter().map(|c| c.norm_l2().powi(2)).sum()
    }
}

/// Full order-`k` gradient family of `f`; `k = 0` returns `f` itself.
pub fn gradient_block(f: &GridFunction, k: u32) -> GradientBlock {
    let grid = f.grid();
    let indices = multi_indices(grid.dim(), k);
    if k == 0 {
        return GradientBlock {
            order: 0,
            indices,
            components: vec![f.clone()],
        };
    }
    // one forward transform shared across the family
    let coeffs = forward_coefficients(f);
    let components = indices
        .iter()
        .map(|alpha| {
            let mut c = coeffs.clone();
            for (idx, v) in c.iter_mut().enumerate() {
                *v *= derivative_symbol(grid, alpha, idx);
            }
            synthesize(grid, &c).expect("derivative of finite function is finite")
        })
        .collect();
    GradientBlock {
        order: k,
        indices,
        components,
    }
}

/// Random band-limited function with coefficients on `0 < |k|_∞ ≤ band`.
///
/// The draw order runs over the fixed frequency box, independent of `N`, so
/// the same seed realizes the same continuum function on any grid that
/// resolves the band — the property the refinement-drift studies rely on.
pub fn random_bandlimited(
    grid: TorusGrid,
    band: i64,
    rng: &mut impl Rng,
) -> Result<GridFunction> {
    let half = grid.points_per_axis() as i64 / 2;
    if band <= 0 || band >= half {
        return Err(Error::param(
            "band",
            format!("band must lie in [1, N/2) = [1, {half}), got {band}"),
        ));
    }
    let mut coeffs: Array1<Complex64> = Array1::zeros(grid.total_points());
    let n = grid.points_per_axis();
    let mut set = |k0: i64, k1: i64, v: Complex64| {
        let j0 = k0.rem_euclid(n as i64) as usize;
        let j1 = k1.rem_euclid(n as i64) as usize;
        let idx = if grid.dim() == 1 { j0 } else { j0 * n + j1 };
        coeffs[idx] = v;
    };
    match grid.dim() {
        1 => {
            for k in -band..=band {
                let re: f64 = rng.random::<f64>() - 0.5;
                let im: f64 = rng.random::<f64>() - 0.5;
                if k != 0 {
                    set(k, 0, Complex64::new(re, im));
                }
            }
        }
        _ => {
            for k0 in -band..=band {
                for k1 in -band..=band {
                    let re: f64 = rng.random::<f64>() - 0.5;
                    let im: f64 = rng.random::<f64>() - 0.5;
                    if k0 != 0 || k1 != 0 {
                        set(k0, k1, Complex64::new(re, im));
                    }
                }
            }
        }
    }
    synthesize(grid, &coeffs)
}
