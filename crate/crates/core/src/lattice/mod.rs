//! Periodic lattice domain: the unit torus `T^n = [0,1)^n` sampled on `N`
//! points per axis, complex-valued grid functions, multi-index calculus and
//! the discrete function-space machinery (spectral derivatives, L^p
//! quasi-norms, balls/annuli, Hardy-Littlewood maximal function).
//!
//! The torus side length is fixed at 1, so the spacing is `h = 1/N` exactly
//! and all distances are periodic. Radii are only meaningful below the
//! injectivity radius 1/2; larger balls clamp to the whole torus and say so.

mod analysis;
mod geometry;
mod spectral;

pub use analysis::{hardy_littlewood_maximal, lp_quasinorm};
pub use geometry::{
    annulus_indices, apply_offset, ball_indices, distance, max_faithful_annulus, offsets_within,
    BallIndices, SiteOffset,
};
pub use spectral::{
    forward_coefficients, gradient_block, multi_indices, partial_derivative, random_bandlimited,
    synthesize, GradientBlock,
};

use crate::{Error, Result};
use ndarray::Array1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Discrete unit torus in dimension 1 or 2 with `N` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    dim: usize,
    points_per_axis: usize,
}

/// Build a grid, rejecting odd `N`, `N < 4` and dimensions outside {1, 2}.
pub fn make_grid(dim: usize, points_per_axis: usize) -> Result<TorusGrid> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidGrid(format!(
            "dimension must be 1 or 2, got {dim}"
        )));
    }
    if points_per_axis < 4 {
        return Err(Error::InvalidGrid(format!(
            "need at least 4 points per axis, got {points_per_axis}"
        )));
    }
    if points_per_axis % 2 != 0 {
        return Err(Error::InvalidGrid(format!(
            "points per axis must be even for a symmetric frequency set, got {points_per_axis}"
        )));
    }
    Ok(TorusGrid {
        dim,
        points_per_axis,
    })
}

impl TorusGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Lattice spacing `h = 1/N`; `h * N == 1` exactly in binary only when N
    /// is a power of two, so consumers should multiply indices by `spacing`
    /// rather than accumulate.
    pub fn spacing(&self) -> f64 {
        1.0 / self.points_per_axis as f64
    }

    pub fn total_points(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    /// Quadrature weight of one site, `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Row-major site index from per-axis indices.
    pub fn site_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        match self.dim {
            1 => coords[0],
            _ => coords[0] * self.points_per_axis + coords[1],
        }
    }

    /// Per-axis indices of a site (second entry 0 in dimension 1).
    pub fn site_coords(&self, index: usize) -> [usize; 2] {
        match self.dim {
            1 => [index, 0],
            _ => [index / self.points_per_axis, index % self.points_per_axis],
        }
    }

    /// Physical position of a site.
    pub fn position(&self, index: usize) -> [f64; 2] {
        let c = self.site_coords(index);
        let h = self.spacing();
        [c[0] as f64 * h, c[1] as f64 * h]
    }

    /// Integer frequency along one axis for coefficient index `j`, in the
    /// symmetric band `[-N/2, N/2)`.
    pub fn frequency(&self, j: usize) -> i64 {
        let n = self.points_per_axis as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Per-axis integer frequencies of a coefficient at row-major index.
    pub fn frequencies(&self, index: usize) -> [i64; 2] {
        let c = self.site_coords(index);
        match self.dim {
            1 => [self.frequency(c[0]), 0],
            _ => [self.frequency(c[0]), self.frequency(c[1])],
        }
    }
}

/// Multi-index `α = (α_1, …, α_n)` with `|α| = α_1 + … + α_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    components: Vec<u32>,
}

impl MultiIndex {
    pub fn new(components: Vec<u32>) -> Self {
        MultiIndex { components }
    }

    pub fn components(&self) -> &[u32] {
        &self.components
    }

    pub fn order(&self) -> u32 {
        self.components.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Component-wise sum, for the composition law `∂^α ∂^β = ∂^{α+β}`.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.len(), other.len());
        MultiIndex {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// `|α|! / α!`, the multinomial weight that makes the polyharmonic symbol
    /// collapse to `|ξ|^{2m}`.
    pub fn multinomial_weight(&self) -> f64 {
        let order = self.order();
        let mut num = 1.0f64;
        for k in 2..=order {
            num *= k as f64;
        }
        let mut den = 1.0f64;
        for &c in &self.components {
            for k in 2..=c {
                den *= k as f64;
            }
        }
        num / den
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Complex samples on a [`TorusGrid`], row-major over axes. The discrete
/// stand-in for `f ∈ L^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: TorusGrid,
    values: Array1<Complex64>,
}

impl GridFunction {
    /// Wrap raw samples; rejects wrong lengths and non-finite values.
    pub fn from_values(grid: TorusGrid, values: Array1<Complex64>) -> Result<Self> {
        if values.len() != grid.total_points() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} samples, got {}",
                grid.total_points(),
                values.len()
            )));
        }
        if !values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::ShapeMismatch(
                "grid function contains non-finite samples".into(),
            ));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        GridFunction {
            grid,
            values: Array1::zeros(grid.total_points()),
        }
    }

    pub fn constant(grid: TorusGrid, value: Complex64) -> Self {
        GridFunction {
            grid,
            values: Array1::from_elem(grid.total_points(), value),
        }
    }

    /// Sample a closure of the physical position.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.total_points())
            .map(|i| {
                let p = grid.position(i);
                f(&p[..grid.dim()])
            })
            .collect();
        GridFunction { grid, values }
    }

    /// The pure oscillation `e^{2πi k·x}`.
    pub fn fourier_mode(grid: TorusGrid, k: &[i64]) -> Self {
        let k0 = k[0] as f64;
        let k1 = if grid.dim() == 2 { k[1] as f64 } else { 0.0 };
        Self::from_fn(grid, |x| {
            let phase = 2.0 * std::f64::consts::PI * (k0 * x[0] + k1 * x.get(1).unwrap_or(&0.0));
            Complex64::new(phase.cos(), phase.sin())
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &Array1<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array1<Complex64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array1<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Average value `h^n Σ f(x)` (torus volume is 1).
    pub fn mean(&self) -> Complex64 {
        self.values.sum() * Complex64::from(self.grid.cell_volume())
    }

    /// Subtract the mean, projecting onto the complement of the constants.
    pub fn project_mean_zero(&self) -> GridFunction {
        let m = self.mean();
        GridFunction {
            grid: self.grid,
            values: self.values.mapv(|v| v - m),
        }
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.mapv(|v| v * c),
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_same_grid(other)?;
        Ok(GridFunction {
            grid: self.grid,
            values: &self.values + &other.values,
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_same_grid(other)?;
        Ok(GridFunction {
            grid: self.grid,
            values: &self.values - &other.values,
        })
    }

    /// Pointwise product.
    pub fn mul_pointwise(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_same_grid(other)?;
        Ok(GridFunction {
            grid: self.grid,
            values: &self.values * &other.values,
        })
    }

    /// `L^2` inner product `h^n Σ f ḡ`.
    pub fn inner(&self, other: &GridFunction) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(s * Complex64::from(self.grid.cell_volume()))
    }

    /// `L^2` norm, the `p = 2` quasi-norm.
    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn norm_sup(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch(format!(
                "grids differ: {}d/{} vs {}d/{}",
                self.grid.dim(),
                self.grid.points_per_axis(),
                other.grid.dim(),
                other.grid.points_per_axis()
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct GridFunctionRepr {
    n: usize,
    #[serde(rename = "N")]
    points_per_axis: usize,
    values: Vec<[f64; 2]>,
}

impl Serialize for GridFunction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        GridFunctionRepr {
            n: self.grid.dim(),
            points_per_axis: self.grid.points_per_axis(),
            values: self.values.iter().map(|v| [v.re, v.im]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GridFunction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = GridFunctionRepr::deserialize(deserializer)?;
        let grid = make_grid(repr.n, repr.points_per_axis).map_err(serde::de::Error::custom)?;
        let values = repr
            .values
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect();
        GridFunction::from_values(grid, values).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_grid_accepts_and_rejects() {
        let g = make_grid(1, 8).unwrap();
        assert_eq!(g.spacing(), 0.125);
        assert_eq!(g.total_points(), 8);

        let g2 = make_grid(2, 16).unwrap();
        assert_eq!(g2.total_points(), 256);

        assert!(make_grid(1, 7).is_err(), "odd N must be rejected");
        assert!(make_grid(3, 8).is_err());
        assert!(make_grid(1, 2).is_err());
    }

    #[test]
    fn spacing_times_points_is_one() {
        for n in [4usize, 8, 12, 64, 100] {
            let g = make_grid(1, n).unwrap();
            assert_eq!(g.spacing() * g.points_per_axis() as f64, 1.0);
        }
    }

    #[test]
    fn multi_index_order_and_weight() {
        let a = MultiIndex::new(vec![2, 1]);
        assert_eq!(a.order(), 3);
        // 3!/ (2! 1!) = 3
        assert_eq!(a.multinomial_weight(), 3.0);
        assert_eq!(MultiIndex::new(vec![1, 1]).multinomial_weight(), 2.0);
        assert_eq!(MultiIndex::new(vec![4]).multinomial_weight(), 1.0);
    }

    #[test]
    fn grid_function_shape_checks() {
        let g = make_grid(1, 8).unwrap();
        assert!(GridFunction::from_values(g, Array1::zeros(7)).is_err());
        let mut vals = Array1::<Complex64>::zeros(8);
        vals[0] = Complex64::new(f64::NAN, 0.0);
        assert!(GridFunction::from_values(g, vals).is_err());
    }

    #[test]
    fn mean_projection() {
        let g = make_grid(1, 8).unwrap();
        let f = GridFunction::constant(g, Complex64::new(3.0, -1.0));
        assert!((f.mean() - Complex64::new(3.0, -1.0)).norm() < 1e-15);
        let p = f.project_mean_zero();
        assert!(p.norm_l2() < 1e-14);
    }

    #[test]
    fn serde_round_trip_is_bit_exact() {
        let g = make_grid(2, 6).unwrap();
        let f = GridFunction::from_fn(g, |x| {
            Complex64::new(
                (x[0] * 7.31).sin() + 1.0 / 3.0,
                (x[1] * 2.113).cos() * 0.1234567890123456789,
            )
        });
        let json = serde_json::to_string(&f).unwrap();
        let back: GridFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(f.grid(), back.grid());
        for (a, b) in f.values().iter().zip(back.values().iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
}
