//! Numerical laboratory for heat-semigroup harmonic analysis of homogeneous
//! divergence-form elliptic operators `L = (-1)^m sum ∂^α (a_{αβ} ∂^β)` with
//! complex coefficients, discretized on the unit torus.
//!
//! The crate builds the operators and their holomorphic functional calculus
//! (semigroup, resolvent, fractional powers), evaluates the square, area and
//! maximal functionals that norm the adapted Hardy spaces, and runs
//! quantitative ratio-band studies of the quasi-norm equivalences between
//! them.
//!
//! Everything lives on a periodic lattice: the torus stands in for R^n,
//! differentiation is Fourier-spectral (exact on the band), and L^p integrals
//! are Riemann sums. That is the central modeling gap against the continuum
//! theory; the `experiments` module quantifies it with grid-refinement drift
//! checks instead of hiding it.

// force the system OpenBLAS link for the raw LAPACK calls in `funcalc`
use openblas_src as _;

pub mod conegeo;
pub mod elliptic;
mod error;
pub mod experiments;
pub mod funcalc;
pub mod functionals;
pub mod hardy;
pub mod lattice;
pub mod linalg;
pub mod numeric;
pub mod par;

pub use error::{Error, Result};
