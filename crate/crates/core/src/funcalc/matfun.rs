//! Matrix functions of the triangular Schur factor.
//!
//! The symbols the calculus needs are a closed catalogue: `(sz)^k e^{-rz}`
//! (semigroup, heat powers, the ψ-family), resolvents, and the principal
//! square root and its inverse. Each gets a structure-exploiting evaluation
//! on a triangular block, and blocks are coupled through the Parlett
//! recurrence solved as triangular Sylvester equations. Eigenvalue clusters
//! are kept inside atomic blocks, so no recurrence ever divides by a small
//! gap; numerically normal factors short-circuit to the diagonal.

use crate::{linalg, Error, Result};
use ndarray::{s, Array2};
use num_complex::Complex64;

/// Scalar symbol applied through the functional calculus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Symbol {
    /// `(power_scale · z)^power · e^{−decay_scale · z}`
    PowerExp {
        power: u32,
        power_scale: f64,
        decay_scale: f64,
    },
    /// `(shift + z)^{−1}`
    Resolvent { shift: Complex64 },
    /// principal branch `z^{1/2}` (cut on the negative real axis)
    Sqrt,
    /// `z^{−1/2}`, extended by 0 on the kernel
    InvSqrt,
}

impl Symbol {
    pub fn semigroup(t: f64) -> Self {
        Symbol::PowerExp {
            power: 0,
            power_scale: 1.0,
            decay_scale: t,
        }
    }

    /// `(s z)^k e^{−s z}` with `s = t^{2m}`: the heat power `Q_{L,k,t}`.
    pub fn heat_power(k: u32, s: f64) -> Self {
        Symbol::PowerExp {
            power: k,
            power_scale: s,
            decay_scale: s,
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        match *self {
            Symbol::PowerExp {
                power,
                power_scale,
                decay_scale,
            } => (z * power_scale).powu(power) * (-z * decay_scale).exp(),
            Symbol::Resolvent { shift } => (shift + z).inv(),
            Symbol::Sqrt => z.sqrt(),
            Symbol::InvSqrt => z.sqrt().inv(),
        }
    }

    /// Limit value on the kernel, along the positive real axis.
    pub fn at_zero(&self) -> Complex64 {
        match *self {
            Symbol::PowerExp { power, .. } => {
                if power == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::default()
                }
            }
            Symbol::Resolvent { shift } => shift.inv(),
            Symbol::Sqrt | Symbol::InvSqrt => Complex64::default(),
        }
    }
}

/// Consecutive diagonal range of the reordered factor holding one eigenvalue
/// cluster.
#[derive(Debug, Clone, Copy)]
pub struct Cluster {
    pub start: usize,
    pub len: usize,
    pub kernel: bool,
}

impl Cluster {
    fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Evaluate `g(T)` for upper-triangular `T` whose clusters are consecutive.
pub fn triangular_function(
    t: &Array2<Complex64>,
    clusters: &[Cluster],
    symbol: Symbol,
) -> Result<Array2<Complex64>> {
    let n = t.nrows();
    let mut f: Array2<Complex64> = Array2::zeros((n, n));

    for c in clusters {
        let block = t.slice(s![c.range(), c.range()]).to_owned();
        let fb = if c.kernel {
            Array2::from_diag_elem(c.len, symbol.at_zero())
        } else {
            atomic_block(&block, symbol)?
        };
        f.slice_mut(s![c.range(), c.range()]).assign(&fb);
    }

    // Parlett block recurrence along superdiagonals of the cluster grid
    let nb = clusters.len();
    for gap in 1..nb {
        for bi in 0..nb - gap {
            let bj = bi + gap;
            let ri = clusters[bi].range();
            let rj = clusters[bj].range();
            // rhs[p,q] = Σ_{u<rj.start} F[p,u] T[u,q] − Σ_{u≥ri.end} T[p,u] F[u,q]
            // restricted to the already-computed band between the blocks
            let mut rhs = Array2::<Complex64>::zeros((ri.len(), rj.len()));
            for (pi, p) in ri.clone().enumerate() {
                for (qi, q) in rj.clone().enumerate() {
                    let mut acc = Complex64::default();
                    for u in ri.start..rj.start {
                        acc += f[(p, u)] * t[(u, q)];
                    }
                    for u in ri.end..rj.end {
                        acc -= t[(p, u)] * f[(u, q)];
                    }
                    rhs[(pi, qi)] = acc;
                }
            }
            if ri.len() == 1 && rj.len() == 1 {
                let denom = t[(ri.start, ri.start)] - t[(rj.start, rj.start)];
                f[(ri.start, rj.start)] = rhs[(0, 0)] / denom;
            } else {
                let a = t.slice(s![ri.clone(), ri.clone()]);
                let b = t.slice(s![rj.clone(), rj.clone()]);
                let x = linalg::sylvester_triangular(&a, &b, &rhs)?;
                f.slice_mut(s![ri, rj]).assign(&x);
            }
        }
    }
    Ok(f)
}

/// `g(B)` on one atomic (clustered) triangular block.
fn atomic_block(b: &Array2<Complex64>, symbol: Symbol) -> Result<Array2<Complex64>> {
    match symbol {
        Symbol::PowerExp {
            power,
            power_scale,
            decay_scale,
        } => {
            let n = b.nrows();
            let e = expm_neg_triangular(&b.mapv(|v| v * decay_scale));
            if power == 0 {
                return Ok(e);
            }
            let sb = b.mapv(|v| v * power_scale);
            let mut p = sb.clone();
            for _ in 1..power {
                p = p.dot(&sb);
            }
            let _ = n;
            Ok(p.dot(&e))
        }
        Symbol::Resolvent { shift } => {
            let mut a = b.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += shift;
            }
            triangular_inverse(&a)
        }
        Symbol::Sqrt => Ok(sqrt_triangular(b)),
        Symbol::InvSqrt => triangular_inverse(&sqrt_triangular(b)),
    }
}

/// `e^{−A}` for triangular `A` by Taylor with scaling and squaring.
fn expm_neg_triangular(a: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.nrows();
    let norm = a.iter().map(|v| v.norm()).fold(0.0, f64::max) * n as f64;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = Complex64::from(-1.0 / 2f64.powi(squarings as i32));
    let scaled = a.mapv(|v| v * scale);
    let mut result = Array2::from_diag_elem(n, Complex64::new(1.0, 0.0));
    let mut term = Array2::from_diag_elem(n, Complex64::new(1.0, 0.0));
    for k in 1..=24u32 {
        term = term.dot(&scaled).mapv(|v| v / Complex64::from(k as f64));
        result += &term;
        let t_norm = term.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if t_norm < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Björck–Hammarling recurrence for the principal square root of a
/// sectorial triangular matrix; the divisor `U_ii + U_jj` stays away from
/// zero because all square roots have non-negative real part.
fn sqrt_triangular(t: &Array2<Complex64>) -> Array2<Complex64> {
    let n = t.nrows();
    let mut u: Array2<Complex64> = Array2::zeros((n, n));
    for i in 0..n {
        u[(i, i)] = t[(i, i)].sqrt();
    }
    for gap in 1..n {
        for i in 0..n - gap {
            let j = i + gap;
            let mut s = t[(i, j)];
            for k in i + 1..j {
                s -= u[(i, k)] * u[(k, j)];
            }
            u[(i, j)] = s / (u[(i, i)] + u[(j, j)]);
        }
    }
    u
}

/// Inverse of a nonsingular upper-triangular matrix by back-substitution.
fn triangular_inverse(u: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = u.nrows();
    let mut x: Array2<Complex64> = Array2::zeros((n, n));
    for i in 0..n {
        let d = u[(i, i)];
        if d.norm() == 0.0 {
            return Err(Error::Factorization(
                "singular triangular block in inverse".into(),
            ));
        }
        x[(i, i)] = d.inv();
    }
    for gap in 1..n {
        for i in 0..n - gap {
            let j = i + gap;
            let mut s = Complex64::default();
            for k in i + 1..=j {
                s += u[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = -s / u[(i, i)];
        }
    }
    Ok(x)
}
