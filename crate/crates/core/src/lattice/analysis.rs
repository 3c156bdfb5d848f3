//! L^p quasi-norms (Riemann sums with weight h^n) and the Hardy-Littlewood
//! maximal function over all discrete balls.

use super::geometry::{apply_offset, offsets_within};
use super::GridFunction;
use crate::{par, Error, Result};
use ndarray::Array1;
use num_complex::Complex64;

/// `(h^n Σ_x |f(x)|^p)^{1/p}` for any `p ∈ (0, ∞)`.
pub fn lp_quasinorm(f: &GridFunction, p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::param("p", format!("exponent must be in (0, ∞), got {p}")));
    }
    let vol = f.grid().cell_volume();
    if p == 2.0 {
        return Ok(f.norm_l2());
    }
    let sum: f64 = f.values().iter().map(|v| v.norm().powf(p)).sum();
    Ok((vol * sum).powf(1.0 / p))
}

/// `M(f)(x) = sup_{B ∋ x} |B|^{-1} ∫_B |f|` over the discrete radius set
/// `{h, 2h, …, 1/2}` and all centers; the largest radius clamps to the whole
/// torus.
pub fn hardy_littlewood_maximal(f: &GridFunction) -> GridFunction {
    let grid = f.grid();
    let n = grid.points_per_axis();
    let total = grid.total_points();
    let h = grid.spacing();
    let radii: Vec<f64> = (1..=n / 2).map(|m| m as f64 * h).collect();

    let abs: Vec<f64> = f.values().iter().map(|v| v.norm()).collect();

    // per-radius ball averages at every center
    let offset_sets: Vec<Vec<super::geometry::SiteOffset>> = radii
        .iter()
        .map(|&r| {
            if r >= 0.5 {
                offsets_within(grid, f64::INFINITY)
            } else {
                offsets_within(grid, r)
            }
        })
        .collect();
    let averages: Vec<Vec<f64>> = offset_sets
        .iter()
        .map(|offs| {
            let inv = 1.0 / offs.len() as f64;
            par::map_range(total, |c| {
                let mut s = 0.0;
                for &o in offs {
                    s += abs[apply_offset(grid, c, o)];
                }
                s * inv
            })
        })
        .collect();

    // x ∈ B(c, r) iff c ∈ B(x, r), so the max over balls containing x scans
    // the same offset sets
    let out = par::map_range(total, |x| {
        let mut best = 0.0f64;
        for (avg, offs) in averages.iter().zip(&offset_sets) {
            for &o in offs {
                let c = apply_offset(grid, x, o);
                if avg[c] > best {
                    best = avg[c];
                }
            }
        }
        Complex64::new(best, 0.0)
    });
    GridFunction::from_values(grid, Array1::from_vec(out)).expect("maximal function is finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_grid, GridFunction};
    use num_complex::Complex64;

    #[test]
    fn quasinorm_basics() {
        let g = make_grid(1, 8).unwrap();
        let one = GridFunction::constant(g, Complex64::new(1.0, 0.0));
        assert!((lp_quasinorm(&one, 2.0).unwrap() - 1.0).abs() < 1e-14);

        let c = GridFunction::constant(g, Complex64::new(-0.3, 0.4));
        for p in [0.5, 1.0, 2.0, 3.7] {
            assert!((lp_quasinorm(&c, p).unwrap() - 0.5).abs() < 1e-13, "p={p}");
        }

        // indicator of half the sites has L^1 norm = measure of support
        let mut vals = ndarray::Array1::<Complex64>::zeros(8);
        for i in 0..4 {
            vals[i] = Complex64::new(1.0, 0.0);
        }
        let ind = GridFunction::from_values(g, vals).unwrap();
        assert!((lp_quasinorm(&ind, 1.0).unwrap() - 0.5).abs() < 1e-14);

        assert!(lp_quasinorm(&one, 0.0).is_err());
        assert!(lp_quasinorm(&one, -1.0).is_err());
    }

    #[test]
    fn maximal_of_constant_and_lower_bound() {
        let g = make_grid(1, 8).unwrap();
        let c = GridFunction::constant(g, Complex64::new(0.0, -2.0));
        let m = hardy_littlewood_maximal(&c);
        for v in m.values() {
            assert!((v.re - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn maximal_point_mass_matches_enumeration() {
        // point mass at site 0 on N=8: enumerate every ball by hand
        let g = make_grid(1, 8).unwrap();
        let mut vals = ndarray::Array1::<Complex64>::zeros(8);
        vals[0] = Complex64::new(1.0, 0.0);
        let f = GridFunction::from_values(g, vals).unwrap();
        let m = hardy_littlewood_maximal(&f);

        let h = g.spacing();
        for x in 0..8usize {
            let mut oracle = 0.0f64;
            for center in 0..8usize {
                for mult in 1..=4usize {
                    let r = mult as f64 * h;
                    let members: Vec<usize> = (0..8)
                        .filter(|&s| r >= 0.5 || super::super::geometry::distance(g, s, center) < r)
                        .collect();
                    if members.contains(&x) && members.contains(&0) {
                        oracle = oracle.max(1.0 / members.len() as f64);
                    }
                }
            }
            assert!(
                (m.values()[x].re - oracle).abs() < 1e-13,
                "site {x}: {} vs oracle {oracle}",
                m.values()[x].re
            );
        }
        // frozen spot values from the enumeration above; the antipodal site
        // is reached best by the off-center ball B(2, 3h) = {0,1,2,3,4}
        assert!((m.values()[0].re - 1.0).abs() < 1e-13);
        assert!((m.values()[1].re - 1.0 / 3.0).abs() < 1e-13);
        assert!((m.values()[4].re - 1.0 / 5.0).abs() < 1e-13);
    }

    #[test]
    fn maximal_dominates_pointwise() {
        let g = make_grid(1, 16).unwrap();
        let f = GridFunction::from_fn(g, |x| Complex64::new((x[0] * 9.0).sin(), x[0]));
        let m = hardy_littlewood_maximal(&f);
        for (mv, fv) in m.values().iter().zip(f.values().iter()) {
            assert!(mv.re >= fv.norm() - 1e-13);
        }
    }
}
