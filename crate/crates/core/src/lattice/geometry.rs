//! Periodic balls and dyadic annuli.
//!
//! All distances are torus distances; the injectivity radius is 1/2, and any
//! requested radius at or above it clamps to the whole torus with a flag the
//! caller can surface as a warning.

use super::TorusGrid;
use crate::{Error, Result};

/// Lattice displacement, per-axis, in index units (second entry 0 in 1-d).
pub type SiteOffset = [i64; 2];

/// Periodic Euclidean distance between two sites.
pub fn distance(grid: TorusGrid, a: usize, b: usize) -> f64 {
    let n = grid.points_per_axis() as i64;
    let h = grid.spacing();
    let ca = grid.site_coords(a);
    let cb = grid.site_coords(b);
    let mut sq = 0.0;
    for axis in 0..grid.dim() {
        let d = (ca[axis] as i64 - cb[axis] as i64).rem_euclid(n);
        let d = d.min(n - d) as f64 * h;
        sq += d * d;
    }
    sq.sqrt()
}

/// All lattice offsets `o` with periodic `|o| < radius`, centered at 0.
/// Always contains the zero offset.
pub fn offsets_within(grid: TorusGrid, radius: f64) -> Vec<SiteOffset> {
    let n = grid.points_per_axis() as i64;
    let h = grid.spacing();
    let half = n / 2;
    let dist_1d = |d: i64| -> f64 {
        let w = d.rem_euclid(n);
        w.min(n - w) as f64 * h
    };
    let mut out = Vec::new();
    match grid.dim() {
        1 => {
            for d in -half..half {
                if d == 0 || dist_1d(d) < radius {
                    out.push([d, 0]);
                }
            }
        }
        _ => {
            for d0 in -half..half {
                let x0 = dist_1d(d0);
                for d1 in -half..half {
                    if (d0 == 0 && d1 == 0) || (x0 * x0 + dist_1d(d1).powi(2)).sqrt() < radius {
                        out.push([d0, d1]);
                    }
                }
            }
        }
    }
    out
}

/// Apply a periodic offset to a site index.
pub fn apply_offset(grid: TorusGrid, site: usize, offset: SiteOffset) -> usize {
    let n = grid.points_per_axis() as i64;
    let c = grid.site_coords(site);
    match grid.dim() {
        1 => (c[0] as i64 + offset[0]).rem_euclid(n) as usize,
        _ => {
            let i0 = (c[0] as i64 + offset[0]).rem_euclid(n) as usize;
            let i1 = (c[1] as i64 + offset[1]).rem_euclid(n) as usize;
            i0 * n as usize + i1
        }
    }
}

/// A discrete ball with its clamp flag.
#[derive(Debug, Clone)]
pub struct BallIndices {
    pub center: usize,
    pub radius: f64,
    pub sites: Vec<usize>,
    /// True when the requested radius reached the injectivity radius 1/2 and
    /// the ball was clamped to the whole torus.
    pub clamped: bool,
}

/// Sites with torus distance `< radius` from `center` (strict inequality).
pub fn ball_indices(grid: TorusGrid, center: usize, radius: f64) -> Result<BallIndices> {
    if !(radius > 0.0) {
        return Err(Error::param("radius", "radius must be positive"));
    }
    let clamped = radius >= 0.5;
    let sites = if clamped {
        (0..grid.total_points()).collect()
    } else {
        (0..grid.total_points())
            .filter(|&s| distance(grid, s, center) < radius)
            .collect()
    };
    Ok(BallIndices {
        center,
        radius,
        sites,
        clamped,
    })
}

/// Dyadic annulus `S_i(B) = 2^i B \ 2^{i-1} B` (and `S_0(B) = B`), as sets of
/// sites with the same clamp convention as [`ball_indices`].
pub fn annulus_indices(grid: TorusGrid, ball: &BallIndices, i: u32) -> Result<Vec<usize>> {
    if i == 0 {
        return Ok(ball.sites.clone());
    }
    let outer = ball_indices(grid, ball.center, ball.radius * 2f64.powi(i as i32))?;
    let inner = ball_indices(grid, ball.center, ball.radius * 2f64.powi(i as i32 - 1))?;
    let inner_set: std::collections::HashSet<usize> = inner.sites.into_iter().collect();
    Ok(outer
        .sites
        .into_iter()
        .filter(|s| !inner_set.contains(s))
        .collect())
}

/// Largest annulus index `i` such that `2^i B` still fits below the
/// injectivity radius (no wrap). Zero means even `2B` wraps.
pub fn max_faithful_annulus(radius: f64) -> u32 {
    let mut i = 0u32;
    while radius * 2f64.powi(i as i32 + 1) < 0.5 {
        i += 1;
    }
    i
}
