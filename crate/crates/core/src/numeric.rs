//! Small numerical utilities shared across modules: adaptive quadrature and
//! deterministic seeded sub-generators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Adaptive Simpson quadrature of `f` on `[a, b]` to relative tolerance
/// `rel_tol` (with an absolute floor for integrands passing through zero).
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            left + right + delta / 15.0
        } else {
            rec(f, a, fa, m, fm, flm, left, eps * 0.5, depth - 1)
                + rec(f, m, fm, b, fb, frm, right, eps * 0.5, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    let eps = rel_tol * whole.abs().max(1e-300);
    rec(f, a, fa, b, fb, fm, whole, eps, 48)
}

/// Integral of `g(t) dt/t` over `(0, ∞)` for integrands vanishing rapidly at
/// both ends, computed on the log axis with adaptive refinement of the
/// truncation window until the tails are negligible.
pub fn integrate_dt_over_t(g: &impl Fn(f64) -> f64, rel_tol: f64) -> f64 {
    let gs = |s: f64| g(s.exp());
    let mut lo = -4.0f64;
    let mut hi = 4.0f64;
    let mut value = adaptive_simpson(&gs, lo, hi, rel_tol);
    // widen until both tail contributions drop below tolerance
    for _ in 0..12 {
        let left = adaptive_simpson(&gs, lo - 6.0, lo, rel_tol);
        let right = adaptive_simpson(&gs, hi, hi + 6.0, rel_tol);
        let scale = value.abs().max(1e-300);
        let mut grown = false;
        if left.abs() > rel_tol * scale * 0.01 {
            value += left;
            lo -= 6.0;
            grown = true;
        }
        if right.abs() > rel_tol * scale * 0.01 {
            value += right;
            hi += 6.0;
            grown = true;
        }
        if !grown {
            break;
        }
    }
    value
}

/// Deterministic sub-generator: one master seed, one stream per component
/// tag, stable across runs and platforms.
pub fn subrng(seed: u64, tag: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(tag.as_bytes()));
    rng
}

fn fnv1a(data: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in data {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
