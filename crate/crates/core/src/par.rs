//! Execution helpers for the data-parallel inner loops.
//!
//! With the default `parallel` feature the maps fan out over rayon; without
//! it they run sequentially with the same signatures. Order is preserved in
//! both modes, so floating-point reductions downstream stay deterministic:
//! parallel code in this crate only ever maps into a `Vec` and folds
//! sequentially afterwards.

#[cfg(feature = "parallel")]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sequential map with the same shape as [`map_range`], kept available in all
/// builds so the benches can compare both paths in a single run.
pub fn map_range_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// True when this build dispatches [`map_range`] through rayon.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
