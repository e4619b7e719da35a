//! Execution policy for node loops and independent runs.
//!
//! With the `parallel` feature the loops fan out over rayon; without it, or
//! after `set_parallel(false)`, the same code runs sequentially. Reductions
//! always sum fixed-size chunks in index order and then combine the chunk
//! partials in order, so results are bitwise identical in both modes and
//! for any thread count.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used by every reduction.
pub const CHUNK: usize = 2048;

static PARALLEL: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));

/// Enables or disables the parallel path at runtime. Has no effect when the
/// crate is built without the `parallel` feature.
pub fn set_parallel(on: bool) {
    PARALLEL.store(on && cfg!(feature = "parallel"), Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

/// `out[i] = f(i)` for every index.
pub fn fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (k, slot) in chunk.iter_mut().enumerate() {
                *slot = f(base + k);
            }
        });
        return;
    }
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

/// Deterministic chunked sum of `f(i)` over `0..n`.
pub fn sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = |c: usize| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    };
    let mut partials = vec![0.0; chunks];
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        partials.par_iter_mut().enumerate().for_each(|(c, p)| *p = partial(c));
        return partials.iter().sum();
    }
    for (c, p) in partials.iter_mut().enumerate() {
        *p = partial(c);
    }
    partials.iter().sum()
}

/// Maximum of `f(i)` over `0..n` (0 for an empty range).
pub fn max<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = |c: usize| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        (lo..hi).map(&f).fold(0.0_f64, f64::max)
    };
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return (0..chunks).into_par_iter().map(partial).reduce(|| 0.0, f64::max);
    }
    (0..chunks).map(partial).fold(0.0, f64::max)
}

/// Maps independent jobs, preserving input order in the output.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}
