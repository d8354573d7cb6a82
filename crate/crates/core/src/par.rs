//! Index-ordered parallel map with a sequential fallback.
//!
//! Both variants return results in index order, so any reduction over the
//! returned vector is independent of scheduling.

use std::sync::OnceLock;

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "PLML_THREADS";

/// Evaluate `f(i)` for `i in 0..n` and collect in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    use rayon::prelude::*;
    pool().install(|| (0..n).into_par_iter().map(&f).collect())
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    (0..n).map(f).collect()
}

/// Same as [`map_indexed`] but always sequential. Used by benches and by
/// tests that compare the two paths.
pub fn map_indexed_serial<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = env_threads() {
            builder = builder.num_threads(n);
        }
        builder.build().expect("failed to build rayon pool")
    })
}

/// Worker count requested through `PLML_THREADS`, if set and valid.
pub fn env_threads() -> Option<usize> {
    static THREADS: OnceLock<Option<usize>> = OnceLock::new();
    *THREADS.get_or_init(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
    })
}

/// Pairwise (cascade) sum of a slice of equal-length vectors, element-wise.
/// The summation tree depends only on `parts.len()`.
pub fn pairwise_sum_vecs(parts: &[Vec<f64>]) -> Vec<f64> {
    match parts.len() {
        0 => Vec::new(),
        1 => parts[0].clone(),
        n => {
            let (lo, hi) = parts.split_at(n / 2);
            let mut left = pairwise_sum_vecs(lo);
            let right = pairwise_sum_vecs(hi);
            for (l, r) in left.iter_mut().zip(right) {
                *l += r;
            }
            left
        }
    }
}
