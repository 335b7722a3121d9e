//! Batch drivers. Draw `k` always uses stream `(seed, k)`, so the output is
//! the same for the sequential and parallel paths and any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::dpsampler::{SampledMatrix, Sampler};
use crate::error::Result;

/// Runs `f(k)` for `k in 0..count`, in order of `k`, in parallel when the
/// `parallel` feature is on.
pub fn map_indices<T, F>(count: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_indices_parallel(count, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indices_sequential(count, f)
    }
}

pub fn map_indices_sequential<T, F>(count: u64, f: F) -> Result<Vec<T>>
where
    F: Fn(u64) -> Result<T>,
{
    (0..count).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_indices_parallel<T, F>(count: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Runs `f` on a pool of `jobs` threads; `0` keeps the global pool. A no-op
/// wrapper in sequential builds.
pub fn with_threads<T, F>(jobs: usize, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    #[cfg(feature = "parallel")]
    if jobs > 0 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(f);
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
    f()
}

/// Draws `count` matrices keyed by `seed`.
pub fn sample_batch(sampler: &Sampler, seed: u64, count: u64) -> Result<Vec<SampledMatrix>> {
    map_indices(count, |k| sampler.sample_indexed(seed, k))
}

/// Log importance weights `-log Q` of `count` draws keyed by `seed`.
pub fn log_weights(sampler: &Sampler, seed: u64, count: u64) -> Result<Vec<f64>> {
    map_indices(count, |k| sampler.sample_indexed(seed, k).map(|s| -s.log_q))
}

/// [`log_weights`] on the calling thread only.
pub fn log_weights_sequential(sampler: &Sampler, seed: u64, count: u64) -> Result<Vec<f64>> {
    map_indices_sequential(count, |k| sampler.sample_indexed(seed, k).map(|s| -s.log_q))
}
