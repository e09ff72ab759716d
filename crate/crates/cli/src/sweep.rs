//! Parallel randomized sweeps with per-instance seeds, so results do not
//! depend on the worker count.

use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// Worker count from `AWD_WORKERS`; unset or 0 lets rayon decide.
fn workers() -> CliResult<usize> {
    match std::env::var("AWD_WORKERS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("AWD_WORKERS must be a non-negative integer, got '{v}'"))),
        Err(_) => Ok(0),
    }
}

/// Runs `f(i, seed + i)` for `i < n` and returns the results in order.
pub fn run<T, F>(n: usize, seed: u64, f: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> CliResult<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers()?)
        .build()
        .map_err(|e| CliError::Solver(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(|i| f(i, seed.wrapping_add(i as u64))).collect())
}
