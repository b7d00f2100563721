//! Index-ordered parallel map.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Evaluate `f` on indices `0..n` with `workers` threads; results come back
/// in index order whatever the schedule.
pub(crate) fn run_indexed<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    if workers <= 1 {
        return Ok((0..n as u64).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(|| (0..n as u64).into_par_iter().map(f).collect()))
}
