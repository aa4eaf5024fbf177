use rayon::prelude::*;

use crate::error::Result;

/// Runs `f` for replications `0..count` on the rayon pool.
///
/// Results come back in replication order and the first failing index wins,
/// so the outcome does not depend on the number of workers.
pub(crate) fn replicate<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = (0..count as u64).into_par_iter().map(|r| f(r).map_err(|e| e.in_replication(r))).collect();
    results.into_iter().collect()
}
