use rayon::prelude::*;

use crate::error::{Error, Result};

/// Evaluates `f` on path indices `0..paths` and returns the results in index
/// order, whatever the number of workers. `workers == 0` uses every core.
pub fn run_paths<T, F>(paths: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    if workers == 1 {
        return (0..paths as u64).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| (0..paths as u64).into_par_iter().map(&f).collect())
}

/// Rejects NaN or infinite values, naming the path that produced them.
pub fn ensure_finite(values: &[f64], seed: u64, path_index: u64) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { seed, path_index })
    }
}
