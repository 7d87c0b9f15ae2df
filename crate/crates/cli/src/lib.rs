//! Command-line front end for the eraser correlation simulator.

pub mod commands;
pub mod config;
pub mod output;

use anyhow::{Context, Result};

/// Environment variable read by [`worker_count`].
pub const THREADS_ENV: &str = "ERASER_CORR_THREADS";

/// Explicit count if given, else `ERASER_CORR_THREADS`, else rayon's default.
pub fn worker_count(explicit: Option<usize>) -> Result<Option<usize>> {
    if explicit.is_some() {
        return Ok(explicit);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV}={v:?} is not a worker count"))?;
            anyhow::ensure!(n > 0, "{THREADS_ENV} must be at least 1");
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(f)),
        None => Ok(f()),
    }
}
