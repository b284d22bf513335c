//! Thread-pool executor for candidate evaluation.

use ajk_core::exec::Executor;
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "AJK_WORKERS";

pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(CliError::config("worker count must be >= 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::config(format!("cannot start {workers} workers: {e}")))?;
        Ok(Self { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map<R, F>(&self, len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync,
    {
        // indexed collect keeps input order
        self.pool.install(|| (0..len).into_par_iter().map(&f).collect())
    }
}

/// Flag value, else the environment variable, else the available cores.
pub fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::config(format!("{WORKERS_ENV}='{v}' is not a worker count"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}
