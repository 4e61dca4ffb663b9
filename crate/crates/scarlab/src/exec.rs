//! Thread-pool executor for the numerical core.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use scarlab_core::Executor;

/// Environment variable that overrides the configured worker count.
pub const WORKERS_ENV: &str = "SCARLAB_WORKERS";

pub struct RayonExecutor {
    pool: ThreadPool,
}

impl RayonExecutor {
    pub fn new(workers: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
        Ok(RayonExecutor { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

/// Worker count: the environment override if set and valid, else `configured`.
pub fn resolve_workers(configured: usize) -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(configured)
        .max(1)
}
