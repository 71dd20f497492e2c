use egc_core::Executor;
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// Thread-pool executor. Output order follows the task index, so results do
/// not depend on the number of threads.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    /// `threads = None` or `Some(0)` uses every available core.
    pub fn new(threads: Option<usize>) -> CliResult<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads.filter(|&n| n > 0) {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::input(format!("cannot start thread pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
