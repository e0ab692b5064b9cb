//! Thread pool backed batch executor.

use std::sync::Arc;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use tactdiff_core::diffusion::BatchExecutor;

use crate::error::{CliError, Result};

/// Runs per-item work on a rayon pool. Results come back in index order,
/// so reductions over them are independent of the thread count.
#[derive(Clone)]
pub struct Pool {
    pool: Arc<ThreadPool>,
}

impl Pool {
    /// `threads = None` uses the available parallelism.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let n = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        let pool = ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::usage(format!("cannot start {n} threads: {e}")))?;
        Ok(Self { pool: Arc::new(pool) })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

impl BatchExecutor for Pool {
    fn map<R: Send>(&self, n: usize, f: &(dyn Fn(usize) -> R + Sync)) -> Vec<R> {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
