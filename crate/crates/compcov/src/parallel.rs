use compcov_core::oracle::ShardExecutor;
use rayon::prelude::*;

use crate::{Error, Result};

/// Runs shards on a rayon pool; results come back in index order.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    /// `jobs = None` uses one thread per available core.
    pub fn new(jobs: Option<usize>) -> Result<Self> {
        if jobs == Some(0) {
            return Err(Error::Usage("--jobs must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.unwrap_or(0))
            .build()
            .map_err(|e| Error::Usage(format!("cannot start thread pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl ShardExecutor for RayonExecutor {
    fn map<T, F>(&self, count: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..count).into_par_iter().map(&job).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let exec = RayonExecutor::new(Some(3)).unwrap();
        assert_eq!(exec.threads(), 3);
        let out = exec.map(100, |i| i * i);
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
        assert!(RayonExecutor::new(Some(0)).is_err());
    }
}
