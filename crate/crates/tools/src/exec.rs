// SPDX-License-Identifier: Apache-2.0

use ccs_core::exec::Executor;
use rayon::prelude::*;

/// Runs jobs on a dedicated rayon pool, or inline when `jobs == 1`.
pub struct ParallelExecutor {
    pool: Option<rayon::ThreadPool>,
}

impl ParallelExecutor {
    pub fn new(jobs: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = if jobs <= 1 {
            None
        } else {
            Some(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
        };
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.as_ref().map_or(1, rayon::ThreadPool::current_num_threads)
    }
}

impl Executor for ParallelExecutor {
    fn map<T, F>(&self, jobs: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            None => (0..jobs).map(f).collect(),
            Some(pool) => pool.install(|| (0..jobs).into_par_iter().map(f).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_job_order() {
        let exec = ParallelExecutor::new(4).unwrap();
        assert_eq!(exec.threads(), 4);
        let out = exec.map(100, |i| i * i);
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }
}
