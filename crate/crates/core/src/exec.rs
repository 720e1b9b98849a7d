// SPDX-License-Identifier: Apache-2.0

//! Execution strategy for independent jobs (restarts, sweep trials,
//! transfer cells). Results always come back in job order, so selection and
//! aggregation do not depend on the strategy.

use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map<T, F>(&self, jobs: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, jobs: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..jobs).map(f).collect()
    }
}
