//! Replicate scheduling.
//!
//! Bootstrap replicates and Monte-Carlo repetitions are independent tasks.
//! The core only needs an indexed map whose output order is the index order;
//! the `egc` crate supplies a thread-pool implementation.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluate `f(0), ..., f(n - 1)` and return the results in index order.
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every task on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
