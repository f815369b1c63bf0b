//! Execution policy for the data-parallel loops (partition folds, simulation
//! runs, Monte Carlo oracle chunks).
//!
//! Every parallel path produces results in index order and reduces them
//! sequentially, so outputs never depend on the worker count. Without the
//! `parallel` feature, [`Parallelism::Parallel`] silently runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parallelism {
    Sequential,
    Parallel,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Parallel
        } else {
            Parallelism::Sequential
        }
    }
}

impl Parallelism {
    /// Whether work will actually be spread over a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// `(0..len).map(f).collect()`, possibly on the rayon pool. Order is preserved.
pub fn map_indexed<T, F>(policy: Parallelism, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = policy;
    (0..len).map(f).collect()
}

/// Maps over a slice, preserving order.
pub fn map_slice<A, T, F>(policy: Parallelism, items: &[A], f: F) -> Vec<T>
where
    A: Sync,
    T: Send,
    F: Fn(&A) -> T + Sync + Send,
{
    map_indexed(policy, items.len(), |i| f(&items[i]))
}

/// Installs a global rayon pool with `threads` workers. Returns false if the
/// pool was already initialised or the feature is off.
pub fn configure_workers(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}
