//! Parallel-map capability handed to the numerical kernels.

use alloc::vec::Vec;

/// Evaluates `f(0..n)` and returns the results in index order.
///
/// Implementations may run the closures concurrently, but every element must
/// be computed by a single call to `f`; kernels rely on this to keep each
/// reduction in a fixed order so output is independent of the worker count.
pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
