//! Pluggable dispatch of independent evaluations.
//!
//! Results always come back in index order, so any reduction over them is
//! independent of how the work was scheduled.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluates `f(0), ..., f(len - 1)` and returns the results in order.
    fn map<R, F>(&self, len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<R, F>(&self, len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync,
    {
        (0..len).map(f).collect()
    }
}
