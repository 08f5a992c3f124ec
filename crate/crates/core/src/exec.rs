//! Sequential or rayon-backed evaluation of independent index-addressed
//! tasks. Without the `parallel` feature, [`Execution::Parallel`] runs
//! sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// `(0..len).map(f)` collected in index order.
pub(crate) fn map_indexed<T, F>(mode: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..len).into_par_iter().map(f).collect(),
        _ => (0..len).map(f).collect(),
    }
}

/// Maps every index and combines with an associative, commutative `reduce`.
pub(crate) fn map_reduce<T, F, R>(mode: Execution, len: u64, identity: T, f: F, reduce: R) -> T
where
    T: Send + Sync + Clone,
    F: Fn(u64) -> T + Sync + Send,
    R: Fn(T, T) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..len)
            .into_par_iter()
            .map(f)
            .reduce(|| identity.clone(), &reduce),
        _ => (0..len).map(f).fold(identity, reduce),
    }
}
