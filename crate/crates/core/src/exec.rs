//! Sequential or data-parallel reduction over term lists.
//!
//! Field addition is associative and commutative, so both strategies produce
//! bit-identical results. Without the `parallel` feature every strategy runs
//! sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon work-stealing over the global pool (or the installed one).
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

/// Below this many items the parallel path is not worth the split.
#[cfg(feature = "parallel")]
const PAR_THRESHOLD: usize = 4096;

/// Folds `items` into an accumulator, splitting across threads when enabled.
pub fn fold_reduce<T, A, I, F, R>(exec: Execution, items: &[T], identity: I, fold: F, reduce: R) -> A
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, &T) -> A + Sync + Send,
    R: Fn(A, A) -> A + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel if items.len() >= PAR_THRESHOLD => items
            .par_iter()
            .with_min_len(PAR_THRESHOLD / 4)
            .fold(&identity, &fold)
            .reduce(&identity, &reduce),
        _ => {
            let _ = &reduce;
            items.iter().fold(identity(), fold)
        }
    }
}
