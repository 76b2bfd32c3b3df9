//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper preserves input order in its output, so results never depend
//! on the execution mode or on the number of shards.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How per-item work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise runs sequentially.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Order-preserving map.
pub fn map<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Order-preserving map over an index range.
pub fn map_range<R, F>(n: usize, exec: Execution, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Splits `items` into `shards` contiguous chunks, maps each chunk, and
/// returns the per-chunk results in chunk order.
pub fn map_shards<T, R, F>(items: &[T], shards: usize, exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    let shards = shards.max(1);
    let chunk = items.len().div_ceil(shards).max(1);
    let chunks: Vec<&[T]> = items.chunks(chunk).collect();
    map(&chunks, exec, |c| f(c))
}

/// Sorts in place. The comparator must be a total order for output to be
/// independent of the execution mode.
pub fn sort_unstable<T: Ord + Send>(items: &mut [T], exec: Execution) {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        items.par_sort_unstable();
        return;
    }
    let _ = exec;
    items.sort_unstable();
}
