//! Execution strategy for the data-parallel inner loops.
//!
//! Every parallel path splits work into fixed-size chunks and reduces the
//! per-chunk results in chunk order, so parallel and sequential runs produce
//! bitwise-identical output. Without the `parallel` feature, [`Exec::Parallel`]
//! silently runs sequentially.

use std::ops::Range;

/// Columns per work unit when accumulating moment matrices.
pub const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

fn chunk_ranges(n: usize, chunk: usize) -> impl Iterator<Item = Range<usize>> + Clone {
    let chunk = chunk.max(1);
    (0..n.div_ceil(chunk)).map(move |c| c * chunk..((c + 1) * chunk).min(n))
}

/// Applies `f` to consecutive ranges of `0..n` and returns results in range order.
pub fn map_chunks<T, F>(exec: Exec, n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        let ranges: Vec<_> = chunk_ranges(n, chunk).collect();
        return ranges.into_par_iter().map(f).collect();
    }
    let _ = exec;
    chunk_ranges(n, chunk).map(f).collect()
}

/// Applies `f` to every index of `0..n`, preserving order.
pub fn map_indices<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}
