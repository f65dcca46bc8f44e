//! Thin wrappers so every parallel loop is a map over disjoint output chunks.
//! No floating-point reduction ever crosses a chunk boundary, which keeps
//! results identical for any worker count.
//!
//! Inputs smaller than `SEQUENTIAL_BELOW` items run on the calling thread,
//! where scheduling would cost more than the work.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub(crate) const SEQUENTIAL_BELOW: usize = 4096;

/// Calls `f(chunk_index, chunk)` for each `chunk_len`-sized piece of `data`.
pub(crate) fn for_each_chunk<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    if data.len() >= SEQUENTIAL_BELOW {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    data.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

/// Collects `f(i)` for `i in 0..n`.
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if n >= SEQUENTIAL_BELOW {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}
