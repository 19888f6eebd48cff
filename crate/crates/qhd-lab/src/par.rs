//! Thin shims over rayon so the numerical core compiles with a sequential
//! fallback when the `parallel` feature is disabled. Both paths perform the
//! same chunked traversal in the same order, so results are bit-identical.

pub const CHUNK: usize = 4096;

#[cfg(feature = "parallel")]
pub fn for_each_chunk<T: Send>(data: &mut [T], chunk: usize, op: impl Fn(usize, &mut [T]) + Sync) {
    use rayon::prelude::*;
    data.par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| op(i * chunk, c));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_chunk<T>(data: &mut [T], chunk: usize, op: impl Fn(usize, &mut [T]) + Sync) {
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        op(i * chunk, c);
    }
}

/// Map every index in `0..n` to a value, collecting in index order.
#[cfg(feature = "parallel")]
pub fn map_collect<T: Send>(n: usize, op: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(op).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T>(n: usize, op: impl Fn(usize) -> T + Sync) -> Vec<T> {
    (0..n).map(op).collect()
}
