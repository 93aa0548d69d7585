//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers dispatch to rayon. The
//! sequential path is used when the feature is disabled or when it has been
//! switched off at runtime through [`set_enabled`]. Work is always split into
//! fixed-size chunks and partial results are combined in chunk order, so the
//! numbers produced do not depend on the thread count.

use std::ops::Range;
use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used for loops over state-vector amplitudes.
pub const CHUNK: usize = 1 << 12;

static ENABLED: AtomicBool = AtomicBool::new(true);

/// Switch the data-parallel paths on or off at runtime.
pub fn set_enabled(enabled: bool) {
    ENABLED.store(enabled, Ordering::Relaxed);
}

/// Whether the data-parallel paths are in use.
pub fn is_enabled() -> bool {
    cfg!(feature = "parallel") && ENABLED.load(Ordering::Relaxed)
}

/// Fill `out` chunk by chunk; `f` receives the offset of the chunk.
pub(crate) fn fill_chunks<T, F>(out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_enabled() {
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(k, c)| f(k * chunk, c));
        return;
    }
    out.chunks_mut(chunk)
        .enumerate()
        .for_each(|(k, c)| f(k * chunk, c));
}

/// Evaluate `f` on `0..n`, results in index order.
pub(crate) fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_enabled() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Evaluate `f` on every item, results in item order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_enabled() {
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Evaluate `f` on consecutive index ranges of length `chunk` covering `0..len`.
pub(crate) fn map_chunks<R, F>(len: usize, chunk: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(Range<usize>) -> R + Sync + Send,
{
    let n_chunks = len.div_ceil(chunk);
    map_range(n_chunks, |k| {
        let start = k * chunk;
        f(start..(start + chunk).min(len))
    })
}

/// Deterministic chunked sum of a real-valued kernel.
pub(crate) fn sum_chunks<F>(len: usize, chunk: usize, f: F) -> f64
where
    F: Fn(Range<usize>) -> f64 + Sync + Send,
{
    map_chunks(len, chunk, f).into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_sequential() {
        let len = 10_000;
        let seq: f64 = (0..len).map(|i| (i as f64).sqrt()).sum();
        let par = sum_chunks(len, 97, |r| r.map(|i| (i as f64).sqrt()).sum());
        assert!((seq - par).abs() < 1e-8 * seq);
    }

    #[test]
    fn fill_covers_every_element() {
        let mut v = vec![0usize; 1000];
        fill_chunks(&mut v, 64, |off, c| {
            for (k, x) in c.iter_mut().enumerate() {
                *x = off + k;
            }
        });
        assert!(v.iter().enumerate().all(|(i, &x)| i == x));
    }
}
