//! Data-parallel execution helpers with a sequential fallback.
//!
//! The `parallel` feature gates the rayon dependency; on top of that a
//! runtime switch ([`set_parallel`]) selects between the rayon path and the
//! sequential path, so benchmarks can compare both in one binary.
//!
//! Every helper here is bitwise deterministic: parallel and sequential
//! execution produce identical results because work is split at fixed
//! boundaries and all floating-point reductions combine partial results in
//! index order.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Globally enable or disable the rayon execution path at runtime.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

/// True when the rayon path is compiled in and currently enabled.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && PARALLEL.load(Ordering::Relaxed)
}

/// Chunk size used for deterministic float reductions.
const SUM_CHUNK: usize = 4096;

/// Run `f(chunk_index, chunk)` over fixed-size chunks of `data`.
///
/// Chunks are disjoint, so the closure may freely mutate its chunk.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

/// Build a vector by evaluating `f` on each index in `0..n`.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

fn seq_sum_f64(xs: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &x in xs {
        acc += x;
    }
    acc
}

/// Deterministic chunked sum in f64, independent of the execution mode.
pub fn sum_f64(xs: &[f64]) -> f64 {
    let partials: Vec<f64> = {
        #[cfg(feature = "parallel")]
        if parallel_enabled() {
            xs.par_chunks(SUM_CHUNK).map(seq_sum_f64).collect()
        } else {
            xs.chunks(SUM_CHUNK).map(seq_sum_f64).collect()
        }
        #[cfg(not(feature = "parallel"))]
        xs.chunks(SUM_CHUNK).map(seq_sum_f64).collect::<Vec<_>>()
    };
    seq_sum_f64(&partials)
}

/// Deterministic chunked transform-reduce: sums `f(x)` over `xs`.
pub fn sum_by<T, S, F>(xs: &[T], f: F) -> S
where
    T: Sync,
    S: crate::tensor::Scalar,
    F: Fn(&T) -> S + Send + Sync,
{
    let chunk_sum = |c: &[T]| {
        let mut acc = S::zero();
        for x in c {
            acc = acc + f(x);
        }
        acc
    };
    let partials: Vec<S> = {
        #[cfg(feature = "parallel")]
        if parallel_enabled() {
            xs.par_chunks(SUM_CHUNK).map(chunk_sum).collect()
        } else {
            xs.chunks(SUM_CHUNK).map(chunk_sum).collect()
        }
        #[cfg(not(feature = "parallel"))]
        xs.chunks(SUM_CHUNK).map(chunk_sum).collect::<Vec<_>>()
    };
    let mut acc = S::zero();
    for p in partials {
        acc = acc + p;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_matches_between_modes() {
        let xs: Vec<f64> = (0..20_000).map(|i| (i as f64).sin()).collect();
        set_parallel(true);
        let a = sum_f64(&xs);
        set_parallel(false);
        let b = sum_f64(&xs);
        set_parallel(true);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn chunked_mutation_covers_all_elements() {
        let mut v = vec![0u32; 1000];
        for_each_chunk_mut(&mut v, 64, |i, c| {
            for x in c.iter_mut() {
                *x = i as u32 + 1;
            }
        });
        assert!(v.iter().all(|&x| x > 0));
    }
}
