//! Deterministic data-parallel helpers.
//!
//! Sums are split into fixed-size chunks. Each chunk is reduced sequentially
//! and chunk totals are added in index order, so the floating-point result
//! does not depend on the thread count or on whether rayon is used at all.

use std::cell::Cell;

/// Number of indices reduced sequentially inside one chunk.
pub const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Parallel,
    Sequential,
}

thread_local! {
    static MODE: Cell<Execution> = const { Cell::new(Execution::Parallel) };
}

/// Execution mode seen by calls made from the current thread.
pub fn execution() -> Execution {
    if cfg!(feature = "parallel") {
        MODE.with(|m| m.get())
    } else {
        Execution::Sequential
    }
}

/// Runs `f` with every reduction issued from this thread forced sequential.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    let prev = MODE.with(|m| m.replace(Execution::Sequential));
    let out = f();
    MODE.with(|m| m.set(prev));
    out
}

fn chunk_sum<const N: usize, F>(lo: usize, hi: usize, f: &F) -> [f64; N]
where
    F: Fn(usize) -> [f64; N],
{
    let mut acc = [0.0; N];
    for i in lo..hi {
        let v = f(i);
        for k in 0..N {
            acc[k] += v[k];
        }
    }
    acc
}

/// `Σ_{i < len} f(i)` componentwise, with a fixed reduction order.
pub fn sum_indexed<const N: usize, F>(len: usize, f: F) -> [f64; N]
where
    F: Fn(usize) -> [f64; N] + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partials: Vec<[f64; N]> = match execution() {
        #[cfg(feature = "parallel")]
        Execution::Parallel if chunks > 1 => {
            use rayon::prelude::*;
            (0..chunks)
                .into_par_iter()
                .map(|c| chunk_sum(c * CHUNK, ((c + 1) * CHUNK).min(len), &f))
                .collect()
        }
        _ => (0..chunks)
            .map(|c| chunk_sum(c * CHUNK, ((c + 1) * CHUNK).min(len), &f))
            .collect(),
    };
    let mut total = [0.0; N];
    for p in partials {
        for k in 0..N {
            total[k] += p[k];
        }
    }
    total
}

/// Order-preserving map over `0..len`.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match execution() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
        _ => (0..len).map(f).collect(),
    }
}
