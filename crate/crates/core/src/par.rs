//! Execution policy for the data-parallel loops.
//!
//! With the `parallel` feature these helpers dispatch to rayon; without it
//! (or when [`Exec::Sequential`] is requested) they run on the calling thread.
//! Results are always returned in index order, so output never depends on the
//! policy or the worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// `(0..n).map(f).collect()` under the given policy.
pub fn map_range<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()` under the given policy.
pub fn map_slice<S, T, F>(exec: Exec, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Fill `out[i] = f(i)` in fixed-size chunks.
pub fn fill_indexed<T, F>(exec: Exec, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    const CHUNK: usize = 1 << 12;
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && out.len() > CHUNK {
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (k, slot) in chunk.iter_mut().enumerate() {
                *slot = f(base + k);
            }
        });
        return;
    }
    let _ = exec;
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

/// Sum of `f(i)` over `0..n`, reduced in chunk order so that the result is
/// bitwise reproducible across policies.
pub fn sum_indexed<F>(exec: Exec, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Send + Sync,
{
    const CHUNK: usize = 1 << 12;
    let chunks = n.div_ceil(CHUNK);
    let partial = map_range(exec, chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        (lo..hi).map(&f).sum::<f64>()
    });
    partial.into_iter().sum()
}

/// Run `f` on a pool with `workers` threads when a count is given.
pub fn with_workers<R: Send, F: FnOnce() -> R + Send>(workers: Option<usize>, f: F) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = workers.filter(|&n| n > 0) {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            return pool.install(f);
        }
    }
    let _ = workers;
    f()
}
