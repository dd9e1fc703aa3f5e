//! Index-keyed parallel map over independent work items.
//!
//! Results always come back in index order, so any reduction done over the
//! returned vector is independent of the worker count and of completion
//! order. With the `parallel` feature disabled everything runs on the calling
//! thread.

use crate::error::Result;

/// Worker count actually used for a request of `workers` (0 = all cores).
pub fn effective_workers(workers: usize) -> usize {
    if cfg!(feature = "parallel") {
        if workers == 0 {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        } else {
            workers
        }
    } else {
        1
    }
}

/// `[f(0), f(1), ..., f(n-1)]`, evaluated on up to `workers` threads.
/// Stops at the first error in index order.
pub fn par_map<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let w = effective_workers(workers);
    if w <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    run_parallel(n, w, f)
}

#[cfg(feature = "parallel")]
fn run_parallel<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| crate::error::config(format!("cannot start {workers} workers: {e}")))?;
    let out: Vec<Result<T>> = pool.install(|| (0..n).into_par_iter().map(&f).collect());
    out.into_iter().collect()
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<T, F>(n: usize, _workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::invalid;

    #[test]
    fn keeps_index_order() {
        for w in [1, 2, 4] {
            let v = par_map(100, w, |i| Ok(i * i)).unwrap();
            assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
        }
        assert!(par_map(0, 3, Ok::<usize, crate::Error>).unwrap().is_empty());
    }

    #[test]
    fn first_error_wins() {
        let r = par_map(50, 3, |i| {
            if i == 7 || i == 30 {
                Err(invalid(format!("{i}")))
            } else {
                Ok(i)
            }
        });
        assert!(r.unwrap_err().to_string().contains('7'));
    }
}
