use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{invalid, Result};

pub fn pool(threads: usize) -> Result<ThreadPool> {
    if threads == 0 {
        return Err(invalid("threads", "must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid("threads", e.to_string()))
}

/// Fills `out[k] = f(k)` over a static block partition, one block per
/// worker. Every slot depends only on its index, so the result does not
/// depend on the worker count. The error of the lowest failing block wins.
pub fn fill_indexed<T, F>(pool: &ThreadPool, out: &mut [T], f: F) -> Result<()>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if out.is_empty() {
        return Ok(());
    }
    let workers = pool.current_num_threads().max(1);
    let chunk = out.len().div_ceil(workers);
    let results: Vec<Result<()>> = pool.install(|| {
        out.par_chunks_mut(chunk)
            .enumerate()
            .map(|(b, block)| {
                for (o, slot) in block.iter_mut().enumerate() {
                    *slot = f(b * chunk + o)?;
                }
                Ok(())
            })
            .collect()
    });
    results.into_iter().collect()
}

/// `(i, j)` with `i < j` for condensed index `k` of an `n`-point matrix.
pub fn condensed_pair(n: usize, k: usize) -> (usize, usize) {
    // Row i starts at k_i = i*n - i*(i+1)/2.
    let nf = n as f64;
    let kf = k as f64;
    let mut i = ((2.0 * nf - 1.0 - ((2.0 * nf - 1.0).powi(2) - 8.0 * kf).max(0.0).sqrt()) / 2.0)
        .floor() as usize;
    let start = |i: usize| i * n - i * (i + 1) / 2;
    while i > 0 && start(i) > k {
        i -= 1;
    }
    while i + 1 < n && start(i + 1) <= k {
        i += 1;
    }
    (i, i + 1 + k - start(i))
}
