//! Replica-parallel execution with scheduling-independent results.
//!
//! Replicas are cut into fixed-size chunks. Each chunk is folded
//! sequentially in replica order and chunk results are merged in chunk
//! order, so the floating point reduction tree depends only on the replica
//! count, never on the number of workers.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Replicas folded sequentially inside one work unit.
pub const CHUNK: usize = 256;

/// Worker-count setting. `None` uses rayon's global pool.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Parallelism {
    pub workers: Option<usize>,
}

impl Parallelism {
    pub fn workers(n: usize) -> Self {
        Self { workers: Some(n.max(1)) }
    }

    /// Runs `op` on a dedicated pool when a worker count is set.
    pub fn install<T: Send>(&self, op: impl FnOnce() -> T + Send) -> Result<T> {
        match self.workers {
            None => Ok(op()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
                Ok(pool.install(op))
            }
        }
    }
}

/// Folds `step` over replicas `0..replicas`. `init` builds per-chunk state.
pub fn fold_chunks<S, I, F, M>(replicas: usize, init: I, step: F, merge: M) -> S
where
    S: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) + Sync + Send,
    M: Fn(&mut S, S),
{
    let chunks = replicas.div_ceil(CHUNK);
    let partials: Vec<S> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut state = init();
            let end = ((c + 1) * CHUNK).min(replicas);
            for r in c * CHUNK..end {
                step(&mut state, r);
            }
            state
        })
        .collect();
    let mut acc = init();
    for part in partials {
        merge(&mut acc, part);
    }
    acc
}

/// Per-replica map, results in replica order.
pub fn map_replicas<T, F>(replicas: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..replicas).into_par_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_is_independent_of_worker_count() {
        let sum = |workers: usize| {
            Parallelism::workers(workers)
                .install(|| {
                    fold_chunks(
                        10_000,
                        || 0.0f64,
                        |s, r| *s += 1.0 / (1.0 + r as f64).sqrt(),
                        |a, b| *a += b,
                    )
                })
                .unwrap()
        };
        assert_eq!(sum(1).to_bits(), sum(8).to_bits());
    }

    #[test]
    fn map_keeps_order() {
        let v = map_replicas(1000, |r| r * 2);
        assert!(v.iter().enumerate().all(|(k, x)| *x == 2 * k));
    }
}
