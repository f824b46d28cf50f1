//! Counter-based seeding and replica-parallel execution.
//!
//! Replica `i` of a run with master seed `s` always receives
//! [`derive_seed`]`(s, i)`, and results are collected in replica order, so
//! the output of [`parallel_map`] does not depend on the worker count.

use rayon::prelude::*;

use crate::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replica `index` under `master`.
///
/// `index -> master + (index + 1) * gamma` is injective modulo 2^64 (gamma
/// is odd) and the splitmix finalizer is a bijection, so seeds never collide
/// within one master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Master seed of sub-stream `stream`, e.g. one per matrix size.
pub fn stream_seed(master: u64, stream: u64) -> u64 {
    derive_seed(master, u64::MAX - stream)
}

/// Seed `index` of sub-stream `stream`; equals
/// `derive_seed(stream_seed(master, stream), index)`.
pub fn derive_stream(master: u64, stream: u64, index: u64) -> u64 {
    derive_seed(stream_seed(master, stream), index)
}

/// Failure of one replica during [`parallel_map`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaFailure {
    pub replica: usize,
    pub completed: usize,
    pub error: Error,
}

/// Run `task(index, seed)` for `replicas` replicas on `workers` threads.
///
/// Results are returned in replica order. The first failing replica (by
/// index) aborts the run; `completed` counts the replicas that succeeded.
pub fn parallel_map<T, F>(replicas: usize, workers: usize, master_seed: u64, task: F) -> std::result::Result<Vec<T>, ReplicaFailure>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync + Send,
{
    crate::linalg::ensure_sequential();
    if replicas == 0 {
        return Ok(Vec::new());
    }
    let run = || -> Vec<Result<T>> {
        (0..replicas)
            .into_par_iter()
            .map(|i| task(i, derive_seed(master_seed, i as u64)))
            .collect()
    };
    let results = if workers <= 1 {
        (0..replicas).map(|i| task(i, derive_seed(master_seed, i as u64))).collect()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        }
    };
    let completed = results.iter().filter(|r| r.is_ok()).count();
    let mut out = Vec::with_capacity(replicas);
    for (replica, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(error) => {
                return Err(ReplicaFailure {
                    replica,
                    completed,
                    error,
                })
            }
        }
    }
    Ok(out)
}

/// Default worker count: `WIGNER_GAPS_WORKERS` if set, else available parallelism.
pub fn default_workers() -> usize {
    std::env::var("WIGNER_GAPS_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w: &usize| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn seeds_are_distinct() {
        let seeds: HashSet<u64> = (0..1_000_000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1_000_000);
    }

    #[test]
    fn noop_tasks_get_distinct_seeds() {
        let seeds = parallel_map(1000, 4, 9, |_, s| Ok(s)).unwrap();
        assert_eq!(seeds.iter().collect::<HashSet<_>>().len(), 1000);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let f = |i: usize, s: u64| Ok((i, s.wrapping_mul(3)));
        let a = parallel_map(257, 1, 5, f).unwrap();
        let b = parallel_map(257, 8, 5, f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_run() {
        let v: Vec<u8> = parallel_map(0, 8, 1, |_, _| Ok(0)).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn failure_reports_replica() {
        let r = parallel_map(10, 2, 1, |i, _| if i == 7 { Err(Error::DegenerateFit) } else { Ok(i) });
        let e = r.unwrap_err();
        assert_eq!(e.replica, 7);
        assert_eq!(e.completed, 9);
    }
}
