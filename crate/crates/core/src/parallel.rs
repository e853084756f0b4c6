//! Replication harness for Monte Carlo checks.
//!
//! Replication `r` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream
//! `r`, so results do not depend on scheduling or thread count. With the
//! `parallel` feature off, [`Execution::Parallel`] runs sequentially.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether `Parallel` would actually use worker threads in this build.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

pub fn replication_rng(seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

/// Runs `f(r, rng_r)` for `r in 0..n`; the output is ordered by `r`.
pub fn run_replications<T, F>(n: usize, seed: u64, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync + Send,
{
    let one = |r: usize| f(r, &mut replication_rng(seed, r));
    match exec {
        Execution::Sequential => (0..n).map(one).collect(),
        Execution::Parallel => par_map(n, one),
    }
}

#[cfg(feature = "parallel")]
fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn modes_agree_and_keep_order() {
        let f = |r: usize, rng: &mut ChaCha8Rng| (r, rng.random::<u64>());
        let s = run_replications(64, 9, Execution::Sequential, f);
        let p = run_replications(64, 9, Execution::Parallel, f);
        assert_eq!(s, p);
        assert!(s.iter().enumerate().all(|(i, (r, _))| *r == i));
    }

    #[test]
    fn streams_are_distinct() {
        let draws = run_replications(16, 1, Execution::Sequential, |_, rng| rng.random::<u64>());
        let mut d = draws.clone();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), draws.len());
    }
}
