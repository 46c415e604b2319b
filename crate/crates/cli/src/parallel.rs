//! Replica-parallel drivers. Work is split by replica pair, each pair has its
//! own streams, and results are gathered in replica order, so the output does
//! not depend on the thread count.

use num_complex::Complex64;
use rayon::prelude::*;
use torus_lqg::gmc::{ChaosSampler, MassSummary};
use torus_lqg::lqft::PartitionProblem;
use torus_lqg::rng::{replica_pairs, RngStream};

use crate::error::{CliError, CliResult};

/// Thread pool of `threads` workers; `None` or 0 uses rayon's default.
pub fn pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))
}

/// Maps `f` over replica pairs `(seed, 2k)`, `(seed, 2k+1)` and flattens the
/// results in replica order.
pub fn map_pairs<T, F>(seed: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Vec<Complex64>, RngStream, Option<RngStream>) -> (T, Option<T>) + Sync,
{
    let pairs: Vec<(u64, Option<u64>)> = replica_pairs(count).collect();
    let per_pair: Vec<(T, Option<T>)> = pairs
        .par_iter()
        .map_init(Vec::new, |buf, &(a, b)| f(buf, RngStream::new(seed, a), b.map(|b| RngStream::new(seed, b))))
        .collect();
    let mut out = Vec::with_capacity(count);
    for (a, b) in per_pair {
        out.push(a);
        out.extend(b);
    }
    out
}

/// Mass summaries of replicas `0..count`.
pub fn chaos_masses(sampler: &ChaosSampler, seed: u64, count: usize) -> Vec<MassSummary> {
    map_pairs(seed, count, |buf, a, b| sampler.sample_masses(a, b, buf))
}

/// Moment samples `(∫e^{γH}dM)^{−s/γ}` of replicas `0..count`; equal to
/// [`PartitionProblem::moment_samples`] element for element.
pub fn moment_samples(problem: &PartitionProblem, seed: u64, count: usize) -> Vec<f64> {
    map_pairs(seed, count, |buf, a, b| problem.replica_pair(a, b, buf))
}

/// Tilted chaos integrals `∫e^{γH}dM` of replicas `0..count`.
pub fn chaos_integrals(problem: &PartitionProblem, seed: u64, count: usize) -> Vec<f64> {
    map_pairs(seed, count, |buf, a, b| problem.chaos_integral_pair(a, b, buf))
}
