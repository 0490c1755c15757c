//! Parallel benchmark runner.
//!
//! Jobs are seeded independently and summarized in canonical order, so the
//! summary does not depend on the thread count or on completion order.

use rayon::prelude::*;
use robrsvd_core::bench::{jobs, run_job, summarize, BenchmarkConfig, JobOutcome, SummaryRow};

use crate::error::{Error, Result};

/// Runs every job on a pool of `threads` workers (0 picks the number of
/// available cores).
pub fn run_benchmark_parallel(cfg: &BenchmarkConfig, threads: usize) -> Result<Vec<SummaryRow>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    let outcomes: Vec<JobOutcome> = pool.install(|| jobs(cfg).into_par_iter().map(|j| run_job(cfg, j)).collect());
    Ok(summarize(cfg, &outcomes))
}
