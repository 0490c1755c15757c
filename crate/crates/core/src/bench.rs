//! Monte Carlo comparison of SVD, RSVD and RobRSVD on simulated data.
//!
//! A benchmark is a list of independent jobs, one per
//! (contamination, noise variance, replication). Every method in a job is
//! fitted on the same draw. Jobs can run in any order or in parallel; the
//! summary depends only on the job outcomes.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::decomp::{fit, DecompositionOptions, Method};
use crate::error::{contract, Result};
use crate::sim::{
    generate, mask_random, metric_frobenius, metric_l2, metric_principal_angle, metric_singular_value,
    Contamination, SimScenario,
};

pub const METRICS: [&str; 5] = ["l2_u", "l2_v", "abs_s", "frobenius", "angle_u"];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BenchmarkConfig {
    /// Grid size, rank, sizes and seed; contamination, noise and stream are
    /// overwritten per job.
    pub base: SimScenario,
    pub contaminations: Vec<Contamination>,
    pub noise_variances: Vec<f64>,
    pub methods: Vec<Method>,
    pub replications: usize,
    /// Cells masked in each draw before fitting.
    pub mask_count: usize,
    pub options: DecompositionOptions,
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(contract("replications must be >= 1"));
        }
        if self.contaminations.is_empty() || self.noise_variances.is_empty() || self.methods.is_empty() {
            return Err(contract("benchmark needs at least one scenario, noise level and method"));
        }
        if self.noise_variances.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(contract("noise variances must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub contamination: Contamination,
    pub sigma2: f64,
    pub replication: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub l2_u: f64,
    pub l2_v: f64,
    pub abs_s: f64,
    pub frobenius: f64,
    pub angle_u: f64,
}

impl Metrics {
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "l2_u" => self.l2_u,
            "l2_v" => self.l2_v,
            "abs_s" => self.abs_s,
            "frobenius" => self.frobenius,
            "angle_u" => self.angle_u,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobOutcome {
    pub job: Job,
    /// Per method, in config order; failures carry the error message.
    pub results: Vec<(Method, core::result::Result<Metrics, String>)>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SummaryRow {
    pub scenario: String,
    pub method: String,
    pub sigma2: f64,
    pub metric: String,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Successful replications contributing to the statistics.
    pub replications: usize,
    pub failures: usize,
}

/// Jobs in canonical order: contamination, then noise, then replication.
pub fn jobs(cfg: &BenchmarkConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for &contamination in &cfg.contaminations {
        for &sigma2 in &cfg.noise_variances {
            for replication in 0..cfg.replications {
                out.push(Job {
                    contamination,
                    sigma2,
                    replication,
                });
            }
        }
    }
    out
}

fn evaluate(cfg: &BenchmarkConfig, method: Method, sim: &crate::sim::SimResult) -> Result<Metrics> {
    let rank = sim.truth.s.len();
    let dec = fit(&sim.data, method, rank, &cfg.options)?;
    let first = &dec.components[0];
    Ok(Metrics {
        l2_u: metric_l2(&first.u, &sim.truth.u[0])?,
        l2_v: metric_l2(&first.v, &sim.truth.v[0])?,
        abs_s: metric_singular_value(first.s, sim.truth.s[0]),
        frobenius: metric_frobenius(&dec.reconstruction(rank), &sim.signal)?,
        angle_u: metric_principal_angle(&dec.left_basis(), &sim.truth.left_basis())?,
    })
}

/// Draws the job's dataset (stream = replication index) and fits every
/// method on it.
pub fn run_job(cfg: &BenchmarkConfig, job: Job) -> JobOutcome {
    let scenario = SimScenario {
        contamination: job.contamination,
        noise_variance: job.sigma2,
        stream: job.replication as u64,
        ..cfg.base.clone()
    };
    let sim = generate(&scenario)
        .and_then(|s| mask_random(&s, cfg.mask_count, cfg.base.seed, job.replication as u64));
    let results = cfg
        .methods
        .iter()
        .map(|&method| {
            let r = match &sim {
                Ok(s) => evaluate(cfg, method, s).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            (method, r)
        })
        .collect();
    JobOutcome { job, results }
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`). `sorted` must be ascending and nonempty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and quartiles per (scenario, method, noise level, metric), rows in
/// canonical order regardless of the order of `outcomes`.
pub fn summarize(cfg: &BenchmarkConfig, outcomes: &[JobOutcome]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &contamination in &cfg.contaminations {
        for &sigma2 in &cfg.noise_variances {
            let mut group: Vec<&JobOutcome> = outcomes
                .iter()
                .filter(|o| o.job.contamination == contamination && o.job.sigma2 == sigma2)
                .collect();
            group.sort_by_key(|o| o.job.replication);
            for (mi, &method) in cfg.methods.iter().enumerate() {
                let ok: Vec<&Metrics> = group.iter().filter_map(|o| o.results[mi].1.as_ref().ok()).collect();
                let failures = group.len() - ok.len();
                for name in METRICS {
                    let mut vals: Vec<f64> = ok.iter().filter_map(|m| m.get(name)).collect();
                    vals.sort_by(f64::total_cmp);
                    let (median, q1, q3) = if vals.is_empty() {
                        (f64::NAN, f64::NAN, f64::NAN)
                    } else {
                        (quantile(&vals, 0.5), quantile(&vals, 0.25), quantile(&vals, 0.75))
                    };
                    rows.push(SummaryRow {
                        scenario: contamination.name().to_string(),
                        method: method.name().to_string(),
                        sigma2,
                        metric: name.to_string(),
                        median,
                        q1,
                        q3,
                        replications: vals.len(),
                        failures,
                    });
                }
            }
        }
    }
    rows
}

/// Sequential run of every job.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<SummaryRow>> {
    cfg.validate()?;
    let outcomes: Vec<JobOutcome> = jobs(cfg).into_iter().map(|j| run_job(cfg, j)).collect();
    Ok(summarize(cfg, &outcomes))
}
