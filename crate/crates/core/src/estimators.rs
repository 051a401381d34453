//! Reproducible Monte Carlo experiments.
//!
//! Sample `i` of an experiment draws from stream `i` of the master seed (see
//! [`crate::rng`]), and per-sample results are reduced in index order, so an
//! estimate is bitwise identical whatever the worker count.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::branching::{GoodPathCounter, Label, DEFAULT_NODE_BUDGET};
use crate::geometry::{GeometryError, Lamination, SplitOutcome};
use crate::numeric::binomial_f64;
use crate::rng::{self, Seed};

pub const DEFAULT_BATCHES: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("invalid Monte Carlo configuration: {0}")]
    InvalidConfig(String),
    #[error("failed to build worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McConfig {
    pub master_seed: Seed,
    pub samples: usize,
    pub batches: usize,
    /// Worker threads; affects speed only.
    pub parallelism: usize,
}

impl McConfig {
    pub fn new(master_seed: Seed, samples: usize) -> Self {
        Self {
            master_seed,
            samples,
            batches: DEFAULT_BATCHES.min(samples.max(2)),
            parallelism: 1,
        }
    }

    pub fn with_parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism;
        self
    }

    pub fn with_batches(mut self, batches: usize) -> Self {
        self.batches = batches;
        self
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.batches < 2 || self.samples < self.batches {
            return Err(EstimatorError::InvalidConfig(format!(
                "need samples >= batches >= 2, got samples={}, batches={}",
                self.samples, self.batches
            )));
        }
        if self.parallelism == 0 {
            return Err(EstimatorError::InvalidConfig(
                "parallelism must be positive".into(),
            ));
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool, EstimatorError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.parallelism)
            .build()
            .map_err(|e| EstimatorError::ThreadPool(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub samples: usize,
    pub seed: Seed,
    /// Seconds; the only field that varies between identical runs.
    pub wall_time: f64,
    /// Samples whose enumeration hit the node budget (estimate biased low).
    pub truncated_samples: usize,
}

impl Estimate {
    fn new(mean: f64, stderr: f64, samples: usize, seed: Seed, wall_time: f64, truncated: usize) -> Self {
        Self {
            mean,
            stderr,
            ci95_low: mean - 1.96 * stderr,
            ci95_high: mean + 1.96 * stderr,
            samples,
            seed,
            wall_time,
            truncated_samples: truncated,
        }
    }

    pub fn flagged(&self) -> bool {
        self.truncated_samples > 0
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci95_low <= value && value <= self.ci95_high
    }

    /// `|mean - value|` in units of the standard error.
    pub fn z_score(&self, value: f64) -> f64 {
        if self.stderr == 0.0 {
            if self.mean == value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - value).abs() / self.stderr
        }
    }
}

/// Mean over contiguous batches, and the batch-means standard error.
fn batch_means(values: &[u64], batches: usize) -> (f64, f64) {
    let n = values.len();
    let total: u128 = values.iter().map(|&v| u128::from(v)).sum();
    let mean = total as f64 / n as f64;
    let mut ss = 0.0;
    for b in 0..batches {
        let lo = b * n / batches;
        let hi = (b + 1) * n / batches;
        let s: u128 = values[lo..hi].iter().map(|&v| u128::from(v)).sum();
        let m = s as f64 / (hi - lo) as f64;
        ss += (m - mean) * (m - mean);
    }
    let b = batches as f64;
    (mean, (ss / (b * (b - 1.0))).sqrt())
}

/// Both good-path estimates from one shared set of sampled trees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodPathEstimates {
    pub k: u32,
    pub a: Label,
    pub x0: Label,
    pub n: usize,
    /// `E[#G_n]`.
    pub mean_count: Estimate,
    /// `P(G_n != {})`.
    pub nonempty: Estimate,
}

pub fn estimate_good_paths(
    k: u32,
    a: Label,
    x0: Label,
    n: usize,
    cfg: &McConfig,
) -> Result<GoodPathEstimates, EstimatorError> {
    estimate_good_paths_with_budget(k, a, x0, n, cfg, DEFAULT_NODE_BUDGET)
}

pub fn estimate_good_paths_with_budget(
    k: u32,
    a: Label,
    x0: Label,
    n: usize,
    cfg: &McConfig,
    budget: u64,
) -> Result<GoodPathEstimates, EstimatorError> {
    cfg.validate()?;
    if k < 2 || a < 1 || budget == 0 {
        return Err(EstimatorError::InvalidConfig(format!(
            "need k >= 2, a >= 1, budget > 0; got k={k}, a={a}, budget={budget}"
        )));
    }
    let start = Instant::now();
    let seed = cfg.master_seed;
    let results: Vec<(u64, bool)> = cfg.pool()?.install(|| {
        (0..cfg.samples)
            .into_par_iter()
            .map_init(
                || GoodPathCounter::new(k, a, budget),
                |counter, i| {
                    let mut rng = rng::stream(seed, i as u64);
                    let r = counter.count(x0, n, &mut rng);
                    (r.count, r.truncated)
                },
            )
            .collect()
    });
    let wall = start.elapsed().as_secs_f64();

    let truncated = results.iter().filter(|r| r.1).count();
    let counts: Vec<u64> = results.iter().map(|r| r.0).collect();
    let (mean, stderr) = batch_means(&counts, cfg.batches);
    let hits = counts.iter().filter(|&&c| c > 0).count();
    let p = hits as f64 / cfg.samples as f64;
    let p_err = (p * (1.0 - p) / cfg.samples as f64).sqrt();
    Ok(GoodPathEstimates {
        k,
        a,
        x0,
        n,
        mean_count: Estimate::new(mean, stderr, cfg.samples, seed, wall, truncated),
        nonempty: Estimate::new(p, p_err, cfg.samples, seed, wall, truncated),
    })
}

/// `E_{x0}[#G_n]` over `cfg.samples` independent trees.
pub fn estimate_mean_good_paths(
    k: u32,
    a: Label,
    x0: Label,
    n: usize,
    cfg: &McConfig,
) -> Result<Estimate, EstimatorError> {
    Ok(estimate_good_paths(k, a, x0, n, cfg)?.mean_count)
}

/// `P_{x0}(G_n != {})` over `cfg.samples` independent trees.
pub fn estimate_nonempty_prob(
    k: u32,
    a: Label,
    x0: Label,
    n: usize,
    cfg: &McConfig,
) -> Result<Estimate, EstimatorError> {
    Ok(estimate_good_paths(k, a, x0, n, cfg)?.nonempty)
}

/// Empirical split law for one parent label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionCell {
    pub k: usize,
    pub m: Label,
    pub splits: u64,
    /// Observed compositions `(m_1, ..., m_k)` in child-slot order, with counts.
    pub counts: BTreeMap<Vec<Label>, u64>,
    /// Total variation distance to the uniform law on compositions of `m`.
    pub tv: f64,
    /// Fewer than the requested number of splits were harvested.
    pub missing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryValidation {
    pub k: usize,
    pub runs: u64,
    pub throws_per_run: u64,
    pub cells: Vec<CompositionCell>,
}

impl GeometryValidation {
    pub fn max_tv(&self) -> f64 {
        self.cells.iter().map(|c| c.tv).fold(0.0, f64::max)
    }
}

/// TV distance between observed composition counts and the uniform law.
pub fn tv_to_uniform(k: usize, m: Label, counts: &BTreeMap<Vec<Label>, u64>) -> f64 {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return 1.0;
    }
    let outcomes = binomial_f64(i64::from(m) + k as i64 - 1, k as i64 - 1);
    let u = 1.0 / outcomes;
    let seen: f64 = counts
        .values()
        .map(|&c| (c as f64 / total as f64 - u).abs())
        .sum();
    0.5 * (seen + (outcomes - counts.len() as f64) * u)
}

/// Throws per run used by [`cross_validate_geometry`].
pub fn default_throws_per_run(k: usize) -> u64 {
    match k {
        2 => 48,
        3 => 200,
        _ => 160,
    }
}

const RUNS_PER_ROUND: u64 = 4096;

/// Harvests accepted splits from independent geometric constructions and
/// compares each parent label's child-composition law with the uniform law.
///
/// Runs are processed in fixed rounds and merged in run order; harvesting
/// stops after the first round in which every cell has `splits_per_label`
/// splits, or when `max_runs` is reached.
pub fn cross_validate_geometry(
    k: usize,
    m_max: Label,
    splits_per_label: u64,
    cfg: &McConfig,
) -> Result<GeometryValidation, EstimatorError> {
    cross_validate_geometry_with(k, m_max, splits_per_label, default_throws_per_run(k), cfg)
}

pub fn cross_validate_geometry_with(
    k: usize,
    m_max: Label,
    splits_per_label: u64,
    throws_per_run: u64,
    cfg: &McConfig,
) -> Result<GeometryValidation, EstimatorError> {
    if cfg.parallelism == 0 {
        return Err(EstimatorError::InvalidConfig(
            "parallelism must be positive".into(),
        ));
    }
    Lamination::new(k, 0)?;
    let cells_n = m_max as usize + 1;
    // every run splits the root exactly once, so m = 0 needs this many runs
    let max_runs = splits_per_label.saturating_mul(32).max(RUNS_PER_ROUND);
    let mut counts: Vec<BTreeMap<Vec<Label>, u64>> = vec![BTreeMap::new(); cells_n];
    let mut totals = vec![0u64; cells_n];
    let pool = cfg.pool()?;
    let mut runs = 0u64;
    while runs < max_runs && totals.iter().any(|&t| t < splits_per_label) {
        let round = RUNS_PER_ROUND.min(max_runs - runs);
        let harvested: Vec<Vec<(Label, Vec<Label>)>> = pool.install(|| {
            (runs..runs + round)
                .into_par_iter()
                .map(|r| {
                    let mut lam = Lamination::from_stream(k, cfg.master_seed, r).expect("arity checked");
                    let mut out = Vec::new();
                    for _ in 0..throws_per_run {
                        if let SplitOutcome::Split(s) = lam.throw_random() {
                            if s.parent_label <= m_max {
                                out.push((s.parent_label, s.composition()));
                            }
                        }
                    }
                    out
                })
                .collect()
        });
        for (m, comp) in harvested.into_iter().flatten() {
            let i = m as usize;
            if totals[i] < splits_per_label {
                totals[i] += 1;
                *counts[i].entry(comp).or_insert(0) += 1;
            }
        }
        runs += round;
    }
    let cells = counts
        .into_iter()
        .enumerate()
        .map(|(m, c)| {
            let m = m as Label;
            let splits = totals[m as usize];
            CompositionCell {
                k,
                m,
                splits,
                tv: tv_to_uniform(k, m, &c),
                counts: c,
                missing: splits < splits_per_label,
            }
        })
        .collect();
    Ok(GeometryValidation {
        k,
        runs,
        throws_per_run,
        cells,
    })
}
