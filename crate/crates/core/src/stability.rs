//! Stability selection over half-size subsamples with a bound on the expected
//! number of false positives.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{log_grid, sample_beta12, EstimatorConfig, PreparedEstimator};
use crate::regression::RegressionProblem;
use crate::rng;
use crate::support::SupportSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub n_resamples: usize,
    pub pi_thr: f64,
    pub ev_max: f64,
    /// The grid spans `[eps·λ_max, λ_max]`.
    pub eps: f64,
    pub n_lambdas: usize,
    pub seed: u64,
    /// Evaluate resamples on the rayon pool. Results do not depend on it, so
    /// it is left out of serialized reports.
    #[serde(skip_serializing, default = "parallel_default")]
    pub parallel: bool,
}

fn parallel_default() -> bool {
    true
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { n_resamples: 40, pi_thr: 0.9, ev_max: 3.0, eps: 1e-3, n_lambdas: 30, seed: 0, parallel: true }
    }
}

impl StabilityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_resamples == 0 || self.n_lambdas == 0 {
            return Err(Error::InvalidData("need at least one resample and one lambda".into()));
        }
        if !(self.pi_thr > 0.5 && self.pi_thr <= 1.0) {
            return Err(Error::InvalidData(format!("pi_thr must lie in (0.5, 1], got {}", self.pi_thr)));
        }
        if !(self.ev_max > 0.0) {
            return Err(Error::InvalidData(format!("ev_max must be positive, got {}", self.ev_max)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidData(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// Descending.
    pub lambda_grid: Vec<f64>,
    /// `p × n_lambdas` selection frequencies.
    pub pi_hat: DMatrix<f64>,
    pub q_hat: Vec<f64>,
    pub ev_bound: Vec<f64>,
    pub lambda_star_mask: Vec<bool>,
    pub stable_set: SupportSet,
    pub config: StabilityConfig,
}

impl StabilityReport {
    pub fn p(&self) -> usize {
        self.pi_hat.nrows()
    }

    pub fn lambda_star_is_empty(&self) -> bool {
        !self.lambda_star_mask.iter().any(|m| *m)
    }

    /// Smallest `EV_max` for which `Λ*` would contain at least one `λ`.
    pub fn min_ev_max(&self) -> f64 {
        self.ev_bound.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest selection frequency of column `k` over `Λ*`, if `Λ*` is non-empty.
    pub fn max_pi_in_lambda_star(&self, k: usize) -> Option<f64> {
        self.lambda_star_mask
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(l, _)| self.pi_hat[(k, l)])
            .reduce(f64::max)
    }

    /// Rows `[term_name, lambda, pi_hat]`.
    pub fn write_paths_csv(&self, path: &Path, names: &[String]) -> Result<()> {
        if names.len() != self.p() {
            return Err(Error::InvalidData("one name per column is required".into()));
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["term_name", "lambda", "pi_hat"])?;
        for (k, name) in names.iter().enumerate() {
            for (l, lam) in self.lambda_grid.iter().enumerate() {
                w.write_record([name.clone(), format!("{lam:e}"), format!("{}", self.pi_hat[(k, l)])])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Rows `[lambda, q_hat, ev_bound, in_lambda_star]`.
    pub fn write_error_bound_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["lambda", "q_hat", "ev_bound", "in_lambda_star"])?;
        for l in 0..self.lambda_grid.len() {
            w.write_record([
                format!("{:e}", self.lambda_grid[l]),
                format!("{}", self.q_hat[l]),
                format!("{}", self.ev_bound[l]),
                self.lambda_star_mask[l].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self, names: &[String]) -> StabilitySummary {
        StabilitySummary {
            stable_set: self.stable_set.clone(),
            stable_terms: self.stable_set.indices().iter().map(|k| names[*k].clone()).collect(),
            lambda_star_size: self.lambda_star_mask.iter().filter(|m| **m).count(),
            min_ev_max: self.min_ev_max(),
            lambda_max: self.lambda_grid[0],
            config: self.config.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub stable_set: SupportSet,
    pub stable_terms: Vec<String>,
    pub lambda_star_size: usize,
    pub min_ev_max: f64,
    pub lambda_max: f64,
    pub config: StabilityConfig,
}

/// Log-spaced descending grid on `[eps·λ_max, λ_max]`, with `λ_max` taken on
/// the full problem so every subsample shares it.
pub fn lambda_grid(problem: &RegressionProblem, estimator: &EstimatorConfig, config: &StabilityConfig) -> Result<Vec<f64>> {
    let lmax = PreparedEstimator::new(problem, estimator)?.lambda_max();
    if !(lmax > 0.0) {
        return Err(Error::InvalidData("lambda_max is zero: the target is orthogonal to every column".into()));
    }
    Ok(log_grid(lmax, config.eps * lmax, config.n_lambdas))
}

fn resample_counts(
    problem: &RegressionProblem,
    estimator: &EstimatorConfig,
    config: &StabilityConfig,
    grid: &[f64],
    b: usize,
) -> Result<Vec<u32>> {
    let (n, p) = (problem.n(), problem.p());
    let rows = rng::subsample_without_replacement(rng::derive_seed(config.seed, &[b as u64]), n, n / 2);
    let sub = problem.subsample(&rows)?;
    let prepared = PreparedEstimator::new(&sub, estimator)?;
    let mut counts = vec![0u32; p * grid.len()];
    for (l, &lambda) in grid.iter().enumerate() {
        let scales = prepared
            .is_randomised()
            .then(|| sample_beta12(rng::derive_seed(config.seed, &[b as u64, l as u64]), p));
        for (k, sel) in prepared.select(lambda, scales.as_ref()).into_iter().enumerate() {
            counts[l * p + k] += u32::from(sel);
        }
    }
    Ok(counts)
}

/// `Π̂` as a `p × n_lambdas` matrix together with the `λ` grid.
pub fn selection_probabilities(
    problem: &RegressionProblem,
    estimator: &EstimatorConfig,
    config: &StabilityConfig,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    config.validate()?;
    if problem.n() < 4 {
        return Err(Error::InvalidData(format!("need at least 4 samples, got {}", problem.n())));
    }
    let grid = lambda_grid(problem, estimator, config)?;
    let p = problem.p();
    let run = |b: usize| resample_counts(problem, estimator, config, &grid, b);
    let per_resample: Vec<Vec<u32>> = if config.parallel {
        (0..config.n_resamples).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..config.n_resamples).map(run).collect::<Result<_>>()?
    };
    let mut total = vec![0u32; p * grid.len()];
    for counts in &per_resample {
        for (t, c) in total.iter_mut().zip(counts) {
            *t += c;
        }
    }
    let b = config.n_resamples as f64;
    let pi = DMatrix::from_fn(p, grid.len(), |k, l| total[l * p + k] as f64 / b);
    Ok((grid, pi))
}

/// `q̂² / ((2π_thr − 1)·p)`.
pub fn ev_bound(q_hat: f64, pi_thr: f64, p: usize) -> f64 {
    q_hat * q_hat / ((2.0 * pi_thr - 1.0) * p as f64)
}

pub fn lambda_star(q_hat: &[f64], config: &StabilityConfig, p: usize) -> Vec<bool> {
    q_hat.iter().map(|q| ev_bound(*q, config.pi_thr, p) <= config.ev_max).collect()
}

/// `{k : max over Λ* of Π̂_k ≥ π_thr}`; empty with a warning when `Λ*` is empty.
pub fn stable_set(pi_hat: &DMatrix<f64>, mask: &[bool], pi_thr: f64) -> SupportSet {
    if !mask.iter().any(|m| *m) {
        log::warn!("no valid region: every lambda exceeds the false-positive bound; raise ev_max");
        return SupportSet::empty();
    }
    let sel: Vec<bool> = (0..pi_hat.nrows())
        .map(|k| {
            mask.iter()
                .enumerate()
                .filter(|(_, m)| **m)
                .any(|(l, _)| pi_hat[(k, l)] >= pi_thr)
        })
        .collect();
    SupportSet::from_mask(&sel)
}

pub fn run_stability(
    problem: &RegressionProblem,
    estimator: &EstimatorConfig,
    config: &StabilityConfig,
) -> Result<StabilityReport> {
    let (grid, pi_hat) = selection_probabilities(problem, estimator, config)?;
    let p = problem.p();
    let q_hat: Vec<f64> = pi_hat.column_iter().map(|c| c.sum()).collect();
    let ev: Vec<f64> = q_hat.iter().map(|q| ev_bound(*q, config.pi_thr, p)).collect();
    let mask = lambda_star(&q_hat, config, p);
    let stable = stable_set(&pi_hat, &mask, config.pi_thr);
    let report = StabilityReport {
        lambda_grid: grid,
        pi_hat,
        q_hat,
        ev_bound: ev,
        lambda_star_mask: mask,
        stable_set: stable,
        config: config.clone(),
    };
    if report.lambda_star_is_empty() {
        log::warn!("the smallest ev_max with a non-empty region is {:.3}", report.min_ev_max());
    }
    Ok(report)
}
