//! Sparsity estimators built on the coordinate-descent Lasso: the adaptive
//! Lasso, its randomised variant with Beta(1,2) penalty scales, the plain
//! randomised Lasso, and a thresholded cross-validated Lasso baseline.
//!
//! Every weighted estimator is solved as an ordinary Lasso on a design whose
//! columns are multiplied by per-column factors, then mapped back.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::{
    self, CoefficientVector, Gram, LassoFit, RegressionProblem, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::rng;
use crate::support::SupportSet;

/// Floor on `|ξ̂_i|` before raising to `γ`.
pub const WEIGHT_FLOOR: f64 = 1e-10;
/// Lower clamp on Beta(1,2) draws.
pub const SCALE_FLOOR: f64 = 1e-6;

pub const DEFAULT_GAMMA: f64 = 2.0;
pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveWeights {
    pub gamma: f64,
    /// Initial estimate in standardized units.
    pub initial_estimate: Vec<f64>,
    /// `ŵ_i = 1 / max(|ξ̂_i|, ε)^γ`.
    pub weights: Vec<f64>,
    /// Columns whose estimate fell under [`WEIGHT_FLOOR`].
    pub capped: Vec<bool>,
}

impl AdaptiveWeights {
    pub fn from_estimate(estimate: &[f64], gamma: f64) -> Result<Self> {
        if !(gamma >= 1.0) {
            return Err(Error::InvalidData(format!("gamma must be >= 1, got {gamma}")));
        }
        let capped: Vec<bool> = estimate.iter().map(|v| !(v.abs() >= WEIGHT_FLOOR)).collect();
        let weights = estimate
            .iter()
            .map(|v| 1.0 / v.abs().max(WEIGHT_FLOOR).powf(gamma))
            .collect();
        Ok(Self {
            gamma,
            initial_estimate: estimate.to_vec(),
            weights,
            capped,
        })
    }

    /// Unit weights: the adaptive Lasso reduces to the Lasso.
    pub fn identity(p: usize) -> Self {
        Self {
            gamma: 1.0,
            initial_estimate: vec![1.0; p],
            weights: vec![1.0; p],
            capped: vec![false; p],
        }
    }

    pub fn p(&self) -> usize {
        self.weights.len()
    }

    /// Column factors `1/ŵ_i` that turn `Θ` into `Θ̃`.
    pub fn factors(&self) -> Vec<f64> {
        self.weights.iter().map(|w| 1.0 / w).collect()
    }
}

/// Ridge initial estimate on the standardized design, turned into weights.
pub fn adaptive_weights(problem: &RegressionProblem, gamma: f64, ridge_lambda: f64) -> Result<AdaptiveWeights> {
    let est = regression::ridge_standardized(problem, ridge_lambda)?;
    AdaptiveWeights::from_estimate(est.as_slice(), gamma)
}

fn adaptive_weights_from_gram(gram: &Gram, gamma: f64, ridge_lambda: f64) -> Result<AdaptiveWeights> {
    let est = gram.ridge(ridge_lambda)?;
    AdaptiveWeights::from_estimate(est.as_slice(), gamma)
}

/// Random penalty divisors `W_i ∈ [ε_W, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomPenaltyScales {
    pub values: Vec<f64>,
    pub seed: u64,
}

/// Inverse CDF of Beta(1,2), clamped to `[ε_W, 1]`.
pub fn beta12_inverse_cdf(u: f64) -> f64 {
    (1.0 - (1.0 - u).max(0.0).sqrt()).clamp(SCALE_FLOOR, 1.0)
}

pub fn sample_beta12(seed: u64, p: usize) -> RandomPenaltyScales {
    let mut stream = rng::stream(seed);
    let values = (0..p).map(|_| beta12_inverse_cdf(stream.gen::<f64>())).collect();
    RandomPenaltyScales { values, seed }
}

fn weighted_fit(problem: &RegressionProblem, gram: &Gram, lambda: f64, factors: &[f64]) -> LassoFit {
    let (beta, converged, sweeps) = gram.lasso(lambda, Some(factors), DEFAULT_TOL, DEFAULT_MAX_ITER);
    if !converged {
        log::warn!("weighted lasso did not converge (lambda={lambda:e})");
    }
    let standardized = DVector::from_iterator(beta.len(), beta.iter().zip(factors).map(|(b, f)| b * f));
    LassoFit {
        coefficients: problem.unscale(&standardized),
        standardized,
        converged,
        sweeps,
    }
}

pub fn adaptive_lasso(problem: &RegressionProblem, lambda: f64, weights: &AdaptiveWeights) -> Result<LassoFit> {
    check_p(problem, weights.p())?;
    Ok(weighted_fit(problem, &problem.gram(), lambda, &weights.factors()))
}

/// Adaptive Lasso with each penalty divided by `W_i`, solved by scaling
/// column `i` of the adaptive design by `W_i`. Passing
/// [`AdaptiveWeights::identity`] gives the randomised Lasso.
pub fn randomised_adaptive_lasso(
    problem: &RegressionProblem,
    lambda: f64,
    weights: &AdaptiveWeights,
    scales: &RandomPenaltyScales,
) -> Result<LassoFit> {
    check_p(problem, weights.p())?;
    check_p(problem, scales.values.len())?;
    let factors: Vec<f64> = weights.factors().iter().zip(&scales.values).map(|(f, w)| f * w).collect();
    Ok(weighted_fit(problem, &problem.gram(), lambda, &factors))
}

fn check_p(problem: &RegressionProblem, p: usize) -> Result<()> {
    if p != problem.p() {
        return Err(Error::InvalidData(format!("expected {} columns, got {}", problem.p(), p)));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Lasso,
    #[value(name = "rlasso")]
    RandomisedLasso,
    #[value(name = "adalasso")]
    AdaptiveLasso,
    #[value(name = "radalasso")]
    RandomisedAdaptiveLasso,
    #[value(name = "lasso-cv")]
    ThresholdedLassoCv,
}

impl EstimatorKind {
    pub fn is_adaptive(self) -> bool {
        matches!(self, Self::AdaptiveLasso | Self::RandomisedAdaptiveLasso)
    }

    pub fn is_randomised(self) -> bool {
        matches!(self, Self::RandomisedLasso | Self::RandomisedAdaptiveLasso)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub gamma: f64,
    pub ridge_lambda: f64,
    pub threshold: f64,
    pub cv_folds: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kind: EstimatorKind::RandomisedAdaptiveLasso,
            gamma: DEFAULT_GAMMA,
            ridge_lambda: DEFAULT_RIDGE_LAMBDA,
            threshold: 0.1,
            cv_folds: 5,
        }
    }
}

impl EstimatorConfig {
    pub fn with_kind(kind: EstimatorKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 1.0) {
            return Err(Error::InvalidData(format!("gamma must be >= 1, got {}", self.gamma)));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::InvalidData("threshold must be >= 0".into()));
        }
        if !(self.ridge_lambda >= 0.0) {
            return Err(Error::InvalidData("ridge lambda must be >= 0".into()));
        }
        Ok(())
    }
}

/// An estimator bound to one (sub)problem: sufficient statistics plus the
/// deterministic part of the column factors. Used for path sweeps where the
/// same problem is solved at many `λ`.
#[derive(Debug, Clone)]
pub struct PreparedEstimator {
    gram: Gram,
    base_factors: Vec<f64>,
    randomised: bool,
}

impl PreparedEstimator {
    pub fn new(problem: &RegressionProblem, config: &EstimatorConfig) -> Result<Self> {
        Self::from_gram(problem.gram(), config)
    }

    pub fn from_gram(gram: Gram, config: &EstimatorConfig) -> Result<Self> {
        config.validate()?;
        if config.kind == EstimatorKind::ThresholdedLassoCv {
            return Err(Error::InvalidData(
                "the cross-validated baseline has no regularisation path".into(),
            ));
        }
        let base_factors = if config.kind.is_adaptive() {
            adaptive_weights_from_gram(&gram, config.gamma, config.ridge_lambda)?.factors()
        } else {
            vec![1.0; gram.p()]
        };
        Ok(Self {
            gram,
            base_factors,
            randomised: config.kind.is_randomised(),
        })
    }

    pub fn p(&self) -> usize {
        self.base_factors.len()
    }

    pub fn is_randomised(&self) -> bool {
        self.randomised
    }

    /// `λ_max` of the deterministic (unrandomised) design.
    pub fn lambda_max(&self) -> f64 {
        self.gram.lambda_max(Some(&self.base_factors))
    }

    /// Selected columns at `λ`. `scales` is ignored for non-randomised kinds.
    pub fn select(&self, lambda: f64, scales: Option<&RandomPenaltyScales>) -> Vec<bool> {
        let factors: Vec<f64> = match (self.randomised, scales) {
            (true, Some(s)) => self.base_factors.iter().zip(&s.values).map(|(f, w)| f * w).collect(),
            _ => self.base_factors.clone(),
        };
        let (beta, _, _) = self.gram.lasso(lambda, Some(&factors), DEFAULT_TOL, DEFAULT_MAX_ITER);
        beta.iter().map(|b| *b != 0.0).collect()
    }
}

/// Outcome of the cross-validated baseline.
#[derive(Debug, Clone)]
pub struct CvSelection {
    pub support: SupportSet,
    pub lambda: f64,
    pub fit: LassoFit,
}

pub const CV_GRID_POINTS: usize = 20;

/// Log-spaced descending grid from `hi` down to `lo`.
pub fn log_grid(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (lh, ll) = (hi.ln(), lo.ln());
    (0..count)
        .map(|k| (lh + (ll - lh) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Lasso with `λ` picked by `folds`-fold cross-validation over contiguous
/// row blocks, refit on all rows, then hard-thresholded on the standardized
/// coefficients. `seed` is accepted for interface stability; fold
/// construction is deterministic.
pub fn thresholded_lasso_cv(
    problem: &RegressionProblem,
    threshold: f64,
    folds: usize,
    _seed: u64,
) -> Result<CvSelection> {
    let n = problem.n();
    if folds < 2 || n < folds {
        return Err(Error::InvalidData(format!("need 2 <= folds <= n, got folds={folds}, n={n}")));
    }
    let lmax = regression::lambda_max(problem);
    if lmax == 0.0 {
        let fit = regression::lasso_cd(problem, 0.0, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        return Ok(CvSelection { support: SupportSet::empty(), lambda: 0.0, fit });
    }
    let grid = log_grid(lmax, 1e-3 * lmax, CV_GRID_POINTS);
    let mut mse = vec![0.0; grid.len()];
    let raw_row = |i: usize, j: usize| problem.design()[(i, j)] * problem.column_scales()[j];

    for k in 0..folds {
        let lo = k * n / folds;
        let hi = (k + 1) * n / folds;
        let train: Vec<usize> = (0..lo).chain(hi..n).collect();
        let sub = problem.subsample(&train)?;
        let gram = sub.gram();
        for (g, &lam) in grid.iter().enumerate() {
            let (beta, _, _) = gram.lasso(lam, None, DEFAULT_TOL, DEFAULT_MAX_ITER);
            let coef = sub.unscale(&beta);
            let err: f64 = (lo..hi)
                .map(|i| {
                    let pred: f64 = (0..problem.p()).map(|j| raw_row(i, j) * coef[j]).sum();
                    (problem.target()[i] - pred).powi(2)
                })
                .sum();
            mse[g] += err / (hi - lo) as f64 / folds as f64;
        }
    }
    let best = mse
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let lambda = grid[best];
    let fit = regression::lasso_cd(problem, lambda, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let support = SupportSet::from_mask(
        &fit.standardized.iter().map(|b| b.abs() > threshold).collect::<Vec<_>>(),
    );
    Ok(CvSelection { support, lambda, fit })
}

/// Single-shot selection at a fixed `λ` for any path-based estimator.
pub fn fit_at(
    problem: &RegressionProblem,
    config: &EstimatorConfig,
    lambda: f64,
    seed: u64,
) -> Result<CoefficientVector> {
    config.validate()?;
    let p = problem.p();
    let weights = if config.kind.is_adaptive() {
        adaptive_weights(problem, config.gamma, config.ridge_lambda)?
    } else {
        AdaptiveWeights::identity(p)
    };
    let fit = match config.kind {
        EstimatorKind::Lasso | EstimatorKind::AdaptiveLasso => adaptive_lasso(problem, lambda, &weights)?,
        EstimatorKind::RandomisedLasso | EstimatorKind::RandomisedAdaptiveLasso => {
            randomised_adaptive_lasso(problem, lambda, &weights, &sample_beta12(seed, p))?
        }
        EstimatorKind::ThresholdedLassoCv => {
            return Ok(thresholded_lasso_cv(problem, config.threshold, config.cv_folds, seed)?.fit.coefficients)
        }
    };
    Ok(fit.coefficients)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::lasso_cd;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_problem(n: usize, p: usize, seed: u64) -> RegressionProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
        let y = DVector::from_fn(n, |i, _| x[(i, 0)] - 0.5 * x[(i, 1)] + 0.1 * rng.gen_range(-1.0..1.0));
        RegressionProblem::standardize(&x, &y).unwrap()
    }

    #[test]
    fn weights_from_formula() {
        let w = AdaptiveWeights::from_estimate(&[2.0, 1.0, 0.5], 2.0).unwrap();
        assert_relative_eq!(w.weights[0], 0.25);
        assert_relative_eq!(w.weights[1], 1.0);
        assert_relative_eq!(w.weights[2], 4.0);
        assert!(w.capped.iter().all(|c| !c));
    }

    #[test]
    fn zero_estimate_is_capped() {
        let w = AdaptiveWeights::from_estimate(&[0.0, 1.0], 2.0).unwrap();
        assert!(w.capped[0]);
        assert_relative_eq!(w.weights[0], 1.0 / (WEIGHT_FLOOR * WEIGHT_FLOOR), max_relative = 1e-12);
        assert!(AdaptiveWeights::from_estimate(&[1.0], 0.5).is_err());
    }

    #[test]
    fn identity_weights_reproduce_lasso() {
        let prob = random_problem(40, 5, 1);
        let a = adaptive_lasso(&prob, 0.05, &AdaptiveWeights::identity(5)).unwrap();
        let b = lasso_cd(&prob, 0.05, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(a.coefficients, b.coefficients);
    }

    #[test]
    fn huge_weight_excludes_column() {
        let prob = random_problem(40, 5, 2);
        let mut w = AdaptiveWeights::identity(5);
        w.weights[0] = 1e12;
        for lam in [2e-6, 1e-3, 0.1] {
            let fit = adaptive_lasso(&prob, lam, &w).unwrap();
            assert_eq!(fit.coefficients[0], 0.0);
        }
    }

    #[test]
    fn adaptive_equals_lasso_on_transformed_design() {
        let prob = random_problem(60, 6, 3);
        let w = adaptive_weights(&prob, 2.0, 1e-3).unwrap();
        let lam = 0.01;
        let fit = adaptive_lasso(&prob, lam, &w).unwrap();

        let f = w.factors();
        let xt = DMatrix::from_fn(60, 6, |i, j| prob.design()[(i, j)] * f[j]);
        let n = 60.0;
        let g = xt.transpose() * &xt / n;
        let c = xt.transpose() * prob.target() / n;
        let gram = Gram { matrix: g, xty: c, yty: 0.0 };
        let (bt, conv, _) = gram.lasso(lam, None, 1e-12, 100_000);
        assert!(conv);
        for j in 0..6 {
            assert_eq!(fit.standardized[j] != 0.0, bt[j] != 0.0);
            assert!((fit.standardized[j] - bt[j] * f[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn beta_endpoints() {
        assert_eq!(beta12_inverse_cdf(0.0), SCALE_FLOOR);
        assert_eq!(beta12_inverse_cdf(1.0), 1.0);
    }

    #[test]
    fn beta_sampler_mean() {
        let s = sample_beta12(42, 100_000);
        let mean = s.values.iter().sum::<f64>() / s.values.len() as f64;
        assert!((mean - 1.0 / 3.0).abs() < 0.01);
        assert!(s.values.iter().all(|v| *v >= SCALE_FLOOR && *v <= 1.0));
        assert_eq!(s, sample_beta12(42, 100_000));
    }

    #[test]
    fn unit_scales_reduce_to_adaptive() {
        let prob = random_problem(40, 5, 4);
        let w = adaptive_weights(&prob, 2.0, 1e-3).unwrap();
        let ones = RandomPenaltyScales { values: vec![1.0; 5], seed: 0 };
        let a = randomised_adaptive_lasso(&prob, 0.01, &w, &ones).unwrap();
        let b = adaptive_lasso(&prob, 0.01, &w).unwrap();
        assert_eq!(a.coefficients, b.coefficients);
    }

    #[test]
    fn tiny_scale_excludes_column() {
        let prob = random_problem(40, 5, 5);
        let w = AdaptiveWeights::identity(5);
        let mut s = RandomPenaltyScales { values: vec![1.0; 5], seed: 0 };
        s.values[0] = SCALE_FLOOR;
        let fit = randomised_adaptive_lasso(&prob, 1e-3, &w, &s).unwrap();
        assert_eq!(fit.coefficients[0], 0.0);
    }

    #[test]
    fn randomised_replay_is_bit_identical() {
        let prob = random_problem(40, 5, 6);
        let cfg = EstimatorConfig::default();
        let a = fit_at(&prob, &cfg, 0.01, 77).unwrap();
        let b = fit_at(&prob, &cfg, 0.01, 77).unwrap();
        assert_eq!(
            a.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    /// Brute-force check of the scaled-penalty formulation on 4×3 problems:
    /// the solution from scaled columns must satisfy the subgradient
    /// conditions of `(1/2n)‖y−Xβ‖² + λ Σ |β_i|/W_i` directly.
    #[test]
    fn scaled_columns_solve_divided_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for trial in 0..20 {
            let x = DMatrix::from_fn(4, 3, |_, _| rng.gen_range(-1.0..1.0));
            let y = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let prob = RegressionProblem::standardize(&x, &y).unwrap();
            let s = sample_beta12(trial, 3);
            let lam = 0.05;
            let fit = randomised_adaptive_lasso(&prob, lam, &AdaptiveWeights::identity(3), &s).unwrap();
            let b = &fit.standardized;
            let r = prob.target() - prob.design() * b;
            for j in 0..3 {
                let corr = prob.design().column(j).dot(&r) / 4.0;
                let pen = lam / s.values[j];
                if b[j] == 0.0 {
                    assert!(corr.abs() <= pen * (1.0 + 1e-6) + 1e-7, "trial {trial} col {j}");
                } else {
                    assert!((corr - pen * b[j].signum()).abs() <= 1e-6 * pen.max(1.0), "trial {trial} col {j}");
                }
            }
        }
    }

    #[test]
    fn cv_recovers_orthogonal_noiseless() {
        // orthogonal ±1 columns, y = 2·x1
        let n = 40;
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => if i % 2 == 0 { 1.0 } else { -1.0 },
            1 => if (i / 2) % 2 == 0 { 1.0 } else { -1.0 },
            _ => if (i / 4) % 2 == 0 { 1.0 } else { -1.0 },
        });
        let y = DVector::from_fn(n, |i, _| 2.0 * x[(i, 1)]);
        let prob = RegressionProblem::standardize(&x, &y).unwrap();
        let sel = thresholded_lasso_cv(&prob, 0.1, 5, 0).unwrap();
        assert_eq!(sel.support.indices(), &[1]);
    }

    #[test]
    fn cv_on_pure_noise_selects_little() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 200;
        let x = DMatrix::from_fn(n, 10, |_, _| rng.gen_range(-1.0..1.0));
        let y = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let prob = RegressionProblem::standardize(&x, &y).unwrap();
        let sel = thresholded_lasso_cv(&prob, 0.1, 5, 0).unwrap();
        assert!(sel.support.len() <= 1, "selected {:?}", sel.support);
    }

    #[test]
    fn cv_rejects_bad_folds() {
        let prob = random_problem(3, 2, 0);
        assert!(thresholded_lasso_cv(&prob, 0.1, 1, 0).is_err());
        assert!(thresholded_lasso_cv(&prob, 0.1, 5, 0).is_err());
    }
}
