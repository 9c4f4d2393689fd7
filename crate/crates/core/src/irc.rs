//! Irrepresentability diagnostics.
//!
//! For a candidate support `T` with complement `F`, each irrelevant column
//! `Θ_{F,j}` is projected onto `span(Θ_T)` by least squares. The ℓ₁ norm of the
//! projection coefficients measures how well the column is "represented" by
//! the relevant ones; `Δ` is the largest such norm. `Δ < 1` is the Lasso's
//! irrepresentable condition.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::AdaptiveWeights;
use crate::regression::RegressionProblem;
use crate::support::SupportSet;

const RANK_RIDGE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrcReport {
    pub delta: f64,
    /// Columns of `F`, in ascending order.
    pub irrelevant: Vec<usize>,
    /// Projection ℓ₁ norm for each entry of `irrelevant`.
    pub per_column_l1: Vec<f64>,
    pub argmax_column: usize,
    /// `1 − Δ`; nonpositive when the condition is violated.
    pub eta: f64,
    /// Set when `Θ_TᵀΘ_T` needed a ridge to factorize.
    pub conditioning_warning: bool,
}

impl IrcReport {
    pub fn satisfied(&self) -> bool {
        self.delta < 1.0
    }

    pub fn verdict(&self) -> &'static str {
        if self.satisfied() {
            "IRC satisfied"
        } else {
            "IRC violated"
        }
    }
}

/// `Δ(Θ, T)` on an arbitrary design matrix.
pub fn irc_delta_design(design: &DMatrix<f64>, support: &SupportSet) -> Result<IrcReport> {
    let p = design.ncols();
    if support.is_empty() {
        return Err(Error::InvalidSupport("support is empty".into()));
    }
    let support = SupportSet::new(support.indices().iter().copied(), p)?;
    let irrelevant = support.complement(p);
    if irrelevant.is_empty() {
        return Err(Error::InvalidSupport("support covers every column".into()));
    }
    let n = design.nrows() as f64;
    let theta_t = design.select_columns(support.indices());
    let theta_f = design.select_columns(&irrelevant);
    let gram = theta_t.transpose() * &theta_t / n;
    let cross = theta_t.transpose() * &theta_f / n;

    let k = gram.nrows();
    let (coefs, warn) = match gram.clone().cholesky() {
        Some(ch) if well_conditioned(&ch.l()) => (ch.solve(&cross), false),
        _ => {
            log::warn!("relevant columns are rank deficient; adding a {RANK_RIDGE:e} ridge");
            let ch = (gram + DMatrix::identity(k, k) * RANK_RIDGE)
                .cholesky()
                .ok_or_else(|| Error::SingularSystem("relevant columns cannot be factorized".into()))?;
            (ch.solve(&cross), true)
        }
    };
    if coefs.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("projection coefficients are not finite".into()));
    }

    let per_column_l1: Vec<f64> = coefs.column_iter().map(|c| c.lp_norm(1)).collect();
    let (arg, delta) = per_column_l1
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    Ok(IrcReport {
        delta,
        argmax_column: irrelevant[arg],
        irrelevant,
        per_column_l1,
        eta: 1.0 - delta,
        conditioning_warning: warn,
    })
}

fn well_conditioned(l: &DMatrix<f64>) -> bool {
    let d: Vec<f64> = l.diagonal().iter().map(|v| v.abs()).collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    // squared ratio of Cholesky pivots bounds the condition number from below
    max > 0.0 && (min / max).powi(2) > 1e-14
}

/// `Δ` on the standardized design of `problem`.
pub fn irc_delta(problem: &RegressionProblem, support: &SupportSet) -> Result<IrcReport> {
    irc_delta_design(problem.design(), support)
}

/// `Δ` on the standardized design with column `i` divided by `ŵ_i`.
pub fn irc_delta_adaptive(
    problem: &RegressionProblem,
    support: &SupportSet,
    weights: &AdaptiveWeights,
) -> Result<IrcReport> {
    if weights.p() != problem.p() {
        return Err(Error::InvalidData("weights do not match the problem".into()));
    }
    irc_delta_design(&adaptive_design(problem.design(), weights), support)
}

pub fn adaptive_design(design: &DMatrix<f64>, weights: &AdaptiveWeights) -> DMatrix<f64> {
    let f = DVector::from_vec(weights.factors());
    let mut out = design.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= f[j];
    }
    out
}

/// Pearson correlation matrix of the columns (zero-variance columns give 0).
pub fn correlation_matrix(design: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = design.shape();
    let mut centered = design.clone();
    let mut sd = vec![0.0; p];
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        sd[j] = col.norm();
    }
    let cov = centered.transpose() * &centered;
    DMatrix::from_fn(p, p, |i, j| {
        if sd[i] > 0.0 && sd[j] > 0.0 {
            cov[(i, j)] / (sd[i] * sd[j])
        } else {
            0.0
        }
    })
}
