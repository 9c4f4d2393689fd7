//! Named benchmark setups shared by the CLI and the test suites.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datasets::{
    add_noise, sample_analytic, solve_newell_whitehead, AnalyticSolution, FieldGrid, GridSpec, NoiseSpec, NwParams,
};
use crate::error::Result;
use crate::estimators::{adaptive_weights, log_grid, AdaptiveWeights, DEFAULT_GAMMA, DEFAULT_RIDGE_LAMBDA};
use crate::library::{build_library_analytic, build_library_numeric, enumerate_terms, TermLibrary, DEFAULT_POLY_DEGREE, DEFAULT_WINDOW};
use crate::pipeline::{diagnose, DeltaPair, DIAGNOSTIC_RIDGE};
use crate::regression::{RegressionProblem, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::support::SupportSet;

/// Noise levels swept by the end-to-end suite, as fractions.
pub const NOISE_SWEEP: [f64; 5] = [0.0, 0.01, 0.05, 0.10, 0.20];

pub const PATH_POINTS: usize = 50;
pub const PATH_EPS: f64 = 1e-3;

/// Grid for numerical Burgers discovery: wide enough that the pulse and its
/// tails are resolved away from the trimmed boundary.
pub fn burgers_discovery_grid() -> GridSpec {
    GridSpec::new(256, (-10.0, 10.0), 101, (0.5, 5.0))
}

/// 12-term KdV library from exact derivatives.
pub fn kdv_library() -> Result<TermLibrary> {
    build_library_analytic(&AnalyticSolution::kdv_two_soliton(), &GridSpec::kdv(), &enumerate_terms(2, 3))
}

pub fn kdv_true_support(lib: &TermLibrary) -> Result<SupportSet> {
    SupportSet::new(lib.indices_of(&["uu_x", "u_xxx"])?, lib.p())
}

pub fn noisy(field: &FieldGrid, alpha: f64, noise_seed: u64) -> Result<FieldGrid> {
    add_noise(field, NoiseSpec { alpha, seed: noise_seed })
}

/// 36-term library of a noisy Burgers field by numerical differentiation.
pub fn burgers_numeric_library(grid: &GridSpec, alpha: f64, noise_seed: u64) -> Result<(FieldGrid, TermLibrary)> {
    let field = noisy(&sample_analytic(&AnalyticSolution::burgers(), grid)?, alpha, noise_seed)?;
    let lib = build_library_numeric(&field, &enumerate_terms(5, 5), DEFAULT_POLY_DEGREE, DEFAULT_WINDOW)?;
    Ok((field, lib))
}

/// 36-term library of a noisy Newell-Whitehead field.
pub fn newell_whitehead_library(grid: &GridSpec, alpha: f64, noise_seed: u64) -> Result<(FieldGrid, TermLibrary)> {
    let field = noisy(&solve_newell_whitehead(grid, &NwParams::default())?, alpha, noise_seed)?;
    let lib = build_library_numeric(&field, &enumerate_terms(5, 5), DEFAULT_POLY_DEGREE, DEFAULT_WINDOW)?;
    Ok((field, lib))
}

/// Coefficients along a descending `λ` grid for one set of penalty weights.
#[derive(Debug, Clone)]
pub struct PathReport {
    pub lambdas: Vec<f64>,
    /// Original-unit coefficients, one vector per `λ`.
    pub coefficients: Vec<Vec<f64>>,
}

impl PathReport {
    pub fn active_sets(&self) -> Vec<SupportSet> {
        self.coefficients
            .iter()
            .map(|c| SupportSet::from_mask(&c.iter().map(|v| *v != 0.0).collect::<Vec<_>>()))
            .collect()
    }

    /// Rows `[lambda, <one column per term>]`.
    pub fn write_csv(&self, path: &Path, names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(std::iter::once("lambda".to_string()).chain(names.iter().cloned()))?;
        for (lam, c) in self.lambdas.iter().zip(&self.coefficients) {
            w.write_record(std::iter::once(format!("{lam:e}")).chain(c.iter().map(|v| format!("{v:e}"))))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Weighted Lasso path on `[eps·λ_max, λ_max]` with its own `λ_max`.
pub fn weighted_path(problem: &RegressionProblem, weights: &AdaptiveWeights, points: usize, eps: f64) -> PathReport {
    let gram = problem.gram();
    let f = weights.factors();
    let lmax = gram.lambda_max(Some(&f));
    let lambdas = log_grid(lmax, eps * lmax, points);
    let coefficients = lambdas
        .iter()
        .map(|lam| {
            let (beta, _, _) = gram.lasso(*lam, Some(&f), DEFAULT_TOL, DEFAULT_MAX_ITER);
            let std = nalgebra::DVector::from_iterator(beta.len(), beta.iter().zip(&f).map(|(b, w)| b * w));
            problem.unscale(&std).0
        })
        .collect();
    PathReport { lambdas, coefficients }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fig1Summary {
    pub support: Vec<String>,
    pub delta: DeltaPair,
    pub lasso_hits: usize,
    pub adaptive_hits: usize,
    pub points: usize,
}

/// Lasso and adaptive Lasso paths on the KdV library plus the `Δ` pair of the
/// true support.
pub fn kdv_fig1() -> Result<(TermLibrary, PathReport, PathReport, Fig1Summary)> {
    let lib = kdv_library()?;
    let problem = lib.problem()?;
    let truth = kdv_true_support(&lib)?;
    let lasso = weighted_path(&problem, &AdaptiveWeights::identity(lib.p()), PATH_POINTS, PATH_EPS);
    let weights = adaptive_weights(&problem, DEFAULT_GAMMA, DEFAULT_RIDGE_LAMBDA)?;
    let ada = weighted_path(&problem, &weights, PATH_POINTS, PATH_EPS);
    let delta = diagnose(&lib, &truth, DEFAULT_GAMMA, DIAGNOSTIC_RIDGE)?;
    let hits = |p: &PathReport| p.active_sets().iter().filter(|s| **s == truth).count();
    let summary = Fig1Summary {
        support: truth.indices().iter().map(|k| lib.terms[*k].name.clone()).collect(),
        delta,
        lasso_hits: hits(&lasso),
        adaptive_hits: hits(&ada),
        points: PATH_POINTS,
    };
    Ok((lib, lasso, ada, summary))
}
