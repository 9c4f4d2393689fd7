//! Dense regression primitives: column standardization, Ridge, and Lasso by
//! cyclic coordinate descent.
//!
//! All solvers work on the standardized design, where every nonzero column
//! satisfies `(1/n)·‖col‖² = 1`, and report coefficients back in the original
//! column units through [`RegressionProblem::column_scales`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// A standardized least-squares problem `y ≈ Θ·ξ`.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    design: DMatrix<f64>,
    target: DVector<f64>,
    column_scales: DVector<f64>,
}

/// Coefficients in original (unstandardized) column units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefficientVector(pub Vec<f64>);

impl CoefficientVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Indices of nonzero entries, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<usize> for CoefficientVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Result of a Lasso solve.
#[derive(Debug, Clone)]
pub struct LassoFit {
    /// Coefficients in original column units.
    pub coefficients: CoefficientVector,
    /// Coefficients in standardized units.
    pub standardized: DVector<f64>,
    pub converged: bool,
    pub sweeps: usize,
}

impl LassoFit {
    pub fn support(&self) -> Vec<usize> {
        self.coefficients.support()
    }
}

impl RegressionProblem {
    /// Rescales every column to `(1/n)·‖col‖² = 1`. Identically zero columns
    /// keep scale 1 and stay zero. The target is left untouched.
    pub fn standardize(raw_design: &DMatrix<f64>, raw_target: &DVector<f64>) -> Result<Self> {
        let (n, p) = raw_design.shape();
        if n == 0 {
            return Err(Error::InvalidData("design has no rows".into()));
        }
        if p == 0 {
            return Err(Error::InvalidData("design has no columns".into()));
        }
        if raw_target.len() != n {
            return Err(Error::InvalidData(format!(
                "target length {} does not match {} design rows",
                raw_target.len(),
                n
            )));
        }
        if raw_design.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("design contains non-finite entries".into()));
        }
        if raw_target.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("target contains non-finite entries".into()));
        }

        let mut design = raw_design.clone();
        let mut scales = DVector::from_element(p, 1.0);
        for (j, mut col) in design.column_iter_mut().enumerate() {
            let ms = col.norm_squared() / n as f64;
            if ms > 0.0 {
                let s = ms.sqrt();
                col /= s;
                scales[j] = s;
            }
        }
        Ok(Self {
            design,
            target: raw_target.clone(),
            column_scales: scales,
        })
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn column_scales(&self) -> &DVector<f64> {
        &self.column_scales
    }

    /// Maps standardized-unit coefficients back to original column units.
    pub fn unscale(&self, standardized: &DVector<f64>) -> CoefficientVector {
        CoefficientVector(
            standardized
                .iter()
                .zip(self.column_scales.iter())
                .map(|(b, s)| b / s)
                .collect(),
        )
    }

    /// Restricts the problem to a subset of rows, re-standardizing from the
    /// original units.
    pub fn subsample(&self, rows: &[usize]) -> Result<Self> {
        let p = self.p();
        let raw = DMatrix::from_fn(rows.len(), p, |i, j| {
            self.design[(rows[i], j)] * self.column_scales[j]
        });
        let y = DVector::from_fn(rows.len(), |i, _| self.target[rows[i]]);
        Self::standardize(&raw, &y)
    }

    /// `(1/n)ΘᵀΘ` and `(1/n)Θᵀy` for the standardized design.
    pub fn gram(&self) -> Gram {
        let n = self.n() as f64;
        let xt = self.design.transpose();
        Gram {
            matrix: &xt * &self.design / n,
            xty: self.design.tr_mul(&self.target) / n,
            yty: self.target.norm_squared() / n,
        }
    }
}

/// Sufficient statistics of a standardized problem. Coordinate descent runs on
/// these, so a problem with many rows is only touched once.
#[derive(Debug, Clone)]
pub struct Gram {
    pub matrix: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
}

impl Gram {
    pub fn p(&self) -> usize {
        self.xty.len()
    }

    /// Largest `|Θ̃_jᵀy|/n` over the design with columns multiplied by `factors`.
    pub fn lambda_max(&self, factors: Option<&[f64]>) -> f64 {
        (0..self.p())
            .map(|j| (self.xty[j] * factors.map_or(1.0, |f| f[j])).abs())
            .fold(0.0, f64::max)
    }

    /// Cyclic coordinate descent on `(1/2n)‖y − Θ̃β‖² + λ‖β‖₁`, where column
    /// `j` of `Θ̃` is `factors[j]·Θ_j`. Returns `β` in the factored coordinates.
    pub fn lasso(
        &self,
        lambda: f64,
        factors: Option<&[f64]>,
        tol: f64,
        max_iter: usize,
    ) -> (DVector<f64>, bool, usize) {
        let p = self.p();
        let f = |j: usize| factors.map_or(1.0, |f| f[j]);
        let diag: Vec<f64> = (0..p).map(|j| self.matrix[(j, j)] * f(j) * f(j)).collect();
        let c: Vec<f64> = (0..p).map(|j| self.xty[j] * f(j)).collect();

        let mut beta = DVector::zeros(p);
        // g = G̃β, kept in sync with every coordinate update
        let mut g = vec![0.0; p];
        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < max_iter {
            sweeps += 1;
            let mut max_delta: f64 = 0.0;
            for j in 0..p {
                if diag[j] <= 0.0 {
                    continue;
                }
                let old = beta[j];
                let rho = c[j] - g[j] + diag[j] * old;
                let new = soft_threshold(rho, lambda) / diag[j];
                let delta = new - old;
                if delta != 0.0 {
                    beta[j] = new;
                    let fj = f(j);
                    for k in 0..p {
                        g[k] += self.matrix[(k, j)] * f(k) * fj * delta;
                    }
                    max_delta = max_delta.max(delta.abs());
                }
            }
            if max_delta < tol {
                converged = true;
                break;
            }
        }
        (beta, converged, sweeps)
    }

    /// Solves `(G + λI)β = c` by Cholesky.
    pub fn ridge(&self, lambda: f64) -> Result<DVector<f64>> {
        let p = self.p();
        let a = &self.matrix + DMatrix::identity(p, p) * lambda;
        let chol = a.cholesky().ok_or_else(|| {
            Error::SingularSystem(format!("ridge normal equations not positive definite (lambda={lambda})"))
        })?;
        let sol = chol.solve(&self.xty);
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem("ridge solution is not finite".into()));
        }
        Ok(sol)
    }
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Ridge estimate `argmin (1/2n)‖y−Θξ‖² + (λ/2)‖ξ‖²` on the standardized
/// design, returned in original units.
pub fn ridge(problem: &RegressionProblem, lambda_ridge: f64) -> Result<CoefficientVector> {
    Ok(problem.unscale(&ridge_standardized(problem, lambda_ridge)?))
}

pub fn ridge_standardized(problem: &RegressionProblem, lambda_ridge: f64) -> Result<DVector<f64>> {
    if !(lambda_ridge >= 0.0) {
        return Err(Error::InvalidData(format!("ridge lambda must be >= 0, got {lambda_ridge}")));
    }
    problem.gram().ridge(lambda_ridge)
}

pub fn lambda_max(problem: &RegressionProblem) -> f64 {
    let n = problem.n() as f64;
    let xty = problem.design().tr_mul(problem.target()) / n;
    xty.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Lasso by cyclic coordinate descent in ascending column order. Hitting
/// `max_iter` is reported through [`LassoFit::converged`], not as an error.
pub fn lasso_cd(problem: &RegressionProblem, lambda: f64, tol: f64, max_iter: usize) -> Result<LassoFit> {
    if !(tol > 0.0) {
        return Err(Error::InvalidData(format!("tolerance must be positive, got {tol}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidData(format!("lambda must be >= 0, got {lambda}")));
    }
    let (beta, converged, sweeps) = problem.gram().lasso(lambda, None, tol, max_iter);
    if !converged {
        log::warn!("lasso did not converge in {max_iter} sweeps (lambda={lambda:e})");
    }
    Ok(LassoFit {
        coefficients: problem.unscale(&beta),
        standardized: beta,
        converged,
        sweeps,
    })
}

/// `(1/2n)‖y − Θβ‖² + λ‖β‖₁` in standardized units.
pub fn lasso_objective(problem: &RegressionProblem, beta: &DVector<f64>, lambda: f64) -> f64 {
    let r = problem.target() - problem.design() * beta;
    r.norm_squared() / (2.0 * problem.n() as f64) + lambda * beta.lp_norm(1)
}
