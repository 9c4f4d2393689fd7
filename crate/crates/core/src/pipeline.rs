//! Library → stability selection → mask → Ridge refit → report.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{adaptive_weights, thresholded_lasso_cv, EstimatorConfig, EstimatorKind};
use crate::irc::{irc_delta, irc_delta_adaptive, irc_delta_design, IrcReport};
use crate::library::{LibraryMeta, TermLibrary};
use crate::regression::{CoefficientVector, RegressionProblem};
use crate::stability::{run_stability, StabilityConfig, StabilityReport, StabilitySummary};
use crate::support::SupportSet;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_REFIT_RIDGE: f64 = 1e-6;
/// Ridge used for the initial estimate behind the adaptive `Δ` diagnostic.
pub const DIAGNOSTIC_RIDGE: f64 = 1e-10;
const SIGNIFICANT_DIGITS: usize = 6;

/// `bits[i]` is set iff term `i` is in the stable set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mask {
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn from_support(support: &SupportSet, p: usize) -> Self {
        Self { bits: support.to_mask(p) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaPair {
    /// Column scaling under which `raw` and `adaptive` were computed.
    pub scaling: String,
    pub raw: IrcReport,
    pub adaptive: IrcReport,
    /// `Δ` on the library columns as given, before standardization.
    pub unscaled: IrcReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub estimator: EstimatorConfig,
    pub stability: StabilityConfig,
    pub refit_ridge_lambda: f64,
    pub diagnostic_ridge_lambda: f64,
}

#[derive(Debug, Clone)]
pub struct DiscoveryResult {
    pub terms: Vec<String>,
    pub stable_set: SupportSet,
    pub mask: Mask,
    pub coefficients: CoefficientVector,
    pub delta: Option<DeltaPair>,
    /// Absent for the cross-validated baseline.
    pub stability: Option<StabilityReport>,
    pub config: RunConfig,
    pub equation: String,
    pub warnings: Vec<String>,
    pub library: LibraryMeta,
}

/// Serialized form of [`DiscoveryResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema: u32,
    pub equation: String,
    pub stable_set: SupportSet,
    pub stable_terms: Vec<String>,
    pub mask: Mask,
    pub coefficients: CoefficientVector,
    pub terms: Vec<String>,
    pub delta: Option<DeltaPair>,
    pub stability: Option<StabilitySummary>,
    pub config: RunConfig,
    pub library: LibraryMeta,
    pub warnings: Vec<String>,
}

impl DiscoveryResult {
    pub fn support_names(&self) -> Vec<String> {
        self.stable_set.indices().iter().map(|k| self.terms[*k].clone()).collect()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.terms.iter().position(|t| t == name).map(|k| self.coefficients[k])
    }

    pub fn document(&self) -> ResultDocument {
        ResultDocument {
            schema: SCHEMA_VERSION,
            equation: self.equation.clone(),
            stable_set: self.stable_set.clone(),
            stable_terms: self.support_names(),
            mask: self.mask.clone(),
            coefficients: self.coefficients.clone(),
            terms: self.terms.clone(),
            delta: self.delta.clone(),
            stability: self.stability.as_ref().map(|s| s.summary(&self.terms)),
            config: self.config.clone(),
            library: self.library.clone(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.document())? + "\n")
    }

    /// `result.json`, `library_meta.json` and, when available, the stability CSVs.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("result.json"), self.to_json()?)?;
        fs::write(dir.join("library_meta.json"), serde_json::to_string_pretty(&self.library)? + "\n")?;
        if let Some(s) = &self.stability {
            s.write_paths_csv(&dir.join("stability_paths.csv"), &self.terms)?;
            s.write_error_bound_csv(&dir.join("error_bound.csv"))?;
        }
        Ok(())
    }
}

/// Ridge on the masked standardized columns, reported in original units and
/// zero off the mask.
pub fn masked_ridge(problem: &RegressionProblem, support: &SupportSet, lambda: f64) -> Result<CoefficientVector> {
    let p = problem.p();
    let mut standardized = DVector::zeros(p);
    if !support.is_empty() {
        let idx = support.indices();
        let x = problem.design().select_columns(idx);
        let n = problem.n() as f64;
        let k = idx.len();
        let a = x.transpose() * &x / n + DMatrix::identity(k, k) * lambda;
        let c = x.transpose() * problem.target() / n;
        let sol = a
            .cholesky()
            .ok_or_else(|| Error::SingularSystem("masked ridge system is not positive definite".into()))?
            .solve(&c);
        for (s, j) in idx.iter().enumerate() {
            standardized[*j] = sol[s];
        }
    }
    Ok(problem.unscale(&standardized))
}

/// Raw and adaptive `Δ` of `support`, the latter with weights from a Ridge
/// estimate at `ridge_lambda`.
pub fn diagnose(library: &TermLibrary, support: &SupportSet, gamma: f64, ridge_lambda: f64) -> Result<DeltaPair> {
    let problem = library.problem()?;
    delta_pair(&problem, support, gamma, ridge_lambda)
}

fn delta_pair(problem: &RegressionProblem, support: &SupportSet, gamma: f64, ridge_lambda: f64) -> Result<DeltaPair> {
    let raw = irc_delta(problem, support)?;
    let weights = adaptive_weights(problem, gamma, ridge_lambda)?;
    let adaptive = irc_delta_adaptive(problem, support, &weights)?;
    let mut original = problem.design().clone();
    for (j, mut col) in original.column_iter_mut().enumerate() {
        col *= problem.column_scales()[j];
    }
    let unscaled = irc_delta_design(&original, support)?;
    Ok(DeltaPair { scaling: "unit mean square".into(), raw, adaptive, unscaled })
}

pub fn discover(
    library: &TermLibrary,
    estimator: &EstimatorConfig,
    stability: &StabilityConfig,
    refit_ridge_lambda: f64,
) -> Result<DiscoveryResult> {
    let problem = library.problem()?;
    let p = problem.p();
    let mut warnings = Vec::new();

    let (stable_set, report) = if estimator.kind == EstimatorKind::ThresholdedLassoCv {
        let cv = thresholded_lasso_cv(&problem, estimator.threshold, estimator.cv_folds, stability.seed)?;
        (cv.support, None)
    } else {
        let report = run_stability(&problem, estimator, stability)?;
        if report.lambda_star_is_empty() {
            warnings.push(format!(
                "no valid region: raise ev_max to at least {:.3}",
                report.min_ev_max()
            ));
        }
        (report.stable_set.clone(), Some(report))
    };
    if stable_set.is_empty() {
        warnings.push("empty stable set".into());
        log::warn!("stable set is empty");
    }

    let coefficients = masked_ridge(&problem, &stable_set, refit_ridge_lambda)?;
    let delta = if stable_set.is_empty() || stable_set.len() == p {
        None
    } else {
        match delta_pair(&problem, &stable_set, estimator.gamma, DIAGNOSTIC_RIDGE) {
            Ok(d) => Some(d),
            Err(e) => {
                warnings.push(format!("delta diagnostics unavailable: {e}"));
                None
            }
        }
    };
    let terms = library.names();
    let equation = render_equation(
        stable_set.indices().iter().map(|k| (terms[*k].as_str(), coefficients[*k])),
    );
    Ok(DiscoveryResult {
        mask: Mask::from_support(&stable_set, p),
        terms,
        stable_set,
        coefficients,
        delta,
        stability: report,
        config: RunConfig {
            estimator: estimator.clone(),
            stability: stability.clone(),
            refit_ridge_lambda,
            diagnostic_ridge_lambda: DIAGNOSTIC_RIDGE,
        },
        equation,
        warnings,
        library: library.meta(),
    })
}

/// Six significant digits, plain notation for moderate magnitudes.
pub fn format_coefficient(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e6).contains(&a) {
        return format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    }
    let int_digits = if a >= 1.0 { a.log10().floor() as usize + 1 } else { 0 };
    let lead_zeros = if a > 0.0 && a < 1.0 { (-a.log10()).floor() as usize } else { 0 };
    let decimals = SIGNIFICANT_DIGITS.saturating_sub(int_digits) + lead_zeros;
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// `u_t = c₁·t₁ + c₂·t₂ …`, or `u_t = 0` when there are no terms.
pub fn render_equation<'a>(terms: impl IntoIterator<Item = (&'a str, f64)>) -> String {
    let mut out = String::from("u_t =");
    let mut first = true;
    for (name, c) in terms {
        let mag = format_coefficient(c.abs());
        let neg = c.is_sign_negative() && mag != "0";
        match (first, neg) {
            (true, false) => out.push_str(&format!(" {mag}·{name}")),
            (true, true) => out.push_str(&format!(" -{mag}·{name}")),
            (false, false) => out.push_str(&format!(" + {mag}·{name}")),
            (false, true) => out.push_str(&format!(" - {mag}·{name}")),
        }
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
    out
}

/// Inverse of [`render_equation`].
pub fn parse_equation(s: &str) -> Result<Vec<(String, f64)>> {
    let bad = |reason: &str| Error::Parse { line: 1, reason: reason.to_string() };
    let rhs = s.trim().strip_prefix("u_t =").ok_or_else(|| bad("missing \"u_t =\""))?.trim();
    if rhs == "0" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut sign = 1.0;
    let mut rest = rhs;
    if let Some(r) = rest.strip_prefix('-') {
        sign = -1.0;
        rest = r;
    }
    loop {
        let next = [" + ", " - "].iter().filter_map(|sep| rest.find(sep).map(|i| (i, *sep))).min();
        let (term, tail) = match next {
            Some((i, sep)) => (&rest[..i], Some((&rest[i + 3..], if sep == " - " { -1.0 } else { 1.0 }))),
            None => (rest, None),
        };
        let (coef, name) = term.split_once('·').ok_or_else(|| bad(&format!("term {term:?} lacks '·'")))?;
        let c: f64 = coef.trim().parse().map_err(|_| bad(&format!("bad coefficient {coef:?}")))?;
        out.push((name.trim().to_string(), sign * c));
        match tail {
            Some((t, sg)) => {
                rest = t;
                sign = sg;
            }
            None => break,
        }
    }
    Ok(out)
}
