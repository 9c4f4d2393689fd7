//! Candidate-term libraries `Θ` with columns `u^a · ∂ˣ^b u` and the target `u_t`.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datasets::{AnalyticSolution, FieldGrid, GridSpec, MAX_JET_ORDER};
use crate::error::{Error, Result};
use crate::regression::RegressionProblem;

pub const DEFAULT_POLY_DEGREE: usize = 5;
pub const DEFAULT_WINDOW: usize = 11;
pub const UT_COLUMN: &str = "u_t";

/// Condition number above which a local polynomial fit drops a degree.
const FIT_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermSpec {
    pub name: String,
    /// `None` for ingested columns whose structure is unknown.
    pub poly_power: Option<usize>,
    pub deriv_order: Option<usize>,
}

impl TermSpec {
    pub fn new(poly_power: usize, deriv_order: usize) -> Self {
        Self { name: term_name(poly_power, deriv_order), poly_power: Some(poly_power), deriv_order: Some(deriv_order) }
    }

    pub fn label(name: impl Into<String>) -> Self {
        Self { name: name.into(), poly_power: None, deriv_order: None }
    }
}

/// `"1"`, `"u_xx"`, `"u"`, `"uu_x"`, `"u^3u_xxx"`, …
pub fn term_name(a: usize, b: usize) -> String {
    let poly = match a {
        0 => String::new(),
        1 => "u".to_string(),
        _ => format!("u^{a}"),
    };
    let deriv = if b == 0 { String::new() } else { format!("u_{}", "x".repeat(b)) };
    match (poly.is_empty(), deriv.is_empty()) {
        (true, true) => "1".to_string(),
        _ => poly + &deriv,
    }
}

/// `u^a ∂ˣ^b u` for `a = 0..=max_poly` (outer) and `b = 0..=max_deriv` (inner).
pub fn enumerate_terms(max_poly: usize, max_deriv: usize) -> Vec<TermSpec> {
    (0..=max_poly)
        .flat_map(|a| (0..=max_deriv).map(move |b| TermSpec::new(a, b)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    NumericPoly,
    Ingested,
}

/// Boundary nodes dropped on each side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trim {
    pub x: usize,
    pub t: usize,
}

/// `u` and its x-derivatives at the retained nodes, in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeGrids {
    /// `dx[b]` holds `∂ˣ^b u`; `dx[0]` is `u`.
    pub dx: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermLibrary {
    pub theta: DMatrix<f64>,
    pub u_t: DVector<f64>,
    pub terms: Vec<TermSpec>,
    pub provenance: Provenance,
    pub trim: Trim,
    pub derivatives: Option<DerivativeGrids>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryMeta {
    pub n: usize,
    pub p: usize,
    pub provenance: Provenance,
    pub trim: Trim,
    pub terms: Vec<TermSpec>,
}

impl TermLibrary {
    pub fn new(theta: DMatrix<f64>, u_t: DVector<f64>, terms: Vec<TermSpec>, provenance: Provenance) -> Result<Self> {
        if theta.nrows() != u_t.len() {
            return Err(Error::InvalidData(format!(
                "theta has {} rows but u_t has {}",
                theta.nrows(),
                u_t.len()
            )));
        }
        if theta.ncols() != terms.len() {
            return Err(Error::InvalidData(format!(
                "theta has {} columns but {} term names",
                theta.ncols(),
                terms.len()
            )));
        }
        Ok(Self { theta, u_t, terms, provenance, trim: Trim::default(), derivatives: None })
    }

    pub fn n(&self) -> usize {
        self.theta.nrows()
    }

    pub fn p(&self) -> usize {
        self.theta.ncols()
    }

    pub fn names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.name == name)
    }

    /// Indices of the named terms, failing on any unknown name.
    pub fn indices_of<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|s| {
                self.index_of(s.as_ref())
                    .ok_or_else(|| Error::InvalidSupport(format!("unknown term {:?}", s.as_ref())))
            })
            .collect()
    }

    pub fn problem(&self) -> Result<RegressionProblem> {
        RegressionProblem::standardize(&self.theta, &self.u_t)
    }

    pub fn meta(&self) -> LibraryMeta {
        LibraryMeta { n: self.n(), p: self.p(), provenance: self.provenance, trim: self.trim, terms: self.terms.clone() }
    }

    /// Single CSV with a header of term names and a trailing `u_t` column.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.terms.iter().map(|t| t.name.as_str()).chain(std::iter::once(UT_COLUMN)))?;
        for i in 0..self.n() {
            w.write_record(
                self.theta
                    .row(i)
                    .iter()
                    .chain(std::iter::once(&self.u_t[i]))
                    .map(|v| format!("{v:e}")),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

fn assemble(u: &DVector<f64>, dx: &[DVector<f64>], terms: &[TermSpec]) -> Result<DMatrix<f64>> {
    let n = u.len();
    let mut theta = DMatrix::zeros(n, terms.len());
    for (j, term) in terms.iter().enumerate() {
        let (Some(a), Some(b)) = (term.poly_power, term.deriv_order) else {
            return Err(Error::InvalidData(format!("term {:?} has no structure", term.name)));
        };
        let a = i32::try_from(a).map_err(|_| Error::InvalidData("polynomial power too large".into()))?;
        for i in 0..n {
            let deriv = if b == 0 { 1.0 } else { dx[b][i] };
            theta[(i, j)] = u[i].powi(a) * deriv;
        }
    }
    Ok(theta)
}

fn max_deriv(terms: &[TermSpec]) -> Result<usize> {
    terms.iter().try_fold(0, |acc, t| match t.deriv_order {
        Some(b) => Ok(acc.max(b)),
        None => Err(Error::InvalidData(format!("term {:?} has no derivative order", t.name))),
    })
}

/// Exact library from a closed form. Rows are ordered `i_x · nt + i_t`.
pub fn build_library_analytic(solution: &AnalyticSolution, grid: &GridSpec, terms: &[TermSpec]) -> Result<TermLibrary> {
    grid.validate()?;
    let order = max_deriv(terms)?;
    if order > MAX_JET_ORDER {
        return Err(Error::InvalidData(format!("analytic derivatives are limited to order {MAX_JET_ORDER}")));
    }
    let n = grid.nx * grid.nt;
    let mut dx = vec![DVector::zeros(n); order + 1];
    let mut u_t = DVector::zeros(n);
    for i in 0..grid.nx {
        for j in 0..grid.nt {
            let row = i * grid.nt + j;
            let (d, ut) = solution.derivatives(grid.x(i), grid.t(j), order)?;
            for (b, v) in d.into_iter().enumerate() {
                dx[b][row] = v;
            }
            u_t[row] = ut;
        }
    }
    let theta = assemble(&dx[0], &dx, terms)?;
    let mut lib = TermLibrary::new(theta, u_t, terms.to_vec(), Provenance::Analytic)?;
    lib.derivatives = Some(DerivativeGrids { dx });
    Ok(lib)
}

/// Weights `w_d` such that `Σ_k w_d[k] f(x₀ + k h)` is the `d`-th derivative at
/// `x₀` of the least-squares polynomial through the window.
#[derive(Debug, Clone)]
struct Stencil {
    half: usize,
    degree: usize,
    rows: Vec<Vec<f64>>,
}

impl Stencil {
    fn new(window: usize, degree: usize, max_d: usize, h: f64) -> Result<Self> {
        let half = window / 2;
        let mut deg = degree;
        loop {
            // integer offsets keep the Vandermonde matrix well scaled
            let v = DMatrix::from_fn(window, deg + 1, |r, c| (r as f64 - half as f64).powi(c as i32));
            let svd = v.clone().svd(true, true);
            let sv = &svd.singular_values;
            let cond = sv.max() / sv.min();
            if cond.is_finite() && cond < FIT_CONDITION_LIMIT {
                let pinv = svd
                    .pseudo_inverse(1e-14)
                    .map_err(|e| Error::SingularSystem(format!("local polynomial fit: {e}")))?;
                let mut rows = Vec::with_capacity(max_d + 1);
                let mut fact = 1.0;
                for d in 0..=max_d {
                    if d > 0 {
                        fact *= d as f64;
                    }
                    if d <= deg {
                        let s = fact / h.powi(d as i32);
                        rows.push(pinv.row(d).iter().map(|w| w * s).collect());
                    } else {
                        rows.push(vec![0.0; window]);
                    }
                }
                if deg < max_d {
                    log::warn!("fit degree {deg} is below derivative order {max_d}; higher derivatives are zero");
                }
                return Ok(Self { half, degree: deg, rows });
            }
            if deg == 0 {
                return Err(Error::SingularSystem("local polynomial fit is singular".into()));
            }
            log::warn!("local fit of degree {deg} is ill-conditioned (cond {cond:e}); lowering the degree");
            deg -= 1;
        }
    }

    fn apply(&self, d: usize, samples: impl Iterator<Item = f64>) -> f64 {
        self.rows[d].iter().zip(samples).map(|(w, v)| w * v).sum()
    }
}

/// Library from gridded data by local polynomial differentiation.
///
/// Nodes within half a window of any edge are dropped; rows are ordered
/// `i_x · nt' + i_t` over the retained nodes.
pub fn build_library_numeric(field: &FieldGrid, terms: &[TermSpec], poly_degree: usize, window: usize) -> Result<TermLibrary> {
    field.validate()?;
    if window % 2 == 0 || window < poly_degree + 1 {
        return Err(Error::InvalidData(format!(
            "window must be odd and at least degree + 1 (window {window}, degree {poly_degree})"
        )));
    }
    let (nx, nt) = (field.nx(), field.nt());
    if nx <= window || nt <= window || nx < 5 || nt < 5 {
        return Err(Error::InvalidData(format!("grid {nx}×{nt} is too small for window {window}")));
    }
    let order = max_deriv(terms)?;
    let sx = Stencil::new(window, poly_degree, order, field.dx)?;
    let st = Stencil::new(window, poly_degree, 1, field.dt)?;
    let hw = sx.half;
    let (mx, mt) = (nx - 2 * hw, nt - 2 * hw);
    let n = mx * mt;
    let u = &field.values;

    let mut dx = vec![DVector::zeros(n); order + 1];
    let mut u_t = DVector::zeros(n);
    for i in hw..nx - hw {
        for j in hw..nt - hw {
            let row = (i - hw) * mt + (j - hw);
            dx[0][row] = u[(i, j)];
            for (b, col) in dx.iter_mut().enumerate().skip(1) {
                col[row] = sx.apply(b, (i - hw..=i + hw).map(|k| u[(k, j)]));
            }
            u_t[row] = st.apply(1, (j - hw..=j + hw).map(|k| u[(i, k)]));
        }
    }
    log::debug!("numeric library: fit degrees x={} t={}", sx.degree, st.degree);
    let theta = assemble(&dx[0], &dx, terms)?;
    let mut lib = TermLibrary::new(theta, u_t, terms.to_vec(), Provenance::NumericPoly)?;
    lib.trim = Trim { x: hw, t: hw };
    lib.derivatives = Some(DerivativeGrids { dx });
    Ok(lib)
}

struct Table {
    header: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path)?;
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = cells.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                if let Some(w) = width {
                    if vals.len() != w {
                        return Err(Error::Parse {
                            line: lineno,
                            reason: format!("expected {w} fields, found {}", vals.len()),
                        });
                    }
                }
                width = Some(vals.len());
                rows.push(vals);
            }
            Err(_) if header.is_none() && rows.is_empty() => {
                width = Some(cells.len());
                header = Some(cells.iter().map(|c| c.to_string()).collect());
            }
            Err(_) => {
                let bad = cells.iter().find(|c| c.parse::<f64>().is_err()).unwrap_or(&"");
                return Err(Error::Parse { line: lineno, reason: format!("non-numeric cell {bad:?}") });
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidData(format!("{} has no data rows", path.display())));
    }
    Ok(Table { header, rows })
}

/// Where the target column comes from when ingesting.
#[derive(Debug, Clone)]
pub enum TargetSource<'a> {
    /// Separate single-column file.
    File(&'a Path),
    /// Column of the library file, by header name.
    Named(&'a str),
    Index(usize),
}

/// Loads `Θ` and `u_t` verbatim from CSV.
pub fn ingest_library(theta_path: &Path, target: TargetSource<'_>, names: Option<Vec<String>>) -> Result<TermLibrary> {
    let table = read_table(theta_path)?;
    let width = table.rows[0].len();
    let target_col = match &target {
        TargetSource::File(_) => None,
        TargetSource::Named(name) => {
            let h = table
                .header
                .as_ref()
                .ok_or_else(|| Error::InvalidData(format!("{} has no header row", theta_path.display())))?;
            Some(
                h.iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::InvalidData(format!("no column named {name:?}")))?,
            )
        }
        TargetSource::Index(k) if *k < width => Some(*k),
        TargetSource::Index(k) => return Err(Error::InvalidData(format!("target column {k} out of range"))),
    };
    let keep: Vec<usize> = (0..width).filter(|c| Some(*c) != target_col).collect();
    let n = table.rows.len();
    let theta = DMatrix::from_fn(n, keep.len(), |i, j| table.rows[i][keep[j]]);
    let u_t = match (target, target_col) {
        (TargetSource::File(path), _) => {
            let t = read_table(path)?;
            if t.rows[0].len() != 1 {
                return Err(Error::Parse { line: 1, reason: "target file must have one column".into() });
            }
            DVector::from_iterator(t.rows.len(), t.rows.iter().map(|r| r[0]))
        }
        (_, Some(c)) => DVector::from_iterator(n, table.rows.iter().map(|r| r[c])),
        _ => unreachable!("target column resolved above"),
    };
    let labels: Vec<String> = match (names, &table.header) {
        (Some(names), _) => names,
        (None, Some(h)) => keep.iter().map(|c| h[*c].clone()).collect(),
        (None, None) => (0..keep.len()).map(|c| format!("theta_{c}")).collect(),
    };
    if labels.len() != keep.len() {
        return Err(Error::InvalidData(format!("{} names for {} columns", labels.len(), keep.len())));
    }
    if theta.iter().chain(u_t.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("library contains non-finite values".into()));
    }
    let terms = labels.into_iter().map(TermSpec::label).collect();
    TermLibrary::new(theta, u_t, terms, Provenance::Ingested)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    #[test]
    fn term_enumeration() {
        let all = enumerate_terms(5, 5);
        assert_eq!(all.len(), 36);
        assert_eq!(all[0].name, "1");
        assert_eq!(all[35].name, "u^5u_xxxxx");
        let small: Vec<String> = enumerate_terms(2, 3).into_iter().map(|t| t.name).collect();
        assert_eq!(
            small,
            ["1", "u_x", "u_xx", "u_xxx", "u", "uu_x", "uu_xx", "uu_xxx", "u^2", "u^2u_x", "u^2u_xx", "u^2u_xxx"]
        );
        assert_eq!(enumerate_terms(0, 0).len(), 1);
    }

    fn field(nx: usize, nt: usize, (x0, x1): (f64, f64), f: impl Fn(f64, f64) -> f64) -> FieldGrid {
        let dx = (x1 - x0) / (nx - 1) as f64;
        let dt = 0.01;
        let v = DMatrix::from_fn(nx, nt, |i, j| f(x0 + i as f64 * dx, j as f64 * dt));
        FieldGrid::new(v, x0, dx, 0.0, dt).unwrap()
    }

    #[test]
    fn quadratic_is_differentiated_exactly() {
        let g = field(41, 15, (-1.0, 1.0), |x, _| x * x);
        let lib = build_library_numeric(&g, &enumerate_terms(0, 3), 5, 11).unwrap();
        let d = lib.derivatives.as_ref().unwrap();
        for i in 0..lib.n() {
            let x = (d.dx[0][i]).sqrt();
            assert!((d.dx[1][i].abs() - 2.0 * x).abs() < 1e-8);
            assert!((d.dx[2][i] - 2.0).abs() < 1e-8);
            assert!(d.dx[3][i].abs() < 1e-8);
        }
        assert!(lib.u_t.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn sine_derivative_accuracy() {
        let g = field(256, 15, (0.0, std::f64::consts::TAU), |x, _| x.sin());
        let lib = build_library_numeric(&g, &enumerate_terms(0, 1), 5, 11).unwrap();
        let hw = lib.trim.x;
        let mt = g.nt() - 2 * hw;
        let err = (0..lib.n())
            .map(|r| {
                let x = g.x(r / mt + hw);
                (lib.theta[(r, 1)] - x.cos()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "{err}");
    }

    #[test]
    fn numeric_converges_to_analytic() {
        // travelling sine so that u_t is exercised too
        let f = |x: f64, t: f64| (x - 0.5 * t).sin();
        let fd = |b: usize, x: f64| match b % 4 {
            0 => x.sin(),
            1 => x.cos(),
            2 => -x.sin(),
            _ => -x.cos(),
        };
        let err = |nx: usize, b: usize| {
            let g = field(nx, 15, (0.0, std::f64::consts::TAU), f);
            let lib = build_library_numeric(&g, &enumerate_terms(0, 3), 5, 11).unwrap();
            let d = lib.derivatives.as_ref().unwrap();
            let mt = g.nt() - 2 * lib.trim.t;
            (0..lib.n())
                .map(|r| {
                    let (i, j) = (r / mt + lib.trim.x, r % mt + lib.trim.t);
                    (d.dx[b][r] - fd(b, g.x(i) - 0.5 * g.t(j))).abs()
                })
                .fold(0.0, f64::max)
        };
        for b in 1..=3 {
            let order = (err(40, b) / err(80, b)).log2();
            assert!(order >= (5 - b + 1) as f64 - 0.1, "b={b} order={order}");
        }
    }

    #[test]
    fn columns_match_stored_derivatives() {
        let g = field(30, 20, (-2.0, 2.0), |x, t| (x + t).tanh());
        let terms = enumerate_terms(3, 3);
        let lib = build_library_numeric(&g, &terms, 5, 7).unwrap();
        let d = lib.derivatives.as_ref().unwrap();
        for (j, t) in terms.iter().enumerate() {
            let (a, b) = (t.poly_power.unwrap(), t.deriv_order.unwrap());
            for i in 0..lib.n() {
                let want = d.dx[0][i].powi(a as i32) * if b == 0 { 1.0 } else { d.dx[b][i] };
                assert!((lib.theta[(i, j)] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
        assert_eq!(lib.n(), (30 - 2 * 3) * (20 - 2 * 3));
        assert_eq!(lib.trim, Trim { x: 3, t: 3 });
    }

    #[test]
    fn bad_window_is_rejected() {
        let g = field(30, 20, (0.0, 1.0), |x, _| x);
        assert!(build_library_numeric(&g, &enumerate_terms(1, 1), 5, 10).is_err());
        assert!(build_library_numeric(&g, &enumerate_terms(1, 1), 5, 5).is_err());
        assert!(build_library_numeric(&g, &enumerate_terms(1, 1), 5, 21).is_err());
    }

    #[test]
    fn analytic_library_of_kdv() {
        let lib =
            build_library_analytic(&AnalyticSolution::kdv_two_soliton(), &GridSpec::kdv(), &enumerate_terms(2, 3))
                .unwrap();
        assert_eq!((lib.n(), lib.p()), (2000, 12));
        let (uux, uxxx) = (lib.index_of("uu_x").unwrap(), lib.index_of("u_xxx").unwrap());
        let r = &lib.u_t + lib.theta.column(uux) * 6.0 + lib.theta.column(uxxx);
        assert!(r.amax() / lib.u_t.amax() < 1e-6);
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        let g = field(30, 20, (0.0, 1.0), |_, _| 2.5);
        let lib = build_library_numeric(&g, &enumerate_terms(2, 2), 5, 7).unwrap();
        for (j, t) in lib.terms.iter().enumerate() {
            let col = lib.theta.column(j);
            if t.deriv_order == Some(0) {
                let want = 2.5f64.powi(t.poly_power.unwrap() as i32);
                assert!(col.iter().all(|v| (v - want).abs() < 1e-10));
            } else {
                assert!(col.amax() < 1e-10);
            }
        }
    }

    #[test]
    fn ingest_with_header_and_target_file() {
        let dir = tempfile::tempdir().unwrap();
        let tp = dir.path().join("theta.csv");
        let up = dir.path().join("ut.csv");
        fs::File::create(&tp).unwrap().write_all(b"u,u_x\n1,2\n3,4\n5,6\n").unwrap();
        fs::File::create(&up).unwrap().write_all(b"0.1\n0.2\n0.3\n").unwrap();
        let lib = ingest_library(&tp, TargetSource::File(&up), None).unwrap();
        assert_eq!((lib.n(), lib.p()), (3, 2));
        assert_eq!(lib.names(), ["u", "u_x"]);
        assert_eq!(lib.terms[0].poly_power, None);
        assert_eq!(lib.provenance, Provenance::Ingested);
        assert_relative_eq!(lib.theta[(2, 1)], 6.0);
        assert_relative_eq!(lib.u_t[1], 0.2);
    }

    #[test]
    fn ingest_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let tp = dir.path().join("theta.csv");
        fs::write(&tp, "a,b,u_t\n1,2,3\n4,x,6\n").unwrap();
        match ingest_library(&tp, TargetSource::Named("u_t"), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        fs::write(&tp, "1,2,3\n4,5\n").unwrap();
        match ingest_library(&tp, TargetSource::Index(2), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = field(20, 20, (0.0, 1.0), |x, t| (x * t).cos());
        let lib = build_library_numeric(&g, &enumerate_terms(1, 2), 3, 5).unwrap();
        let path = dir.path().join("lib.csv");
        lib.write_csv(&path).unwrap();
        let back = ingest_library(&path, TargetSource::Named(UT_COLUMN), None).unwrap();
        assert_eq!(back.names(), lib.names());
        assert!((back.theta - &lib.theta).amax() <= 1e-15 * lib.theta.amax());
        assert_eq!(back.u_t, lib.u_t);
    }
}
