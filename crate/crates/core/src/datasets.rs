//! Benchmark fields: closed-form solutions, a Newell-Whitehead solver and the
//! additive Gaussian noise model.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{scaled_cosh, scaled_sinh, sech, Jet, Scalar};
use crate::rng;

/// Highest x-derivative order available from [`AnalyticSolution::derivatives`].
pub const MAX_JET_ORDER: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnalyticSolution {
    /// Two interacting KdV solitons with speeds `c1 > c2 > 0`.
    KdV2Soliton { c1: f64, c2: f64 },
    /// `c/2 · sech²(√c (x − ct)/2)`.
    KdV1Soliton { c: f64 },
    /// Viscous Burgers from a Dirac initial mass `A`; defined for `t > 0`.
    BurgersDirac { nu: f64, a: f64 },
    /// Travelling wave of `u_t = u_xx + u(1 − u)`, `λ ≥ 1`.
    Fisher { lambda: f64 },
}

impl AnalyticSolution {
    pub fn kdv_two_soliton() -> Self {
        Self::KdV2Soliton { c1: 5.0, c2: 2.0 }
    }

    pub fn burgers() -> Self {
        Self::BurgersDirac { nu: 0.1, a: 1.0 }
    }

    pub fn fisher() -> Self {
        Self::Fisher { lambda: 5.0 / (2.0 * 6f64.sqrt()) }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::KdV2Soliton { c1, c2 } => c1 > c2 && c2 > 0.0,
            Self::KdV1Soliton { c } => c > 0.0,
            Self::BurgersDirac { nu, a } => nu > 0.0 && a.is_finite(),
            Self::Fisher { lambda } => lambda >= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidData(format!("invalid parameters for {self:?}")))
        }
    }

    /// Closed form, generic over plain values and jets.
    pub fn value<T: Scalar>(&self, x: T, t: T) -> T {
        match *self {
            Self::KdV2Soliton { c1, c2 } => {
                let (s1, s2) = (c1.sqrt(), c2.sqrt());
                let a1 = (x - t * c1) * (s1 / 2.0);
                let a2 = (x - t * c2) * (s2 / 2.0);
                // every hyperbolic term is scaled by e^{-m}; the ratio is unchanged
                let m = a1.value().abs() + a2.value().abs();
                let ch2 = scaled_cosh(a2, m);
                let sh1 = scaled_sinh(a1, m);
                let num = (ch2.square() * c1 + sh1.square() * c2) * (2.0 * (c1 - c2));
                let den = scaled_cosh(a1 + a2, m) * (s1 - s2) + scaled_cosh(a1 - a2, m) * (s1 + s2);
                num / den.square()
            }
            Self::KdV1Soliton { c } => sech((x - t * c) * (c.sqrt() / 2.0)).square() * (c / 2.0),
            Self::BurgersDirac { nu, a } => {
                let e = (a / (2.0 * nu)).exp_m1();
                let four_nu_t = t * (4.0 * nu);
                let gauss = (-(x.square() / four_nu_t)).exp();
                let pre = (t * PI).recip().sqrt() * (nu.sqrt() * e);
                let den = (x / four_nu_t.sqrt()).erfc() * (0.5 * e) + 1.0;
                pre * gauss / den
            }
            Self::Fisher { lambda } => {
                let sigma = lambda - (lambda * lambda - 1.0).sqrt();
                let z = (x + t * (2.0 * lambda)) * (-sigma / 2.0);
                let k = 2f64.sqrt() - 1.0;
                if z.value() <= 0.0 {
                    (z.exp() * k + 1.0).square().recip()
                } else {
                    // (1 + k e^z)^{-2} = e^{-2z} (e^{-z} + k)^{-2}
                    (-(z * 2.0)).exp() / ((-z).exp() + k).square()
                }
            }
        }
    }

    pub fn evaluate(&self, x: f64, t: f64) -> Result<f64> {
        self.check_node(x, t)?;
        let u = self.value(x, t);
        if u.is_finite() {
            Ok(u)
        } else {
            Err(Error::Evaluation { x, t, reason: "non-finite value".into() })
        }
    }

    /// `[u, u_x, …, ∂ˣ^order u]` and `u_t` at one node.
    pub fn derivatives(&self, x: f64, t: f64, order: usize) -> Result<(Vec<f64>, f64)> {
        if order > MAX_JET_ORDER {
            return Err(Error::InvalidData(format!(
                "derivative order {order} exceeds the supported {MAX_JET_ORDER}"
            )));
        }
        self.check_node(x, t)?;
        let jx: Jet<{ MAX_JET_ORDER + 1 }> = self.value(Jet::variable(x), Jet::constant(t));
        let jt: Jet<2> = self.value(Jet::constant(x), Jet::variable(t));
        let dx: Vec<f64> = (0..=order).map(|k| jx.derivative(k)).collect();
        let ut = jt.derivative(1);
        if dx.iter().chain(std::iter::once(&ut)).any(|v| !v.is_finite()) {
            return Err(Error::Evaluation { x, t, reason: "non-finite derivative".into() });
        }
        Ok((dx, ut))
    }

    fn check_node(&self, x: f64, t: f64) -> Result<()> {
        self.validate()?;
        if !x.is_finite() || !t.is_finite() {
            return Err(Error::Evaluation { x, t, reason: "non-finite coordinate".into() });
        }
        if matches!(self, Self::BurgersDirac { .. }) && t <= 0.0 {
            return Err(Error::Evaluation { x, t, reason: "Burgers solution requires t > 0".into() });
        }
        Ok(())
    }

    /// Residual of the PDE this solution satisfies, from jet derivatives.
    pub fn pde_residual(&self, x: f64, t: f64) -> Result<f64> {
        let (d, ut) = self.derivatives(x, t, 3)?;
        Ok(match *self {
            Self::KdV2Soliton { .. } | Self::KdV1Soliton { .. } => ut + 6.0 * d[0] * d[1] + d[3],
            Self::BurgersDirac { nu, .. } => ut - nu * d[2] + d[0] * d[1],
            Self::Fisher { .. } => ut - d[2] - d[0] * (1.0 - d[0]),
        })
    }

    /// `k` with `u_t + k·u_x = 0` for the travelling waves, `None` otherwise.
    pub fn advection_constant(&self) -> Option<f64> {
        match *self {
            Self::KdV1Soliton { c } => Some(c),
            Self::Fisher { lambda } => Some(-2.0 * lambda),
            _ => None,
        }
    }
}

/// Uniform sampling of `[x0, x1] × [t0, t1]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub x0: f64,
    pub x1: f64,
    pub nt: usize,
    pub t0: f64,
    pub t1: f64,
}

impl GridSpec {
    pub fn new(nx: usize, (x0, x1): (f64, f64), nt: usize, (t0, t1): (f64, f64)) -> Self {
        Self { nx, x0, x1, nt, t0, t1 }
    }

    pub fn kdv() -> Self {
        Self::new(40, (-5.0, 12.0), 50, (-1.0, 2.0))
    }

    pub fn burgers() -> Self {
        Self::new(40, (-2.0, 3.0), 50, (0.5, 5.0))
    }

    pub fn newell_whitehead() -> Self {
        Self::new(40, (0.0, 39.0), 50, (0.0, 1.96))
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.nt < 2 || !(self.x1 > self.x0) || !(self.t1 > self.t0) {
            return Err(Error::InvalidData(format!("degenerate grid {self:?}")));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x1 - self.x0) / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / (self.nt - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx()
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt()
    }
}

/// Samples of `u` on a uniform grid; `values[(i, j)] = u(x0 + i·dx, t0 + j·dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub values: DMatrix<f64>,
    pub x0: f64,
    pub dx: f64,
    pub t0: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldManifest {
    pub nx: usize,
    pub nt: usize,
    pub x0: f64,
    pub dx: f64,
    pub t0: f64,
    pub dt: f64,
    pub path: String,
}

impl FieldGrid {
    pub fn new(values: DMatrix<f64>, x0: f64, dx: f64, t0: f64, dt: f64) -> Result<Self> {
        let g = Self { values, x0, dx, t0, dt };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0) || !(self.dt > 0.0) {
            return Err(Error::InvalidData("grid steps must be positive".into()));
        }
        if self.values.is_empty() {
            return Err(Error::InvalidData("field has no samples".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("field contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        self.values.nrows()
    }

    pub fn nt(&self) -> usize {
        self.values.ncols()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    /// Population standard deviation of all samples.
    pub fn std(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.values.sum() / n;
        (self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
    }

    /// Writes `<stem>.csv` (rows = x index) and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let csv_name = format!("{stem}.csv");
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(dir.join(&csv_name))?;
        for row in self.values.row_iter() {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        let manifest = FieldManifest {
            nx: self.nx(),
            nt: self.nt(),
            x0: self.x0,
            dx: self.dx,
            t0: self.t0,
            dt: self.dt,
            path: csv_name,
        };
        let path = dir.join(format!("{stem}.json"));
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(path)
    }

    /// Reads a manifest and the CSV it points to (relative to the manifest).
    pub fn read(manifest_path: &Path) -> Result<Self> {
        let manifest: FieldManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(base.join(&manifest.path))?;
        let mut data = Vec::with_capacity(manifest.nx * manifest.nt);
        let mut rows = 0;
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != manifest.nt {
                return Err(Error::Parse {
                    line: line + 1,
                    reason: format!("expected {} columns, found {}", manifest.nt, rec.len()),
                });
            }
            for cell in rec.iter() {
                data.push(cell.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: line + 1,
                    reason: format!("{cell:?}: {e}"),
                })?);
            }
            rows += 1;
        }
        if rows != manifest.nx {
            return Err(Error::InvalidData(format!("expected {} rows, found {rows}", manifest.nx)));
        }
        let values = DMatrix::from_row_slice(manifest.nx, manifest.nt, &data);
        Self::new(values, manifest.x0, manifest.dx, manifest.t0, manifest.dt)
    }
}

/// Evaluates a closed form on every grid node.
pub fn sample_analytic(solution: &AnalyticSolution, grid: &GridSpec) -> Result<FieldGrid> {
    grid.validate()?;
    let mut values = DMatrix::zeros(grid.nx, grid.nt);
    for i in 0..grid.nx {
        for j in 0..grid.nt {
            values[(i, j)] = solution.evaluate(grid.x(i), grid.t(j))?;
        }
    }
    FieldGrid::new(values, grid.x0, grid.dx(), grid.t0, grid.dt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    /// `Σ αᵢ sin(βᵢ π (x − x0)/L)` with `L` the domain length.
    Sines { amplitudes: Vec<f64>, frequencies: Vec<f64> },
    Constant { value: f64 },
}

/// `u_t = D·u_xx + u(1 − u²) + s` with Dirichlet ends held at their initial values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NwParams {
    pub diffusion: f64,
    pub source: f64,
    pub initial: InitialCondition,
    /// Internal grid spacing is `dx / refine`.
    pub refine: usize,
    /// Internal step is at most `dt_safety · h² / D`.
    pub dt_safety: f64,
}

impl Default for NwParams {
    fn default() -> Self {
        Self {
            diffusion: 10.0,
            source: -0.4,
            initial: InitialCondition::Sines {
                amplitudes: vec![0.2, 0.8, 0.4],
                frequencies: vec![12.0, 5.0, 10.0],
            },
            refine: 8,
            dt_safety: 0.2,
        }
    }
}

const DIVERGENCE_LIMIT: f64 = 1e6;

pub fn solve_newell_whitehead(grid: &GridSpec, params: &NwParams) -> Result<FieldGrid> {
    grid.validate()?;
    if params.refine == 0 || !(params.diffusion >= 0.0) || !(params.dt_safety > 0.0) {
        return Err(Error::InvalidData("invalid Newell-Whitehead parameters".into()));
    }
    let m = (grid.nx - 1) * params.refine + 1;
    let length = grid.x1 - grid.x0;
    let h = length / (m - 1) as f64;
    let mut u: Vec<f64> = (0..m)
        .map(|k| {
            let x = k as f64 * h;
            match &params.initial {
                InitialCondition::Sines { amplitudes, frequencies } => amplitudes
                    .iter()
                    .zip(frequencies)
                    .map(|(a, b)| a * (b * PI * x / length).sin())
                    .sum(),
                InitialCondition::Constant { value } => *value,
            }
        })
        .collect();

    let dt_out = grid.dt();
    let substeps = if params.diffusion > 0.0 {
        (dt_out / (params.dt_safety * h * h / params.diffusion)).ceil().max(1.0) as usize
    } else {
        (dt_out / params.dt_safety).ceil().max(1.0) as usize
    };
    let dt = dt_out / substeps as f64;
    let (d, s, inv_h2) = (params.diffusion, params.source, 1.0 / (h * h));
    let rhs = |u: &[f64], out: &mut [f64]| {
        out[0] = 0.0;
        out[m - 1] = 0.0;
        for k in 1..m - 1 {
            let uxx = (u[k + 1] - 2.0 * u[k] + u[k - 1]) * inv_h2;
            out[k] = d * uxx + u[k] * (1.0 - u[k] * u[k]) + s;
        }
    };

    let mut values = DMatrix::zeros(grid.nx, grid.nt);
    let sample = |u: &[f64], values: &mut DMatrix<f64>, j: usize| {
        for i in 0..grid.nx {
            values[(i, j)] = u[i * params.refine];
        }
    };
    sample(&u, &mut values, 0);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut tmp = vec![0.0; m];
    for j in 1..grid.nt {
        for _ in 0..substeps {
            rhs(&u, &mut k1);
            for k in 0..m {
                tmp[k] = u[k] + 0.5 * dt * k1[k];
            }
            rhs(&tmp, &mut k2);
            for k in 0..m {
                tmp[k] = u[k] + 0.5 * dt * k2[k];
            }
            rhs(&tmp, &mut k3);
            for k in 0..m {
                tmp[k] = u[k] + dt * k3[k];
            }
            rhs(&tmp, &mut k4);
            for k in 0..m {
                u[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
            }
        }
        let peak = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(peak <= DIVERGENCE_LIMIT) {
            return Err(Error::SolverDiverged(format!("|u| reached {peak:e} at t = {}", grid.t(j))));
        }
        sample(&u, &mut values, j);
    }
    FieldGrid::new(values, grid.x0, grid.dx(), grid.t0, dt_out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub alpha: f64,
    pub seed: u64,
}

/// `u + α·σ(u)·Z` with `σ` the population standard deviation of the field.
pub fn add_noise(field: &FieldGrid, spec: NoiseSpec) -> Result<FieldGrid> {
    if !(spec.alpha >= 0.0) {
        return Err(Error::InvalidData("noise fraction must be non-negative".into()));
    }
    if spec.alpha == 0.0 {
        return Ok(field.clone());
    }
    let scale = spec.alpha * field.std();
    let z = rng::normals(spec.seed, field.values.len());
    let mut out = field.clone();
    // column-major order: x fastest
    for (v, zk) in out.values.iter_mut().zip(z) {
        *v += scale * zk;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn max_relative_residual(sol: &AnalyticSolution, grid: &GridSpec) -> f64 {
        let mut res = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..grid.nx {
            for j in 0..grid.nt {
                let (x, t) = (grid.x(i), grid.t(j));
                res = res.max(sol.pde_residual(x, t).unwrap().abs());
                scale = scale.max(sol.derivatives(x, t, 0).unwrap().1.abs());
            }
        }
        res / scale
    }

    #[test]
    fn closed_forms_satisfy_their_equations() {
        assert!(max_relative_residual(&AnalyticSolution::kdv_two_soliton(), &GridSpec::kdv()) < 1e-6);
        assert!(max_relative_residual(&AnalyticSolution::burgers(), &GridSpec::burgers()) < 1e-6);
        let wide = GridSpec::new(64, (-10.0, 10.0), 30, (0.5, 5.0));
        assert!(max_relative_residual(&AnalyticSolution::burgers(), &wide) < 1e-6);
        let g = GridSpec::new(30, (-10.0, 10.0), 20, (0.0, 2.0));
        assert!(max_relative_residual(&AnalyticSolution::fisher(), &g) < 1e-6);
        assert!(max_relative_residual(&AnalyticSolution::KdV1Soliton { c: 3.0 }, &g) < 1e-6);
    }

    #[test]
    fn kdv_two_soliton_matches_direct_formula() {
        let (c1, c2) = (5.0f64, 2.0f64);
        let (s1, s2) = (c1.sqrt(), c2.sqrt());
        let direct = |x: f64, t: f64| {
            let (x1, x2) = (x - c1 * t, x - c2 * t);
            let num = 2.0 * (c1 - c2) * (c1 * (s2 * x2 / 2.0).cosh().powi(2) + c2 * (s1 * x1 / 2.0).sinh().powi(2));
            let den = (s1 - s2) * ((s1 * x1 + s2 * x2) / 2.0).cosh() + (s1 + s2) * ((s1 * x1 - s2 * x2) / 2.0).cosh();
            num / (den * den)
        };
        let sol = AnalyticSolution::kdv_two_soliton();
        for (x, t) in [(-5.0, -1.0), (0.0, 0.0), (3.3, 0.7), (12.0, 2.0), (-2.0, 1.5)] {
            assert_relative_eq!(sol.evaluate(x, t).unwrap(), direct(x, t), max_relative = 1e-12);
        }
        // far from both solitons the naive form overflows; the scaled one stays finite
        assert!(sol.evaluate(400.0, 0.0).unwrap().is_finite());
    }

    #[test]
    fn single_soliton_peak() {
        let sol = AnalyticSolution::KdV1Soliton { c: 4.0 };
        for t in [0.0, 0.5, 1.0] {
            assert_relative_eq!(sol.evaluate(4.0 * t, t).unwrap(), 2.0, epsilon = 1e-15);
            assert!(sol.evaluate(4.0 * t + 0.1, t).unwrap() < 2.0);
        }
    }

    #[test]
    fn fisher_matches_high_precision_values() {
        // reference values evaluated at 30 significant digits
        let table = [
            (-3.0, 0.0, 0.172_217_351_576_000_068_36),
            (0.0, 0.0, 0.5),
            (2.0, 1.0, 0.858_032_720_027_246_438_80),
            (10.0, 0.5, 0.990_852_417_094_415_729_27),
            (-10.0, 2.0, 0.031_451_108_055_826_662_828),
        ];
        let sol = AnalyticSolution::fisher();
        for (x, t, want) in table {
            assert_relative_eq!(sol.evaluate(x, t).unwrap(), want, max_relative = 1e-13);
        }
        assert!((sol.evaluate(200.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn travelling_waves_are_pure_advection() {
        let g = GridSpec::new(25, (-8.0, 8.0), 10, (0.0, 1.0));
        for sol in [AnalyticSolution::KdV1Soliton { c: 2.5 }, AnalyticSolution::fisher()] {
            let k = sol.advection_constant().unwrap();
            for i in 0..g.nx {
                for j in 0..g.nt {
                    let (d, ut) = sol.derivatives(g.x(i), g.t(j), 1).unwrap();
                    assert!((ut + k * d[1]).abs() <= 1e-6 * (1.0 + ut.abs()));
                }
            }
        }
    }

    #[test]
    fn jet_derivatives_match_finite_differences() {
        let sol = AnalyticSolution::burgers();
        let (x, t, h) = (0.4, 1.3, 1e-4);
        let (d, ut) = sol.derivatives(x, t, 2).unwrap();
        let f = |x: f64, t: f64| sol.evaluate(x, t).unwrap();
        let fx = (f(x + h, t) - f(x - h, t)) / (2.0 * h);
        let fxx = (f(x + h, t) - 2.0 * f(x, t) + f(x - h, t)) / (h * h);
        let ft = (f(x, t + h) - f(x, t - h)) / (2.0 * h);
        assert_relative_eq!(d[1], fx, max_relative = 1e-4);
        assert_relative_eq!(d[2], fxx, max_relative = 1e-4);
        assert_relative_eq!(ut, ft, max_relative = 1e-4);
    }

    #[test]
    fn invalid_parameters_and_nodes() {
        assert!(AnalyticSolution::KdV2Soliton { c1: 2.0, c2: 5.0 }.validate().is_err());
        assert!(matches!(
            AnalyticSolution::burgers().evaluate(0.0, 0.0),
            Err(Error::Evaluation { .. })
        ));
        assert!(AnalyticSolution::burgers().derivatives(0.0, 1.0, 8).is_err());
    }

    #[test]
    fn reaction_fixed_point_is_stationary() {
        // u(1 − u²) = 0.4 near u = −1.16
        let mut u = -1.2f64;
        for _ in 0..50 {
            u -= (u * (1.0 - u * u) - 0.4) / (1.0 - 3.0 * u * u);
        }
        let params = NwParams {
            diffusion: 0.0,
            initial: InitialCondition::Constant { value: u },
            ..NwParams::default()
        };
        let field = solve_newell_whitehead(&GridSpec::newell_whitehead(), &params).unwrap();
        assert!(field.values.iter().all(|v| (v - u).abs() < 1e-6));
    }

    #[test]
    fn halving_the_step_changes_little() {
        let grid = GridSpec::new(40, (0.0, 39.0), 11, (0.0, 0.4));
        let base = NwParams { refine: 4, ..NwParams::default() };
        let a = solve_newell_whitehead(&grid, &base).unwrap();
        let b = solve_newell_whitehead(&grid, &NwParams { dt_safety: 0.1, ..base }).unwrap();
        assert!((a.values - b.values).abs().max() < 1e-5);
    }

    #[test]
    fn spatial_refinement_is_second_order() {
        let grid = GridSpec::new(40, (0.0, 39.0), 6, (0.0, 0.2));
        let run = |r| solve_newell_whitehead(&grid, &NwParams { refine: r, ..NwParams::default() }).unwrap();
        let (u1, u2, u4) = (run(2), run(4), run(8));
        let e1 = (&u1.values - &u2.values).abs().max();
        let e2 = (&u2.values - &u4.values).abs().max();
        assert!((e1 / e2).log2() >= 1.9, "observed order {}", (e1 / e2).log2());
    }

    #[test]
    fn divergence_is_reported() {
        // without diffusion the step is far too coarse for the cubic at |u| = 50
        let params = NwParams {
            diffusion: 0.0,
            initial: InitialCondition::Constant { value: 50.0 },
            ..NwParams::default()
        };
        assert!(matches!(
            solve_newell_whitehead(&GridSpec::newell_whitehead(), &params),
            Err(Error::SolverDiverged(_))
        ));
    }

    #[test]
    fn noise_model() {
        let field = FieldGrid::new(DMatrix::from_fn(40, 50, |i, j| ((i * 7 + j * 3) % 11) as f64), 0.0, 1.0, 0.0, 1.0)
            .unwrap();
        assert_eq!(add_noise(&field, NoiseSpec { alpha: 0.0, seed: 3 }).unwrap(), field);

        let unit = FieldGrid { values: field.values.map(|v| v / field.std()), ..field.clone() };
        let noisy = add_noise(&unit, NoiseSpec { alpha: 0.1, seed: 3 }).unwrap();
        let diff = FieldGrid { values: &noisy.values - &unit.values, ..unit.clone() };
        assert!((diff.std() - 0.1).abs() < 0.005, "{}", diff.std());
        assert_eq!(noisy, add_noise(&unit, NoiseSpec { alpha: 0.1, seed: 3 }).unwrap());
        assert_ne!(noisy, add_noise(&unit, NoiseSpec { alpha: 0.1, seed: 4 }).unwrap());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let field = sample_analytic(&AnalyticSolution::kdv_two_soliton(), &GridSpec::kdv()).unwrap();
        let path = field.write(dir.path(), "field").unwrap();
        let back = FieldGrid::read(&path).unwrap();
        assert_eq!(back, field);
    }
}
