//! Potential-energy and dipole-moment curves.
//!
//! Analytic forms are evaluated directly; tabulated data is interpolated with a
//! not-a-knot cubic spline and refuses to extrapolate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// Interpolating cubic spline with not-a-knot end conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::InvalidParameter(format!(
                "spline needs equal-length x and y ({} vs {})",
                n,
                y.len()
            )));
        }
        if n < 4 {
            return Err(Error::TooFewPoints {
                path: "<memory>".into(),
                needed: 4,
                found: n,
            });
        }
        if let Some(i) = x.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::NonMonotone {
                path: "<memory>".into(),
                line: i + 2,
            });
        }
        let m = not_a_knot_second_derivatives(&x, &y);
        Ok(CubicSpline { x, y, m })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn interval(&self, t: f64) -> Result<usize> {
        let (lo, hi) = self.range();
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfRange { x: t, min: lo, max: hi });
        }
        let i = self.x.partition_point(|&k| k <= t);
        Ok(i.saturating_sub(1).min(self.x.len() - 2))
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let i = self.interval(t)?;
        let h = self.x[i + 1] - self.x[i];
        let a = self.x[i + 1] - t;
        let b = t - self.x[i];
        Ok(self.m[i] * a * a * a / (6.0 * h)
            + self.m[i + 1] * b * b * b / (6.0 * h)
            + (self.y[i] / h - self.m[i] * h / 6.0) * a
            + (self.y[i + 1] / h - self.m[i + 1] * h / 6.0) * b)
    }

    pub fn derivative(&self, t: f64) -> Result<f64> {
        let i = self.interval(t)?;
        let h = self.x[i + 1] - self.x[i];
        let a = self.x[i + 1] - t;
        let b = t - self.x[i];
        Ok(-self.m[i] * a * a / (2.0 * h) + self.m[i + 1] * b * b / (2.0 * h)
            + (self.y[i + 1] - self.y[i]) / h
            - (self.m[i + 1] - self.m[i]) * h / 6.0)
    }
}

/// Knot second derivatives. The not-a-knot conditions fix M0 and M(n-1) in
/// terms of their neighbours, leaving a tridiagonal system for M1..M(n-2).
fn not_a_knot_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let k = n - 2;
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for r in 0..k {
        let i = r + 1;
        sub[r] = h[i - 1];
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        sup[r] = h[i];
        rhs[r] = 6.0 * (d[i] - d[i - 1]);
    }
    // M0 = M1 + h0 (M1 - M2) / h1
    let (h0, h1) = (h[0], h[1]);
    diag[0] += h0 + h0 * h0 / h1;
    sup[0] -= h0 * h0 / h1;
    // M(n-1) = M(n-2) + h(n-2) (M(n-2) - M(n-3)) / h(n-3)
    let (ha, hb) = (h[n - 3], h[n - 2]);
    diag[k - 1] += hb + hb * hb / ha;
    sub[k - 1] -= hb * hb / ha;

    let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs);
    let mut m = vec![0.0; n];
    m[1..n - 1].copy_from_slice(&inner);
    m[0] = m[1] + h0 * (m[1] - m[2]) / h1;
    m[n - 1] = m[n - 2] + hb * (m[n - 2] - m[n - 3]) / ha;
    m
}

/// Thomas algorithm. `sub[0]` and `sup[n-1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    if n == 1 {
        return vec![rhs[0] / diag[0]];
    }
    let mut c = vec![0.0; n];
    let mut r = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    r[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / denom } else { 0.0 };
        r[i] = (rhs[i] - sub[i] * r[i - 1]) / denom;
    }
    let mut out = vec![0.0; n];
    out[n - 1] = r[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = r[i] - c[i] * out[i + 1];
    }
    out
}

/// Tabulated (x, value) samples with their spline and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedSpec", into = "TabulatedSpec")]
pub struct TabulatedCurve {
    spline: CubicSpline,
    pub source: String,
    pub rows: usize,
}

#[derive(Serialize, Deserialize)]
struct TabulatedSpec {
    source: String,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl TryFrom<TabulatedSpec> for TabulatedCurve {
    type Error = Error;
    fn try_from(s: TabulatedSpec) -> Result<Self> {
        TabulatedCurve::from_samples(s.x, s.y, s.source)
    }
}

impl From<TabulatedCurve> for TabulatedSpec {
    fn from(t: TabulatedCurve) -> Self {
        TabulatedSpec {
            source: t.source,
            x: t.spline.x,
            y: t.spline.y,
        }
    }
}

impl TabulatedCurve {
    pub fn from_samples(x: Vec<f64>, y: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        let source = source.into();
        let rows = x.len();
        let spline = CubicSpline::new(x, y).map_err(|e| match e {
            Error::TooFewPoints { needed, found, .. } => Error::TooFewPoints {
                path: source.clone(),
                needed,
                found,
            },
            Error::NonMonotone { line, .. } => Error::NonMonotone {
                path: source.clone(),
                line,
            },
            other => other,
        })?;
        Ok(TabulatedCurve { spline, source, rows })
    }

    /// Read two numeric columns separated by whitespace and/or commas.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &name)
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(Error::MalformedRow {
                    path: source.to_string(),
                    line: line_no,
                    reason: format!("expected 2 columns, found {}", fields.len()),
                });
            }
            let mut vals = [0.0; 2];
            for (v, f) in vals.iter_mut().zip(&fields) {
                *v = f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::MalformedRow {
                        path: source.to_string(),
                        line: line_no,
                        reason: format!("'{f}' is not a finite number"),
                    }
                })?;
            }
            if let Some(&last) = x.last() {
                if vals[0] <= last {
                    return Err(Error::NonMonotone {
                        path: source.to_string(),
                        line: line_no,
                    });
                }
            }
            x.push(vals[0]);
            y.push(vals[1]);
        }
        if x.len() < 4 {
            return Err(Error::TooFewPoints {
                path: source.to_string(),
                needed: 4,
                found: x.len(),
            });
        }
        Self::from_samples(x, y, source)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.spline.eval(x)
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.spline.derivative(x)
    }

    pub fn range(&self) -> (f64, f64) {
        self.spline.range()
    }

    pub fn spline(&self) -> &CubicSpline {
        &self.spline
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialCurve {
    /// V = k/2 (x - r_e)^2 + offset.
    Harmonic { force_constant: f64, r_e: f64, offset: f64 },
    /// V = D_e [(1 - exp(-a (x - r_e)))^2 - 1] + offset, so V(inf) = offset.
    Morse { d_e: f64, a: f64, r_e: f64, offset: f64 },
    Tabulated(TabulatedCurve),
}

impl PotentialCurve {
    pub fn harmonic(force_constant: f64, r_e: f64) -> Result<Self> {
        if !(force_constant > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "harmonic force constant must be positive, got {force_constant}"
            )));
        }
        Ok(PotentialCurve::Harmonic { force_constant, r_e, offset: 0.0 })
    }

    pub fn morse(d_e: f64, a: f64, r_e: f64) -> Result<Self> {
        if !(d_e > 0.0 && a > 0.0 && r_e > 0.0) || !(d_e.is_finite() && a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Morse parameters must be positive and finite (D_e = {d_e}, a = {a}, r_e = {r_e})"
            )));
        }
        Ok(PotentialCurve::Morse { d_e, a, r_e, offset: 0.0 })
    }

    pub fn load_tabulated(path: impl AsRef<Path>) -> Result<Self> {
        Ok(PotentialCurve::Tabulated(TabulatedCurve::load(path)?))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            PotentialCurve::Harmonic { force_constant, r_e, offset } => {
                Ok(0.5 * force_constant * (x - r_e).powi(2) + offset)
            }
            PotentialCurve::Morse { d_e, a, r_e, offset } => {
                let e = 1.0 - (-a * (x - r_e)).exp();
                Ok(d_e * (e * e - 1.0) + offset)
            }
            PotentialCurve::Tabulated(t) => t.eval(x),
        }
    }

    pub fn eval_grid(&self, grid: &SpatialGrid) -> Result<Vec<f64>> {
        (0..grid.len()).map(|j| self.eval(grid.x(j))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DipoleCurve {
    /// μ = slope·x + intercept.
    Linear { slope: f64, intercept: f64 },
    /// μ = q·x·exp(-x / r_star).
    Mecke { q: f64, r_star: f64 },
    /// μ = Σ c_i (x - center)^i.
    Polynomial { center: f64, coeffs: Vec<f64> },
    Tabulated(TabulatedCurve),
}

impl DipoleCurve {
    pub fn mecke(q: f64, r_star: f64) -> Result<Self> {
        if !(r_star > 0.0 && r_star.is_finite() && q.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Mecke dipole needs finite q and r* > 0 (q = {q}, r* = {r_star})"
            )));
        }
        Ok(DipoleCurve::Mecke { q, r_star })
    }

    /// Mecke parameters with μ(r_e) = mu_e and dμ/dr(r_e) = slope.
    pub fn mecke_matching(mu_e: f64, slope: f64, r_e: f64) -> Result<Self> {
        let denom = 1.0 - slope * r_e / mu_e;
        if !(mu_e > 0.0 && r_e > 0.0 && denom > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "no Mecke dipole has μ(r_e) = {mu_e} and slope {slope} at r_e = {r_e}"
            )));
        }
        let r_star = r_e / denom;
        let q = mu_e / (r_e * (-r_e / r_star).exp());
        Self::mecke(q, r_star)
    }

    pub fn load_tabulated(path: impl AsRef<Path>) -> Result<Self> {
        Ok(DipoleCurve::Tabulated(TabulatedCurve::load(path)?))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            DipoleCurve::Linear { slope, intercept } => Ok(slope * x + intercept),
            DipoleCurve::Mecke { q, r_star } => Ok(q * x * (-x / r_star).exp()),
            DipoleCurve::Polynomial { center, coeffs } => {
                let u = x - center;
                Ok(coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c))
            }
            DipoleCurve::Tabulated(t) => t.eval(x),
        }
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        match self {
            DipoleCurve::Linear { slope, .. } => Ok(*slope),
            DipoleCurve::Mecke { q, r_star } => Ok(q * (-x / r_star).exp() * (1.0 - x / r_star)),
            DipoleCurve::Polynomial { center, coeffs } => {
                let u = x - center;
                Ok(coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (i, c)| acc * u + i as f64 * c))
            }
            DipoleCurve::Tabulated(t) => t.derivative(x),
        }
    }

    pub fn eval_grid(&self, grid: &SpatialGrid) -> Result<Vec<f64>> {
        (0..grid.len()).map(|j| self.eval(grid.x(j))).collect()
    }
}
