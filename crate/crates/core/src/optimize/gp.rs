//! Zero-mean Gaussian-process regression with an RBF kernel.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    points: Vec<Vec<f64>>,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
    y: DVector<f64>,
}

impl GaussianProcess {
    pub fn new(lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Self {
        GaussianProcess {
            lengthscale,
            signal_variance,
            noise_variance,
            points: Vec::new(),
            chol: None,
            alpha: DVector::zeros(0),
            y: DVector::zeros(0),
        }
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.signal_variance * (-0.5 * d2 / (self.lengthscale * self.lengthscale)).exp()
    }

    /// Condition on observations. A tiny jitter is added only if the
    /// kernel matrix is numerically singular.
    pub fn fit(&mut self, points: &[Vec<f64>], y: &[f64]) -> Result<()> {
        let n = points.len();
        if n != y.len() {
            return Err(Error::InvalidParameter("GP needs one value per point".into()));
        }
        self.points = points.to_vec();
        self.y = DVector::from_column_slice(y);
        if n == 0 {
            self.chol = None;
            self.alpha = DVector::zeros(0);
            return Ok(());
        }
        let k = DMatrix::from_fn(n, n, |i, j| {
            self.kernel(&points[i], &points[j]) + if i == j { self.noise_variance } else { 0.0 }
        });
        let mut jitter = 0.0;
        let chol = loop {
            let mut m = k.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(c) = m.cholesky() {
                break c;
            }
            jitter = if jitter == 0.0 { 1e-12 * self.signal_variance } else { jitter * 10.0 };
            if jitter > 1e-2 * self.signal_variance {
                return Err(Error::InvalidParameter("GP kernel matrix is not positive definite".into()));
            }
        };
        self.alpha = chol.solve(&self.y);
        self.chol = Some(chol);
        Ok(())
    }

    pub fn n_observations(&self) -> usize {
        self.points.len()
    }

    /// Posterior mean and variance (clamped at zero).
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let Some(chol) = &self.chol else {
            return (0.0, self.signal_variance);
        };
        let ks = DVector::from_iterator(self.points.len(), self.points.iter().map(|p| self.kernel(p, x)));
        let mean = ks.dot(&self.alpha);
        let v = chol.l().solve_lower_triangular(&ks).expect("triangular factor is invertible");
        let var = (self.signal_variance - v.norm_squared()).max(0.0);
        (mean, var)
    }

    /// log p(y | X, θ).
    pub fn log_marginal_likelihood(&self) -> f64 {
        let Some(chol) = &self.chol else { return 0.0 };
        let n = self.points.len() as f64;
        let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        -0.5 * self.y.dot(&self.alpha) - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}
