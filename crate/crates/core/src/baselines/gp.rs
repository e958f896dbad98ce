//! Exact Gaussian-process regression with a Matérn-5/2 kernel and the
//! expected-improvement acquisition (for minimization).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("kernel matrix is not positive definite; increase the jitter")]
    Singular,
    #[error("no observations")]
    Empty,
}

/// `k(r) = (1 + √5 r/ℓ + 5r²/(3ℓ²)) exp(-√5 r/ℓ)`.
pub fn matern52(a: &[f64], b: &[f64], lengthscale: f64) -> f64 {
    let r = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt() / lengthscale;
    let s = 5f64.sqrt() * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    lengthscale: f64,
    jitter: f64,
    y_mean: f64,
    y_scale: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl GaussianProcess {
    /// Fits to standardized targets; predictions are mapped back.
    pub fn fit(x: Vec<Vec<f64>>, y: &[f64], lengthscale: f64, jitter: f64) -> Result<Self, GpError> {
        let n = x.len();
        if n == 0 {
            return Err(GpError::Empty);
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let k = DMatrix::from_fn(n, n, |i, j| matern52(&x[i], &x[j], lengthscale) + if i == j { jitter } else { 0.0 });
        let chol = Cholesky::new(k).ok_or(GpError::Singular)?;
        let ys = DVector::from_iterator(n, y.iter().map(|v| (v - y_mean) / y_scale));
        let alpha = chol.solve(&ys);
        Ok(Self {
            x,
            lengthscale,
            jitter,
            y_mean,
            y_scale,
            chol,
            alpha,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.x
    }

    /// Posterior mean and latent variance at `p`, in the original units.
    pub fn predict(&self, p: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| matern52(xi, p, self.lengthscale)));
        let mean = ks.dot(&self.alpha);
        let v = self.chol.solve(&ks);
        let var = (1.0 - ks.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * self.y_scale * var)
    }

    /// Latent variance with everything up to the jitter level treated as
    /// zero. At an observed input the latent variance never exceeds the
    /// jitter, so this vanishes there.
    pub fn resolved_variance(&self, p: &[f64]) -> f64 {
        let (_, var) = self.predict(p);
        (var - self.y_scale * self.y_scale * self.jitter).max(0.0)
    }

    /// Observed input with the lowest posterior mean, and that mean.
    pub fn incumbent(&self) -> (usize, f64) {
        self.x
            .iter()
            .enumerate()
            .map(|(i, xi)| (i, self.predict(xi).0))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty")
    }

    /// Expected improvement below `best`.
    pub fn expected_improvement(&self, p: &[f64], best: f64) -> f64 {
        let (mean, _) = self.predict(p);
        let sd = self.resolved_variance(p).sqrt();
        let gain = best - mean;
        if sd <= 0.0 {
            return gain.max(0.0);
        }
        let z = gain / sd;
        (gain * normal_cdf(z) + sd * normal_pdf(z)).max(0.0)
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}
