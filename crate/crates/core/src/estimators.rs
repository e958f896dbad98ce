//! Zeroth-order gradient estimators built from cost evaluations at randomly
//! perturbed designs.
//!
//! Directions are Gaussian. The isotropic law is `N(0, I/d)`, so that
//! `E‖u‖² = 1`. The guided law stretches it along a surrogate gradient `φ`:
//!
//! ```text
//! Σ = w I/d + (1 - w) φφᵀ/‖φ‖²
//! ```
//!
//! `Σ` is never formed for sampling. With `P = φ̂φ̂ᵀ` its square root is
//! `√(w/d) (I - P) + √(w/d + 1 - w) P`, which costs O(d) per draw.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub direction: Vec<f64>,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub g: Vec<f64>,
    pub evals_used: u32,
    pub perturbation: Perturbation,
}

impl GradientEstimate {
    pub fn is_finite(&self) -> bool {
        self.g.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.g.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidedConfig {
    /// Weight on the isotropic component, in `[0, 1]`.
    pub weight: f64,
    /// Surrogate gradient `φ`.
    pub surrogate: Vec<f64>,
    pub rho: f64,
}

fn scaled(u: &[f64], scale: f64) -> Vec<f64> {
    u.iter().map(|v| scale * v).collect()
}

fn estimate(u: &[f64], delta: f64, scale: f64, evals_used: u32) -> GradientEstimate {
    GradientEstimate {
        g: scaled(u, scale),
        evals_used,
        perturbation: Perturbation {
            direction: u.to_vec(),
            delta,
        },
    }
}

/// `u ~ N(0, I_d / d)`.
pub fn sample_isotropic<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    assert!(d >= 1, "dimension must be positive");
    let sd = (1.0 / d as f64).sqrt();
    (0..d)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Symmetric two-point estimator `(d / 2δ) (f⁺ - f⁻) u`.
pub fn two_point_estimate(d: usize, u: &[f64], delta: f64, f_plus: f64, f_minus: f64) -> GradientEstimate {
    debug_assert!(delta > 0.0);
    estimate(u, delta, d as f64 / (2.0 * delta) * (f_plus - f_minus), 2)
}

/// Single-evaluation estimator `(d / δ) f⁺ u`, without a control variate.
pub fn one_point_estimate(d: usize, u: &[f64], delta: f64, f_plus: f64) -> GradientEstimate {
    debug_assert!(delta > 0.0);
    estimate(u, delta, d as f64 / delta * f_plus, 1)
}

/// Residual-feedback estimator `(d / δ_k) (f_k - f_prev) u_k`, where
/// `f_prev` is the previous iteration's single perturbed evaluation.
pub fn rf_estimate(d: usize, u: &[f64], delta: f64, f_current: f64, f_prev: f64) -> GradientEstimate {
    debug_assert!(delta > 0.0);
    estimate(u, delta, d as f64 / delta * (f_current - f_prev), 1)
}

/// Guided two-point estimator `(1 / 2δ) (f⁺ - f⁻) u` for `u ~ N(0, Σ)`.
/// There is no factor `d`: its mean is `Σ ∇f_δ`, not `∇f_δ`.
pub fn gp_estimate(u: &[f64], delta: f64, f_plus: f64, f_minus: f64) -> GradientEstimate {
    debug_assert!(delta > 0.0);
    estimate(u, delta, (f_plus - f_minus) / (2.0 * delta), 2)
}

/// Unit surrogate direction, or `None` when `φ = 0` (isotropic fallback).
fn unit_surrogate(phi: &[f64]) -> Option<Vec<f64>> {
    let norm = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| scaled(phi, 1.0 / norm))
}

pub fn guided_covariance(cfg: &GuidedConfig, d: usize) -> DMatrix<f64> {
    let iso = DMatrix::<f64>::identity(d, d) / d as f64;
    match unit_surrogate(&cfg.surrogate) {
        None => iso,
        Some(p) => {
            let p = nalgebra::DVector::from_vec(p);
            iso * cfg.weight + (&p * p.transpose()) * (1.0 - cfg.weight)
        }
    }
}

/// Dense `Σ^{1/2}`; sampling uses [`apply_guided_sqrt`] instead.
pub fn guided_sqrt(cfg: &GuidedConfig, d: usize) -> DMatrix<f64> {
    let id = DMatrix::<f64>::identity(d, d);
    match unit_surrogate(&cfg.surrogate) {
        None => id / (d as f64).sqrt(),
        Some(p) => {
            let (a, b) = sqrt_factors(cfg.weight, d);
            let p = nalgebra::DVector::from_vec(p);
            let proj = &p * p.transpose();
            (id - &proj) * a + proj * b
        }
    }
}

fn sqrt_factors(w: f64, d: usize) -> (f64, f64) {
    let iso = w / d as f64;
    (iso.sqrt(), (iso + 1.0 - w).sqrt())
}

/// `Σ^{1/2} z` in O(d).
pub fn apply_guided_sqrt(cfg: &GuidedConfig, z: &[f64]) -> Vec<f64> {
    let d = z.len();
    match unit_surrogate(&cfg.surrogate) {
        None => scaled(z, (1.0 / d as f64).sqrt()),
        Some(p) => {
            let (a, b) = sqrt_factors(cfg.weight, d);
            let along: f64 = p.iter().zip(z).map(|(pi, zi)| pi * zi).sum();
            // a z + (b - a) (p·z) p
            z.iter()
                .zip(&p)
                .map(|(zi, pi)| a * zi + (b - a) * along * pi)
                .collect()
        }
    }
}

/// `u ~ N(0, Σ)`.
pub fn sample_guided<R: Rng + ?Sized>(cfg: &GuidedConfig, d: usize, rng: &mut R) -> Vec<f64> {
    assert!(d >= 1, "dimension must be positive");
    let z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    apply_guided_sqrt(cfg, &z)
}

/// `w' = 1 - ρ (1 - w)`; `w = 1` is the fixed point.
pub fn advance_weight(cfg: &GuidedConfig) -> f64 {
    1.0 - cfg.rho * (1.0 - cfg.weight)
}
