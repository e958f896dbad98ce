//! Linear-Gaussian controlled chain with a closed-form stationary law.
//!
//! ```text
//! ξ' = ρ ξ + (1 - ρ)(Aθ + b) + ε,   ε ~ N(0, σ² I_m)
//! F(θ; ξ) = ‖ξ‖² + λ‖θ‖²
//! ```
//!
//! Under a fixed θ the chain is an AR(1) with mean `Aθ + b` and per-coordinate
//! variance `σ² / (1 - ρ²)`, so
//! `f(θ) = ‖Aθ + b‖² + m σ² / (1 - ρ²) + λ‖θ‖²`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::{BoxDomain, DesignVector};
use crate::env::{EnvError, Environment, StateValue, StateView};
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    /// Memory of the chain, in `[0, 1)`.
    pub rho_mix: f64,
    /// Row-major `m × d` map.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub sigma_eps: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub ridge: f64,
    /// Starting state; zeros when absent.
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
}

impl SyntheticParams {
    /// `A = I_d`, `b = -(c, ..., c)`, box `[0,1]^d`.
    pub fn identity(d: usize, offset: f64, rho_mix: f64, sigma_eps: f64) -> Self {
        let a = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            rho_mix,
            a,
            b: vec![-offset; d],
            sigma_eps,
            lower: vec![0.0; d],
            upper: vec![1.0; d],
            ridge: 0.0,
            initial_state: None,
        }
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SyntheticState(pub Vec<f64>);

impl StateView for SyntheticState {
    fn components(&self) -> Vec<(String, StateValue)> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &v)| (format!("xi_{i}"), StateValue::Number(v)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    params: SyntheticParams,
    a: DMatrix<f64>,
    b: DVector<f64>,
    domain: BoxDomain,
}

impl SyntheticEnv {
    pub fn new(params: SyntheticParams) -> Result<Self, EnvError> {
        let invalid = |msg: String| Err(EnvError::InvalidState(msg));
        if !(0.0..1.0).contains(&params.rho_mix) {
            return invalid(format!("rho_mix = {} must lie in [0, 1)", params.rho_mix));
        }
        if params.sigma_eps < 0.0 || params.ridge < 0.0 {
            return invalid("sigma_eps and ridge must be nonnegative".into());
        }
        let m = params.a.len();
        let d = params.lower.len();
        if m == 0 || params.b.len() != m || params.a.iter().any(|row| row.len() != d) {
            return invalid(format!("A must be {m}×{d} with b of length {m}"));
        }
        if let Some(x0) = &params.initial_state {
            if x0.len() != m {
                return invalid("initial_state must have length m".into());
            }
        }
        let domain = BoxDomain::new(params.lower.clone(), params.upper.clone())
            .map_err(|e| EnvError::InvalidState(e.to_string()))?;
        let a = DMatrix::from_row_iterator(m, d, params.a.iter().flatten().copied());
        let b = DVector::from_column_slice(&params.b);
        Ok(Self { params, a, b, domain })
    }

    pub fn params(&self) -> &SyntheticParams {
        &self.params
    }

    pub fn state_dim(&self) -> usize {
        self.b.len()
    }

    fn mean_of(&self, theta: &[f64]) -> DVector<f64> {
        &self.a * DVector::from_column_slice(theta) + &self.b
    }

    /// Stationary per-coordinate variance `σ² / (1 - ρ²)`.
    pub fn stationary_variance(&self) -> f64 {
        let s = self.params.sigma_eps;
        s * s / (1.0 - self.params.rho_mix * self.params.rho_mix)
    }

    /// `f(θ) = E_{μ_θ}[F(θ; ξ)]` in closed form.
    pub fn objective(&self, theta: &[f64]) -> f64 {
        let mean = self.mean_of(theta);
        let ridge: f64 = theta.iter().map(|t| t * t).sum::<f64>() * self.params.ridge;
        mean.norm_squared() + self.state_dim() as f64 * self.stationary_variance() + ridge
    }

    /// `∇f(θ) = 2Aᵀ(Aθ + b) + 2λθ`.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let g = self.a.transpose() * self.mean_of(theta) * 2.0
            + DVector::from_column_slice(theta) * (2.0 * self.params.ridge);
        g.as_slice().to_vec()
    }

    /// Minimizer of `f` over the box and its value.
    pub fn optimum(&self) -> (DesignVector, f64) {
        synthetic_optimum(self)
    }
}

pub fn synthetic_step(
    state: &SyntheticState,
    theta: &DesignVector,
    env: &SyntheticEnv,
    rng: &mut StreamRng,
) -> SyntheticState {
    let rho = env.params.rho_mix;
    let mean = env.mean_of(theta.as_slice());
    let sigma = env.params.sigma_eps;
    SyntheticState(
        state
            .0
            .iter()
            .zip(mean.iter())
            .map(|(x, mu)| {
                let eps: f64 = rng.sample(StandardNormal);
                rho * x + (1.0 - rho) * mu + sigma * eps
            })
            .collect(),
    )
}

pub fn synthetic_cost(theta: &DesignVector, state: &SyntheticState, params: &SyntheticParams) -> f64 {
    let xi: f64 = state.0.iter().map(|x| x * x).sum();
    let th: f64 = theta.as_slice().iter().map(|t| t * t).sum();
    xi + params.ridge * th
}

/// Closed form when the unconstrained minimizer is feasible; otherwise
/// projected gradient descent with stepsize `1/L` from the clamped point.
pub fn synthetic_optimum(env: &SyntheticEnv) -> (DesignVector, f64) {
    let d = env.dimension();
    let hessian = env.a.transpose() * &env.a + DMatrix::identity(d, d) * env.params.ridge;
    let rhs = -(env.a.transpose() * &env.b);
    let unconstrained = hessian.clone().lu().solve(&rhs);
    let start = match unconstrained {
        Some(x) => DesignVector::new(x.as_slice().to_vec()).ok(),
        None => None,
    };
    let mut theta = match start {
        Some(x) if env.domain.contains(&x) => {
            let f = env.objective(x.as_slice());
            return (x, f);
        }
        Some(x) => env.domain.project(&x).expect("dimension checked"),
        None => env.domain.midpoint(),
    };
    let lipschitz = 2.0 * hessian.symmetric_eigenvalues().amax().max(1e-12);
    for _ in 0..200_000 {
        let g = env.gradient(theta.as_slice());
        let next = env
            .domain
            .project(&theta.offset(&g, -1.0 / lipschitz))
            .expect("dimension checked");
        let moved = next.distance(&theta);
        theta = next;
        if moved < 1e-15 {
            break;
        }
    }
    let f = env.objective(theta.as_slice());
    (theta, f)
}

impl Environment for SyntheticEnv {
    type State = SyntheticState;

    fn name(&self) -> &str {
        "synthetic"
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn initial_state(&self, _rng: &mut StreamRng) -> Result<SyntheticState, EnvError> {
        Ok(SyntheticState(
            self.params
                .initial_state
                .clone()
                .unwrap_or_else(|| vec![0.0; self.state_dim()]),
        ))
    }

    fn step(
        &self,
        state: &SyntheticState,
        theta: &DesignVector,
        rng: &mut StreamRng,
    ) -> Result<SyntheticState, EnvError> {
        self.check_design(theta)?;
        Ok(synthetic_step(state, theta, self, rng))
    }

    fn evaluate(&self, theta: &DesignVector, state: &SyntheticState) -> f64 {
        synthetic_cost(theta, state, &self.params)
    }

    fn explicit_gradient(&self, theta: &DesignVector, _state: &SyntheticState) -> Option<Vec<f64>> {
        self.has_explicit_gradient().then(|| {
            theta
                .as_slice()
                .iter()
                .map(|t| 2.0 * self.params.ridge * t)
                .collect()
        })
    }

    fn has_explicit_gradient(&self) -> bool {
        self.params.ridge > 0.0
    }

    fn queries_per_step(&self) -> u64 {
        1
    }
}
