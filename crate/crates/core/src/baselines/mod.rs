//! Benchmarks: Bayesian optimization on terminal-state samples, and
//! language-model solver and designer loops.

pub mod gp;
mod llm;

pub use gp::{matern52, GaussianProcess, GpError};
pub use llm::{llm_designer_run, llm_designer_run_from, llm_solver_run, CountingTransport, LlmBaselineConfig, SolverVariant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentError;
use crate::design::DesignVector;
use crate::env::{EnvError, Environment};
use crate::record::{Evaluation, IterationRecord, RunResult};
use crate::rng::{SeedTree, StreamRng};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("invalid baseline configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("run aborted after {} samples: {source}", partial.records.len())]
    Aborted {
        #[source]
        source: BaselineFailure,
        partial: Box<RunResult>,
    },
}

#[derive(Debug, Error)]
pub enum BaselineFailure {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Gp(#[from] GpError),
}

impl BaselineError {
    pub fn partial(&self) -> Option<&RunResult> {
        match self {
            BaselineError::Aborted { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    /// Matérn smoothness; only 2.5 is implemented.
    pub smoothness: f64,
    /// Kernel lengthscale, in unit-cube coordinates of the design box.
    pub lengthscale: f64,
    pub jitter: f64,
    /// Trajectory length behind each sample.
    pub horizon: u64,
    pub initial_points: usize,
    pub restarts: usize,
    /// Best random candidates that get a local polish.
    pub polish_starts: usize,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            smoothness: 2.5,
            lengthscale: 1.0,
            jitter: 1e-6,
            horizon: 100,
            initial_points: 8,
            restarts: 512,
            polish_starts: 4,
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.smoothness != 2.5 {
            return Err(BaselineError::Config("only Matérn smoothness 2.5 is supported".into()));
        }
        if !(self.jitter > 0.0) {
            return Err(BaselineError::Config("jitter must be positive".into()));
        }
        if !(self.lengthscale > 0.0) {
            return Err(BaselineError::Config("lengthscale must be positive".into()));
        }
        if self.horizon == 0 || self.initial_points == 0 || self.restarts == 0 {
            return Err(BaselineError::Config("horizon, initial_points and restarts must be positive".into()));
        }
        Ok(())
    }
}

/// Van der Corput radical inverse of `i` in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// First `n` Halton points in `[0,1]^d`, skipping the origin.
pub fn halton(n: usize, d: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    assert!(d <= PRIMES.len(), "Halton sequence supports up to {} dimensions", PRIMES.len());
    (1..=n as u64).map(|i| PRIMES[..d].iter().map(|&b| radical_inverse(i, b)).collect()).collect()
}

/// Runs `horizon` steps from `start` under `theta` and returns the terminal cost.
pub(crate) fn terminal_sample<E: Environment>(
    env: &E,
    start: &E::State,
    theta: &DesignVector,
    horizon: u64,
    rng: &mut StreamRng,
) -> Result<f64, EnvError> {
    let mut s = env.step(start, theta, rng)?;
    for _ in 1..horizon {
        s = env.step(&s, theta, rng)?;
    }
    Ok(env.evaluate(theta, &s))
}

fn to_unit<E: Environment>(env: &E, theta: &DesignVector) -> Vec<f64> {
    let dom = env.domain();
    (0..theta.dim())
        .map(|i| {
            let w = dom.upper()[i] - dom.lower()[i];
            if w > 0.0 {
                (theta[i] - dom.lower()[i]) / w
            } else {
                0.0
            }
        })
        .collect()
}

/// Compass search on EI inside the unit cube.
fn polish(gp: &GaussianProcess, start: Vec<f64>, best: f64) -> (Vec<f64>, f64) {
    let mut x = start;
    let mut val = gp.expected_improvement(&x, best);
    let mut step = 0.05;
    for _ in 0..12 {
        let mut moved = true;
        while moved {
            moved = false;
            for i in 0..x.len() {
                for sign in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[i] = (y[i] + sign * step).clamp(0.0, 1.0);
                    let v = gp.expected_improvement(&y, best);
                    if v > val {
                        x = y;
                        val = v;
                        moved = true;
                    }
                }
            }
        }
        step *= 0.5;
    }
    (x, val)
}

/// Maximizer of expected improvement over the unit cube.
pub fn maximize_ei(gp: &GaussianProcess, d: usize, cfg: &BoConfig, rng: &mut StreamRng) -> (Vec<f64>, f64) {
    let (_, best) = gp.incumbent();
    let mut scored: Vec<(Vec<f64>, f64)> = (0..cfg.restarts)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let v = gp.expected_improvement(&x, best);
            (x, v)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored
        .into_iter()
        .take(cfg.polish_starts.max(1))
        .map(|(x, _)| polish(gp, x, best))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one restart")
}

/// Bayesian optimization where every sample is the terminal cost of a
/// fresh trajectory from the run's fixed initial state.
pub fn bo_run<E: Environment>(env: &E, budget: usize, cfg: &BoConfig, seed: u64) -> Result<RunResult, BaselineError> {
    cfg.validate()?;
    if budget < cfg.initial_points {
        return Err(BaselineError::Config(format!(
            "budget {budget} is below the initial design size {}",
            cfg.initial_points
        )));
    }
    let tree = SeedTree::new(seed);
    let mut init = tree.stream("initial");
    let mut trans = tree.stream("transition");
    let mut acq = tree.stream("acquisition");
    let d = env.dimension();
    let mut result = RunResult::empty(env.design_labels(), env.domain().midpoint());
    let abort = |source: BaselineFailure, result: RunResult| BaselineError::Aborted {
        source,
        partial: Box::new(result),
    };
    let xi0 = match env.initial_state(&mut init) {
        Ok(s) => s,
        Err(e) => return Err(abort(e.into(), result)),
    };

    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(budget);
    let mut ys: Vec<f64> = Vec::with_capacity(budget);
    let mut steps = 0u64;
    let initial = halton(cfg.initial_points, d);

    for k in 0..budget {
        let unit = if k < cfg.initial_points {
            initial[k].clone()
        } else {
            let gp = match GaussianProcess::fit(xs.clone(), &ys, cfg.lengthscale, cfg.jitter) {
                Ok(gp) => gp,
                Err(e) => return Err(abort(e.into(), result)),
            };
            maximize_ei(&gp, d, cfg, &mut acq).0
        };
        let theta = env.domain().from_unit(&unit);
        steps += cfg.horizon;
        let cost = match terminal_sample(env, &xi0, &theta, cfg.horizon, &mut trans) {
            Ok(c) => c,
            Err(e) => return Err(abort(e.into(), result)),
        };
        xs.push(to_unit(env, &theta));
        ys.push(cost);
        result.push(IterationRecord {
            k: k as u64,
            theta: theta.clone(),
            gradient_norm: None,
            f_evals: vec![Evaluation {
                theta: theta.as_slice().to_vec(),
                cost,
            }],
            objective: cost,
            cumulative_env_steps: steps,
            cumulative_queries: steps * env.queries_per_step(),
            seed,
            skipped: false,
            weight: None,
        });
    }
    let best = ys
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| result.records[i].theta.clone());
    if let Some(b) = best {
        result.final_theta = b;
    }
    Ok(result)
}

/// Lowest observed objective in a run.
pub fn best_observed(result: &RunResult) -> Option<(DesignVector, f64)> {
    result
        .records
        .iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .map(|r| (r.theta.clone(), r.objective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::synthetic::{SyntheticEnv, SyntheticParams};

    #[test]
    fn halton_prefix() {
        let h = halton(4, 2);
        assert_eq!(h[0], vec![0.5, 1.0 / 3.0]);
        assert_eq!(h[1], vec![0.25, 2.0 / 3.0]);
        assert_eq!(h[2], vec![0.75, 1.0 / 9.0]);
    }

    #[test]
    fn budget_below_initial_design_is_rejected() {
        let env = SyntheticEnv::new(SyntheticParams::identity(2, 0.5, 0.0, 0.0)).unwrap();
        assert!(matches!(bo_run(&env, 3, &BoConfig::default(), 0), Err(BaselineError::Config(_))));
        let bad = BoConfig {
            jitter: 0.0,
            ..BoConfig::default()
        };
        assert!(bo_run(&env, 10, &bad, 0).is_err());
    }

    #[test]
    fn accounting_and_determinism() {
        let env = SyntheticEnv::new(SyntheticParams::identity(2, 0.5, 0.5, 0.1)).unwrap();
        let cfg = BoConfig {
            horizon: 10,
            restarts: 64,
            ..BoConfig::default()
        };
        let a = bo_run(&env, 12, &cfg, 3).unwrap();
        assert_eq!(a.total_env_steps, 120);
        assert_eq!(a.records.len(), 12);
        assert_eq!(a, bo_run(&env, 12, &cfg, 3).unwrap());
        assert!(a.records.iter().all(|r| env.domain().contains(&r.theta)));
    }
}
