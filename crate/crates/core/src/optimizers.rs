//! On-trajectory and multi-trajectory zeroth-order design optimization,
//! each with plain, guided-perturbation and residual-feedback variants.
//!
//! On-trajectory learning (OTL) perturbs the design from the current state
//! of a single running system and then advances that system one step under
//! the unperturbed design. Multi-trajectory learning (MTL) restarts both
//! perturbed trajectories from a fixed initial state every iteration and
//! runs them for `T` steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{project, DesignError, DesignVector};
use crate::env::{EnvError, Environment};
use crate::estimators::{
    advance_weight, gp_estimate, rf_estimate, sample_guided, sample_isotropic, two_point_estimate, GuidedConfig,
};
use crate::record::{Evaluation, IterationRecord, RunResult};
use crate::rng::{SeedTree, StreamRng};
use crate::schedule::{delta_at, eta_at, validate_schedule, ScheduleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceReduction {
    #[default]
    None,
    Gp,
    Rf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Otl,
    Mtl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub schedule: ScheduleConfig,
    pub iterations: u64,
    pub variance_reduction: VarianceReduction,
    /// Inner trajectory length `T` for MTL.
    pub mtl_horizon: u64,
    /// Starting design; the midpoint of the box when absent.
    pub theta0: Option<Vec<f64>>,
    pub seed: u64,
    /// Permit residual feedback on a cost that depends on the design directly.
    pub allow_rf_with_explicit_gradient: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Otl,
            schedule: ScheduleConfig::default(),
            iterations: 100,
            variance_reduction: VarianceReduction::None,
            mtl_horizon: 1,
            theta0: None,
            seed: 0,
            allow_rf_with_explicit_gradient: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("guided perturbation needs an environment with an explicit design gradient")]
    GuidedWithoutGradient,
    #[error("residual feedback on a cost with an explicit design gradient requires allow_rf_with_explicit_gradient")]
    ResidualWithGradient,
    #[error("MTL horizon must be at least 1")]
    ZeroHorizon,
    #[error("initial design: {0}")]
    InitialDesign(#[from] DesignError),
}

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The environment failed in a way that cannot be skipped. The
    /// trajectory up to the failure is kept.
    #[error("run aborted at iteration {iteration}: {source}")]
    Aborted {
        iteration: u64,
        #[source]
        source: EnvError,
        partial: Box<RunResult>,
    },
}

impl OptimizerError {
    pub fn partial(&self) -> Option<&RunResult> {
        match self {
            OptimizerError::Aborted { partial, .. } => Some(partial),
            OptimizerError::Config(_) => None,
        }
    }
}

/// Checks the configuration against the environment and returns the
/// projected starting design.
pub fn prepare<E: Environment>(env: &E, cfg: &RunConfig) -> Result<DesignVector, ConfigError> {
    cfg.schedule.check_ranges().map_err(ConfigError::Schedule)?;
    // Failed summability conditions are logged, not fatal.
    let _ = validate_schedule(&cfg.schedule);
    match cfg.variance_reduction {
        VarianceReduction::Gp if !env.has_explicit_gradient() => return Err(ConfigError::GuidedWithoutGradient),
        VarianceReduction::Rf if env.has_explicit_gradient() && !cfg.allow_rf_with_explicit_gradient => {
            return Err(ConfigError::ResidualWithGradient)
        }
        VarianceReduction::Rf if env.has_explicit_gradient() => {
            log::warn!("residual feedback with an explicit design gradient; the estimator ignores ∂F/∂θ");
        }
        _ => {}
    }
    if cfg.algorithm == Algorithm::Mtl && cfg.mtl_horizon == 0 {
        return Err(ConfigError::ZeroHorizon);
    }
    let theta0 = match &cfg.theta0 {
        Some(v) => DesignVector::new(v.clone())?,
        None => env.domain().midpoint(),
    };
    Ok(project(&theta0, env.domain())?)
}

pub fn run<E: Environment>(env: &E, cfg: &RunConfig) -> Result<RunResult, OptimizerError> {
    match cfg.algorithm {
        Algorithm::Otl => otl_run(env, cfg),
        Algorithm::Mtl => mtl_run(env, cfg),
    }
}

fn shifted(theta: &DesignVector, u: &[f64], scale: f64) -> DesignVector {
    theta.offset(u, scale)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Shared bookkeeping across iterations.
struct Driver<'a, E: Environment> {
    env: &'a E,
    cfg: &'a RunConfig,
    d: usize,
    steps: u64,
    weight: f64,
    f_prev: Option<f64>,
    pert: StreamRng,
    trans: StreamRng,
    result: RunResult,
    last_objective: f64,
}

/// What one iteration produced before the design update.
struct Estimate {
    g: Option<Vec<f64>>,
    evals: Vec<Evaluation>,
    objective: f64,
}

impl<'a, E: Environment> Driver<'a, E> {
    fn new(env: &'a E, cfg: &'a RunConfig, theta: DesignVector) -> Self {
        let tree = SeedTree::new(cfg.seed);
        Self {
            env,
            cfg,
            d: env.dimension(),
            steps: 0,
            weight: cfg.schedule.w0,
            f_prev: None,
            pert: tree.stream("perturbation"),
            trans: tree.stream("transition"),
            result: RunResult::empty(env.design_labels(), theta),
            last_objective: 0.0,
        }
    }

    fn step(&mut self, state: &E::State, theta: &DesignVector) -> Result<E::State, EnvError> {
        self.steps += 1;
        self.env.step(state, theta, &mut self.trans)
    }

    /// `T` steps from `start` under `theta`, returning the terminal cost.
    fn trajectory(&mut self, start: &E::State, theta: &DesignVector, horizon: u64) -> Result<(E::State, f64), EnvError> {
        let mut s = self.step(start, theta)?;
        for _ in 1..horizon {
            s = self.step(&s, theta)?;
        }
        let f = self.env.evaluate(theta, &s);
        Ok((s, f))
    }

    fn direction(&mut self, theta: &DesignVector, state: &E::State) -> Vec<f64> {
        match self.cfg.variance_reduction {
            VarianceReduction::Gp => {
                let phi = self
                    .env
                    .explicit_gradient(theta, state)
                    .unwrap_or_else(|| vec![0.0; self.d]);
                let guide = GuidedConfig {
                    weight: self.weight,
                    surrogate: phi,
                    rho: self.cfg.schedule.rho,
                };
                sample_guided(&guide, self.d, &mut self.pert)
            }
            _ => sample_isotropic(self.d, &mut self.pert),
        }
    }

    /// Residual feedback needs a previous perturbed evaluation before the
    /// first iteration; this spends one extra trajectory to get it.
    fn bootstrap(&mut self, theta: &DesignVector, start: &E::State, horizon: u64) -> Result<Vec<Evaluation>, EnvError> {
        let delta = delta_at(&self.cfg.schedule, 0);
        let u = sample_isotropic(self.d, &mut self.pert);
        let plus = shifted(theta, &u, delta);
        let (_, f) = self.trajectory(start, &plus, horizon)?;
        self.f_prev = Some(f);
        Ok(vec![Evaluation {
            theta: plus.into_inner(),
            cost: f,
        }])
    }

    /// Perturbed evaluations from `start` and the resulting estimate.
    fn estimate(&mut self, k: u64, theta: &DesignVector, start: &E::State, horizon: u64) -> Result<Estimate, EnvError> {
        let delta = delta_at(&self.cfg.schedule, k);
        let u = self.direction(theta, start);
        let plus = shifted(theta, &u, delta);
        let (_, f_plus) = self.trajectory(start, &plus, horizon)?;
        let mut evals = vec![Evaluation {
            theta: plus.into_inner(),
            cost: f_plus,
        }];
        if self.cfg.variance_reduction == VarianceReduction::Rf {
            let prev = self.f_prev.expect("bootstrapped");
            self.f_prev = Some(f_plus);
            let g = rf_estimate(self.d, &u, delta, f_plus, prev);
            return Ok(Estimate {
                g: g.is_finite().then_some(g.g),
                evals,
                objective: f_plus,
            });
        }
        let minus = shifted(theta, &u, -delta);
        let (_, f_minus) = self.trajectory(start, &minus, horizon)?;
        evals.push(Evaluation {
            theta: minus.into_inner(),
            cost: f_minus,
        });
        let g = match self.cfg.variance_reduction {
            VarianceReduction::Gp => gp_estimate(&u, delta, f_plus, f_minus),
            _ => two_point_estimate(self.d, &u, delta, f_plus, f_minus),
        };
        Ok(Estimate {
            g: g.is_finite().then_some(g.g),
            evals,
            objective: 0.5 * (f_plus + f_minus),
        })
    }

    fn update(&self, k: u64, theta: &DesignVector, g: &[f64]) -> DesignVector {
        let eta = eta_at(&self.cfg.schedule, k);
        project(&theta.offset(g, -eta), self.env.domain()).expect("dimension checked")
    }

    fn record(&mut self, k: u64, theta: &DesignVector, est: Option<&Estimate>, mut evals: Vec<Evaluation>, objective: Option<f64>) {
        let g = est.and_then(|e| e.g.as_deref());
        if let Some(e) = est {
            evals.extend(e.evals.iter().cloned());
        }
        let objective = objective.unwrap_or(self.last_objective);
        self.last_objective = objective;
        let skipped = g.is_none();
        if skipped {
            log::warn!("iteration {k} skipped: no usable gradient estimate");
        }
        let queries = self.steps * self.env.queries_per_step();
        self.result.push(IterationRecord {
            k,
            theta: theta.clone(),
            gradient_norm: g.map(norm),
            f_evals: evals,
            objective,
            cumulative_env_steps: self.steps,
            cumulative_queries: queries,
            seed: self.cfg.seed,
            skipped,
            weight: (self.cfg.variance_reduction == VarianceReduction::Gp).then_some(self.weight),
        });
    }

    fn abort(self, iteration: u64, source: EnvError, theta: DesignVector) -> OptimizerError {
        let mut partial = self.result;
        partial.final_theta = theta;
        partial.total_env_steps = self.steps;
        partial.total_queries = self.steps * self.env.queries_per_step();
        OptimizerError::Aborted {
            iteration,
            source,
            partial: Box::new(partial),
        }
    }

    fn advance_weight(&mut self) {
        if self.cfg.variance_reduction == VarianceReduction::Gp {
            self.weight = advance_weight(&GuidedConfig {
                weight: self.weight,
                surrogate: Vec::new(),
                rho: self.cfg.schedule.rho,
            });
        }
    }

    fn finish(mut self, theta: DesignVector) -> RunResult {
        self.result.final_theta = theta;
        self.result.total_env_steps = self.steps;
        self.result.total_queries = self.steps * self.env.queries_per_step();
        self.result
    }
}

fn initial_state<E: Environment>(env: &E, cfg: &RunConfig, theta: &DesignVector) -> Result<E::State, OptimizerError> {
    let mut init = SeedTree::new(cfg.seed).stream("initial");
    env.initial_state(&mut init).map_err(|source| OptimizerError::Aborted {
        iteration: 0,
        source,
        partial: Box::new(RunResult::empty(env.design_labels(), theta.clone())),
    })
}

/// On-trajectory learning. Per iteration: two perturbed one-step
/// transitions from the current state (one under residual feedback), a
/// projected gradient step, and one transition under the current design.
pub fn otl_run<E: Environment>(env: &E, cfg: &RunConfig) -> Result<RunResult, OptimizerError> {
    let mut theta = prepare(env, &RunConfig { algorithm: Algorithm::Otl, ..cfg.clone() })?;
    let mut xi = initial_state(env, cfg, &theta)?;
    let mut drv = Driver::new(env, cfg, theta.clone());

    let mut pending = Vec::new();
    if cfg.variance_reduction == VarianceReduction::Rf && cfg.iterations > 0 {
        match drv.bootstrap(&theta, &xi, 1) {
            Ok(e) => pending = e,
            Err(e) => return Err(drv.abort(0, e, theta)),
        }
    }

    for k in 0..cfg.iterations {
        let est = match drv.estimate(k, &theta, &xi, 1) {
            Ok(est) => Some(est),
            Err(e) if e.is_recoverable() => {
                log::warn!("iteration {k}: perturbed evaluation failed: {e}");
                None
            }
            Err(e) => return Err(drv.abort(k, e, theta)),
        };
        let next = match drv.step(&xi, &theta) {
            Ok(s) => Some(s),
            Err(e) if e.is_recoverable() => {
                log::warn!("iteration {k}: transition failed: {e}");
                None
            }
            Err(e) => return Err(drv.abort(k, e, theta)),
        };
        let objective = next.as_ref().map(|s| env.evaluate(&theta, s));
        drv.record(k, &theta, est.as_ref(), std::mem::take(&mut pending), objective);

        if let Some(g) = est.as_ref().and_then(|e| e.g.as_deref()) {
            theta = drv.update(k, &theta, g);
        }
        if let Some(s) = next {
            xi = s;
        }
        drv.advance_weight();
    }
    Ok(drv.finish(theta))
}

/// Multi-trajectory learning. Every perturbed trajectory restarts from the
/// same initial state and runs `T` steps; the estimate uses the terminal
/// costs. Residual feedback runs one trajectory per iteration.
pub fn mtl_run<E: Environment>(env: &E, cfg: &RunConfig) -> Result<RunResult, OptimizerError> {
    let mut theta = prepare(env, &RunConfig { algorithm: Algorithm::Mtl, ..cfg.clone() })?;
    let xi0 = initial_state(env, cfg, &theta)?;
    let horizon = cfg.mtl_horizon;
    let mut drv = Driver::new(env, cfg, theta.clone());

    let mut pending = Vec::new();
    if cfg.variance_reduction == VarianceReduction::Rf && cfg.iterations > 0 {
        match drv.bootstrap(&theta, &xi0, horizon) {
            Ok(e) => pending = e,
            Err(e) => return Err(drv.abort(0, e, theta)),
        }
    }

    for k in 0..cfg.iterations {
        let est = match drv.estimate(k, &theta, &xi0, horizon) {
            Ok(est) => Some(est),
            Err(e) if e.is_recoverable() => {
                log::warn!("iteration {k}: inner trajectory failed: {e}");
                None
            }
            Err(e) => return Err(drv.abort(k, e, theta)),
        };
        let objective = est.as_ref().map(|e| e.objective);
        drv.record(k, &theta, est.as_ref(), std::mem::take(&mut pending), objective);
        if let Some(g) = est.as_ref().and_then(|e| e.g.as_deref()) {
            theta = drv.update(k, &theta, g);
        }
        drv.advance_weight();
    }
    Ok(drv.finish(theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::synthetic::{SyntheticEnv, SyntheticParams};

    fn env() -> SyntheticEnv {
        SyntheticEnv::new(SyntheticParams::identity(2, 0.5, 0.5, 0.1)).unwrap()
    }

    fn cfg(mode: VarianceReduction, algorithm: Algorithm, k: u64) -> RunConfig {
        RunConfig {
            algorithm,
            iterations: k,
            variance_reduction: mode,
            mtl_horizon: 100,
            seed: 4,
            ..RunConfig::default()
        }
    }

    #[test]
    fn zero_iterations() {
        let c = RunConfig {
            iterations: 0,
            theta0: Some(vec![3.0, -1.0]),
            ..RunConfig::default()
        };
        let r = otl_run(&env(), &c).unwrap();
        assert_eq!(r.final_theta.as_slice(), &[1.0, 0.0]);
        assert_eq!(r.total_queries, 0);
        assert!(r.records.is_empty());
    }

    #[test]
    fn step_accounting() {
        let e = env();
        assert_eq!(otl_run(&e, &cfg(VarianceReduction::None, Algorithm::Otl, 10)).unwrap().total_env_steps, 30);
        assert_eq!(otl_run(&e, &cfg(VarianceReduction::Rf, Algorithm::Otl, 10)).unwrap().total_env_steps, 21);
        assert_eq!(mtl_run(&e, &cfg(VarianceReduction::None, Algorithm::Mtl, 10)).unwrap().total_env_steps, 2000);
        let mut c = cfg(VarianceReduction::Rf, Algorithm::Mtl, 10);
        c.mtl_horizon = 1;
        assert_eq!(mtl_run(&e, &c).unwrap().total_env_steps, 11);
    }

    #[test]
    fn guided_mode_requires_gradient() {
        let err = otl_run(&env(), &cfg(VarianceReduction::Gp, Algorithm::Otl, 5)).unwrap_err();
        assert!(matches!(err, OptimizerError::Config(ConfigError::GuidedWithoutGradient)));
        let ridge = SyntheticEnv::new(SyntheticParams::identity(2, 0.5, 0.5, 0.1).with_ridge(0.1)).unwrap();
        let r = otl_run(&ridge, &cfg(VarianceReduction::Gp, Algorithm::Otl, 5)).unwrap();
        let w: Vec<f64> = r.records.iter().map(|r| r.weight.unwrap()).collect();
        assert_eq!(w[0], 0.0);
        assert!((w[1] - 0.1).abs() < 1e-12 && (w[2] - 0.19).abs() < 1e-12);
    }

    #[test]
    fn residual_feedback_with_gradient_needs_override() {
        let ridge = SyntheticEnv::new(SyntheticParams::identity(2, 0.5, 0.5, 0.1).with_ridge(0.1)).unwrap();
        let mut c = cfg(VarianceReduction::Rf, Algorithm::Otl, 5);
        assert!(matches!(otl_run(&ridge, &c), Err(OptimizerError::Config(ConfigError::ResidualWithGradient))));
        c.allow_rf_with_explicit_gradient = true;
        assert!(otl_run(&ridge, &c).is_ok());
    }

    #[test]
    fn recorded_designs_are_feasible_and_deterministic() {
        let e = env();
        for mode in [VarianceReduction::None, VarianceReduction::Rf] {
            for alg in [Algorithm::Otl, Algorithm::Mtl] {
                let mut c = cfg(mode, alg, 50);
                c.mtl_horizon = 3;
                c.schedule.eta0 = 5.0;
                let a = run(&e, &c).unwrap();
                assert_eq!(a, run(&e, &c).unwrap());
                for r in &a.records {
                    assert!(e.domain().contains(&r.theta));
                }
                assert!(e.domain().contains(&a.final_theta));
            }
        }
    }

    #[test]
    fn cumulative_queries_scale_with_queries_per_step() {
        let r = otl_run(&env(), &cfg(VarianceReduction::None, Algorithm::Otl, 5)).unwrap();
        let q: Vec<u64> = r.records.iter().map(|r| r.cumulative_queries).collect();
        assert_eq!(q, vec![3, 6, 9, 12, 15]);
    }
}
