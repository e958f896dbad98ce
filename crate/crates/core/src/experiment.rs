//! Declarative experiment blocks: one environment, one algorithm, a list of
//! seeds, and where to write the artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{ChatTransport, FixtureTransport, HttpTransport, LlmBackend, TransportConfig};
use crate::baselines::{self, BaselineError, BoConfig, LlmBaselineConfig, SolverVariant};
use crate::design::BoxDomain;
use crate::env::{EnvError, Environment};
use crate::envs::contest::{self, BehavioralStub, ContestBackend, ContestEnv, ContestParams, PersonaPool};
use crate::envs::supply_chain::{self, RuleCoefficients, SupplyChainBackend, SupplyChainConfig, SupplyChainEnv};
use crate::envs::synthetic::{SyntheticEnv, SyntheticParams};
use crate::optimizers::{self, Algorithm, OptimizerError, RunConfig, VarianceReduction};
use crate::record::{RunResult, DEFAULT_CURVE_WINDOW};
use crate::schedule::ScheduleConfig;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("{algorithm} cannot run on the {environment} environment: {reason}")]
    Incompatible {
        algorithm: AlgorithmName,
        environment: String,
        reason: String,
    },
    #[error("environment setup failed: {0}")]
    Env(#[from] EnvError),
    #[error("seed {seed}: {source}")]
    Optimizer {
        seed: u64,
        #[source]
        source: OptimizerError,
    },
    #[error("seed {seed}: {source}")]
    Baseline {
        seed: u64,
        #[source]
        source: BaselineError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlgorithmName {
    #[serde(rename = "OTL")]
    Otl,
    #[serde(rename = "OTL-GP")]
    OtlGp,
    #[serde(rename = "OTL-RF")]
    OtlRf,
    #[serde(rename = "MTL")]
    Mtl,
    #[serde(rename = "MTL-RF")]
    MtlRf,
    #[serde(rename = "BO")]
    Bo,
    #[serde(rename = "LLM-solver")]
    LlmSolver,
    #[serde(rename = "LLM-solver-CoT")]
    LlmSolverCot,
    #[serde(rename = "LLM-designer")]
    LlmDesigner,
}

impl std::fmt::Display for AlgorithmName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant serializes");
        f.write_str(s.as_str().expect("string"))
    }
}

impl AlgorithmName {
    fn optimizer(self) -> Option<(Algorithm, VarianceReduction)> {
        use AlgorithmName::*;
        match self {
            Otl => Some((Algorithm::Otl, VarianceReduction::None)),
            OtlGp => Some((Algorithm::Otl, VarianceReduction::Gp)),
            OtlRf => Some((Algorithm::Otl, VarianceReduction::Rf)),
            Mtl => Some((Algorithm::Mtl, VarianceReduction::None)),
            MtlRf => Some((Algorithm::Mtl, VarianceReduction::Rf)),
            Bo | LlmSolver | LlmSolverCot | LlmDesigner => None,
        }
    }

    fn uses_model(self) -> bool {
        matches!(self, AlgorithmName::LlmSolver | AlgorithmName::LlmSolverCot | AlgorithmName::LlmDesigner)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContestSettings {
    pub params: ContestParams,
    pub stub: BehavioralStub,
    /// Persona CSV; the bundled pool when absent.
    pub personas: Option<PathBuf>,
    pub design_box: Option<BoxSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupplyChainSettings {
    pub config: SupplyChainConfig,
    pub rules: RuleCoefficients,
    pub design_box: Option<BoxSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    Synthetic(SyntheticParams),
    SupplyChain(SupplyChainSettings),
    Contest(ContestSettings),
}

/// A chat endpoint, or a directory of recorded replies keyed by prompt hash.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmEndpoint {
    pub transport: TransportConfig,
    pub fixtures: Option<PathBuf>,
}

impl LlmEndpoint {
    pub fn backend(&self) -> LlmBackend {
        let transport: Arc<dyn ChatTransport> = match &self.fixtures {
            Some(dir) => Arc::new(FixtureTransport::new(dir.clone())),
            None => Arc::new(HttpTransport::new(&self.transport)),
        };
        LlmBackend::new(self.transport.clone(), transport)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    #[default]
    RuleBased,
    Llm(LlmEndpoint),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budget {
    /// Optimizer iterations, BO or solver samples, or designer rounds.
    pub iterations: Option<u64>,
    /// Cap on cumulative model queries; converted to iterations.
    pub query_cap: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentConfig,
    pub algorithm: AlgorithmName,
    #[serde(default)]
    pub schedule: Option<ScheduleConfig>,
    pub budget: Budget,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub backend: BackendConfig,
    /// Model behind the LLM baselines; the environment backend's model
    /// when absent.
    #[serde(default)]
    pub baseline_model: Option<LlmEndpoint>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub mtl_horizon: Option<u64>,
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    #[serde(default)]
    pub allow_rf_with_explicit_gradient: bool,
    #[serde(default)]
    pub bo: BoConfig,
    #[serde(default)]
    pub llm_baseline: LlmBaselineConfig,
    #[serde(default = "default_window")]
    pub curve_window: usize,
}

fn default_window() -> usize {
    DEFAULT_CURVE_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub seed: u64,
    pub jsonl: String,
    pub csv: String,
    pub jsonl_sha256: String,
    pub total_env_steps: u64,
    pub total_queries: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub crate_version: String,
    pub config_sha256: String,
    pub algorithm: AlgorithmName,
    pub environment: String,
    pub seeds: Vec<u64>,
    pub iterations: u64,
    pub outputs: Vec<ManifestEntry>,
    /// Everything needed to repeat the run.
    pub config: ExperimentConfig,
}

#[derive(Debug, Deserialize)]
struct ManifestProbe {
    config: ExperimentConfig,
}

impl ExperimentConfig {
    /// Reads a TOML or JSON experiment file, or the `config` block of a
    /// previously written manifest.
    pub fn from_path(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let parse = |message: String| ExperimentError::Parse {
            path: path.to_path_buf(),
            message,
        };
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if is_json {
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse(e.to_string()))?;
            if value.get("manifest_version").is_some() {
                let probe: ManifestProbe = serde_json::from_value(value).map_err(|e| parse(e.to_string()))?;
                Ok(probe.config)
            } else {
                serde_json::from_value(value).map_err(|e| parse(e.to_string()))
            }
        } else {
            toml::from_str(&text).map_err(|e| parse(e.to_string()))
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Parse {
            path: PathBuf::from("<inline>"),
            message: e.to_string(),
        })
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    fn schedule(&self) -> ScheduleConfig {
        self.schedule.unwrap_or_default()
    }

    fn horizon(&self) -> u64 {
        self.mtl_horizon.unwrap_or(1)
    }

    fn invalid(field: &'static str, message: impl Into<String>) -> ExperimentError {
        ExperimentError::Invalid {
            field,
            message: message.into(),
        }
    }

    fn validate_fields(&self) -> Result<(), ExperimentError> {
        if self.seeds.is_empty() {
            return Err(Self::invalid("seeds", "at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Self::invalid("seeds", "seeds must be distinct"));
        }
        match (self.budget.iterations, self.budget.query_cap) {
            (None, None) => return Err(Self::invalid("budget", "set `iterations` or `query_cap`")),
            (Some(_), Some(_)) => return Err(Self::invalid("budget", "set only one of `iterations` and `query_cap`")),
            (Some(0), _) | (_, Some(0)) => return Err(Self::invalid("budget", "must be positive")),
            _ => {}
        }
        if self.mtl_horizon == Some(0) {
            return Err(Self::invalid("mtl_horizon", "must be positive"));
        }
        if self.mtl_horizon.is_some() && !matches!(self.algorithm, AlgorithmName::Mtl | AlgorithmName::MtlRf) {
            return Err(Self::invalid("mtl_horizon", "only applies to MTL and MTL-RF"));
        }
        if self.curve_window == 0 {
            return Err(Self::invalid("curve_window", "must be positive"));
        }
        if self.algorithm == AlgorithmName::Bo {
            self.bo.validate().map_err(|e| Self::invalid("bo", e.to_string()))?;
        }
        if self.algorithm.uses_model() && self.model_endpoint().is_none() {
            return Err(Self::invalid(
                "baseline_model",
                "LLM baselines need `baseline_model` or an `llm` backend",
            ));
        }
        if matches!(self.environment, EnvironmentConfig::Synthetic(_)) && matches!(self.backend, BackendConfig::Llm(_)) {
            return Err(Self::invalid("backend", "the synthetic environment has no agents to back with a model"));
        }
        Ok(())
    }

    fn model_endpoint(&self) -> Option<&LlmEndpoint> {
        self.baseline_model.as_ref().or(match &self.backend {
            BackendConfig::Llm(e) => Some(e),
            BackendConfig::RuleBased => None,
        })
    }

    /// Field checks, environment construction, and the
    /// algorithm-environment compatibility rules.
    pub fn validate(&self) -> Result<Plan, ExperimentError> {
        self.validate_fields()?;
        let env = BuiltEnv::build(self)?;
        with_env!(&env, e => self.plan_for(e))
    }

    fn run_config(&self, iterations: u64, seed: u64) -> RunConfig {
        let (algorithm, variance_reduction) = self.algorithm.optimizer().expect("optimizer algorithm");
        RunConfig {
            algorithm,
            schedule: self.schedule(),
            iterations,
            variance_reduction,
            mtl_horizon: self.horizon(),
            theta0: self.theta0.clone(),
            seed,
            allow_rf_with_explicit_gradient: self.allow_rf_with_explicit_gradient,
        }
    }

    /// Queries per iteration as `(fixed, per_iteration)`.
    fn query_rate<E: Environment>(&self, env: &E) -> (u64, u64) {
        use AlgorithmName::*;
        let q = env.queries_per_step();
        let t = self.horizon();
        match self.algorithm {
            Otl | OtlGp => (0, 3 * q),
            OtlRf => (q, 2 * q),
            Mtl => (0, 2 * t * q),
            MtlRf => (t * q, t * q),
            Bo => (0, self.bo.horizon * q),
            LlmSolver | LlmSolverCot => (0, self.llm_baseline.horizon * q + 1),
            LlmDesigner => (0, q + 1),
        }
    }

    fn plan_for<E: Environment>(&self, env: &E) -> Result<Plan, ExperimentError> {
        let incompatible = |reason: String| ExperimentError::Incompatible {
            algorithm: self.algorithm,
            environment: env.name().to_string(),
            reason,
        };
        if let Some(theta0) = &self.theta0 {
            if theta0.len() != env.dimension() {
                return Err(Self::invalid(
                    "theta0",
                    format!("has {} entries, the design has {}", theta0.len(), env.dimension()),
                ));
            }
        }
        if self.algorithm.optimizer().is_some() {
            optimizers::prepare(env, &self.run_config(1, 0)).map_err(|e| match e {
                optimizers::ConfigError::GuidedWithoutGradient => {
                    incompatible("guided perturbation needs an explicit gradient, which this cost lacks".into())
                }
                optimizers::ConfigError::ResidualWithGradient => incompatible(e.to_string()),
                other => Self::invalid("algorithm", other.to_string()),
            })?;
        } else if self.theta0.is_some() && self.algorithm != AlgorithmName::LlmDesigner {
            return Err(Self::invalid("theta0", "only used by the gradient methods and the designer"));
        }
        let (fixed, per) = self.query_rate(env);
        let iterations = match (self.budget.iterations, self.budget.query_cap) {
            (Some(k), _) => k,
            (None, Some(_)) if per == 0 => {
                return Err(Self::invalid("budget", "query_cap needs an environment whose steps consume model queries"))
            }
            (None, Some(cap)) => cap.saturating_sub(fixed) / per,
            _ => unreachable!("validated"),
        };
        if iterations == 0 {
            return Err(Self::invalid("budget", "query cap is smaller than one iteration"));
        }
        if self.algorithm == AlgorithmName::Bo && (iterations as usize) < self.bo.initial_points {
            return Err(Self::invalid("budget", "BO budget is below the initial design size"));
        }
        Ok(Plan {
            environment: env.name().to_string(),
            dimension: env.dimension(),
            iterations,
            queries_per_iteration: per,
            seeds: self.seeds.clone(),
        })
    }
}

/// What a validated block will do.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub environment: String,
    pub dimension: usize,
    pub iterations: u64,
    pub queries_per_iteration: u64,
    pub seeds: Vec<u64>,
}

enum BuiltEnv {
    Synthetic(SyntheticEnv),
    SupplyChain(SupplyChainEnv),
    Contest(ContestEnv),
}

macro_rules! with_env {
    ($env:expr, $e:ident => $body:expr) => {
        match $env {
            BuiltEnv::Synthetic($e) => $body,
            BuiltEnv::SupplyChain($e) => $body,
            BuiltEnv::Contest($e) => $body,
        }
    };
}
use with_env;

fn domain_from(spec: &Option<BoxSpec>, default: BoxDomain) -> Result<BoxDomain, ExperimentError> {
    match spec {
        None => Ok(default),
        Some(b) => BoxDomain::new(b.lower.clone(), b.upper.clone())
            .map_err(|e| ExperimentConfig::invalid("environment.design_box", e.to_string())),
    }
}

impl BuiltEnv {
    fn build(cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let model = match &cfg.backend {
            BackendConfig::RuleBased => None,
            BackendConfig::Llm(e) => Some(e.backend()),
        };
        Ok(match &cfg.environment {
            EnvironmentConfig::Synthetic(p) => BuiltEnv::Synthetic(SyntheticEnv::new(p.clone())?),
            EnvironmentConfig::SupplyChain(s) => {
                let backend = match model {
                    None => SupplyChainBackend::Rules(s.rules.clone()),
                    Some(m) => SupplyChainBackend::Llm(m),
                };
                let domain = domain_from(&s.design_box, supply_chain::default_design_box())?;
                BuiltEnv::SupplyChain(SupplyChainEnv::new(s.config.clone(), domain, backend)?)
            }
            EnvironmentConfig::Contest(c) => {
                let backend = match model {
                    None => ContestBackend::Stub(c.stub.clone()),
                    Some(m) => ContestBackend::Llm(m),
                };
                let pool = match &c.personas {
                    None => PersonaPool::builtin(),
                    Some(p) => PersonaPool::from_path(p)
                        .map_err(|e| ExperimentConfig::invalid("environment.personas", e.to_string()))?,
                };
                let domain = domain_from(&c.design_box, contest::default_design_box())?;
                BuiltEnv::Contest(ContestEnv::new(c.params.clone(), domain, backend, pool)?)
            }
        })
    }
}

fn truncate_to_cap(mut result: RunResult, cap: Option<u64>) -> RunResult {
    let Some(cap) = cap else { return result };
    if result.total_queries <= cap {
        return result;
    }
    result.records.retain(|r| r.cumulative_queries <= cap);
    match result.records.last() {
        Some(last) => {
            result.total_env_steps = last.cumulative_env_steps;
            result.total_queries = last.cumulative_queries;
            result.final_theta = last.theta.clone();
        }
        None => {
            result.total_env_steps = 0;
            result.total_queries = 0;
        }
    }
    result
}

fn run_one<E: Environment>(
    cfg: &ExperimentConfig,
    env: &E,
    iterations: u64,
    seed: u64,
) -> Result<RunResult, ExperimentError> {
    use AlgorithmName::*;
    let baseline = |source| ExperimentError::Baseline { seed, source };
    let n = iterations as usize;
    let model = || cfg.model_endpoint().expect("validated").backend();
    let result = match cfg.algorithm {
        Otl | OtlGp | OtlRf | Mtl | MtlRf => optimizers::run(env, &cfg.run_config(iterations, seed))
            .map_err(|source| ExperimentError::Optimizer { seed, source })?,
        Bo => baselines::bo_run(env, n, &cfg.bo, seed).map_err(baseline)?,
        LlmSolver => baselines::llm_solver_run(env, n, &model(), SolverVariant::Plain, &cfg.llm_baseline, seed)
            .map_err(baseline)?,
        LlmSolverCot => baselines::llm_solver_run(env, n, &model(), SolverVariant::Cot, &cfg.llm_baseline, seed)
            .map_err(baseline)?,
        LlmDesigner => baselines::llm_designer_run_from(env, n, &model(), &cfg.llm_baseline, cfg.theta0.as_deref(), seed)
            .map_err(baseline)?,
    };
    Ok(truncate_to_cap(result, cfg.budget.query_cap))
}

/// Runs a single seed without touching the disk.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<RunResult, ExperimentError> {
    let plan = cfg.validate()?;
    let env = BuiltEnv::build(cfg)?;
    with_env!(&env, e => run_one(cfg, e, plan.iterations, seed))
}

pub fn seed_file_stem(seed: u64) -> String {
    format!("seed-{seed}")
}

/// Runs every seed of the block, in parallel, and writes one JSONL and one
/// CSV per seed plus `manifest.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Manifest, ExperimentError> {
    let plan = cfg.validate()?;
    let env = BuiltEnv::build(cfg)?;
    let results: Vec<Result<RunResult, ExperimentError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .seeds
            .iter()
            .map(|&seed| {
                let env = &env;
                let iterations = plan.iterations;
                scope.spawn(move || with_env!(env, e => run_one(cfg, e, iterations, seed)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("seed worker panicked")).collect()
    });

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut outputs = Vec::with_capacity(cfg.seeds.len());
    for (&seed, result) in cfg.seeds.iter().zip(results) {
        let result = result?;
        let stem = seed_file_stem(seed);
        let jsonl_name = format!("{stem}.jsonl");
        let csv_name = format!("{stem}.csv");
        let jsonl = result.to_jsonl_string();
        let jsonl_path = dir.join(&jsonl_name);
        fs::write(&jsonl_path, &jsonl).map_err(io_err(&jsonl_path))?;
        let csv_path = dir.join(&csv_name);
        let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
        result.write_csv(BufWriter::new(file), cfg.curve_window)?;
        outputs.push(ManifestEntry {
            seed,
            jsonl: jsonl_name,
            csv: csv_name,
            jsonl_sha256: hex::encode(Sha256::digest(jsonl.as_bytes())),
            total_env_steps: result.total_env_steps,
            total_queries: result.total_queries,
        });
    }
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: cfg.hash(),
        algorithm: cfg.algorithm,
        environment: plan.environment,
        seeds: cfg.seeds.clone(),
        iterations: plan.iterations,
        outputs,
        config: cfg.clone(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}

/// One row of the cross-seed summary written by [`report`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub iteration: u64,
    pub seeds: usize,
    pub cumulative_queries_mean: f64,
    pub objective_mean: f64,
    pub objective_sd: f64,
    pub objective_running_mean: f64,
}

/// Aggregates every `seed-*.jsonl` in `dir` into a per-iteration summary
/// across seeds and writes it as CSV to `out`.
pub fn report(dir: &Path, out: &Path, window: usize) -> Result<Vec<ReportRow>, ExperimentError> {
    let mut runs = Vec::new();
    let entries = fs::read_dir(dir).map_err(io_err(dir))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "jsonl")
                && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("seed-"))
        })
        .collect();
    paths.sort();
    for p in &paths {
        let file = fs::File::open(p).map_err(io_err(p))?;
        runs.push(RunResult::read_jsonl(BufReader::new(file)).map_err(io_err(p))?);
    }
    if runs.is_empty() {
        return Err(ExperimentError::Io {
            path: dir.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, "no seed-*.jsonl files"),
        });
    }
    let mut by_k: BTreeMap<u64, Vec<(u64, f64)>> = BTreeMap::new();
    for run in &runs {
        for r in run {
            by_k.entry(r.k).or_default().push((r.cumulative_queries, r.objective));
        }
    }
    let mut rows = Vec::with_capacity(by_k.len());
    let mut means: Vec<f64> = Vec::with_capacity(by_k.len());
    for (k, v) in by_k {
        let n = v.len() as f64;
        let q = v.iter().map(|x| x.0 as f64).sum::<f64>() / n;
        let m = v.iter().map(|x| x.1).sum::<f64>() / n;
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x.1 - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        means.push(m);
        let lo = means.len().saturating_sub(window.max(1));
        let tail = &means[lo..];
        rows.push(ReportRow {
            iteration: k,
            seeds: v.len(),
            cumulative_queries_mean: q,
            objective_mean: m,
            objective_sd: sd,
            objective_running_mean: tail.iter().sum::<f64>() / tail.len() as f64,
        });
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let file = fs::File::create(out).map_err(io_err(out))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io_err(out))?;
    Ok(rows)
}

/// Contest oracle table header.
pub const ORACLE_COLUMNS: [&str; 6] = ["K", "t_star", "E_star", "e_hat_star", "S_star", "R_star"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleRow {
    pub k: f64,
    pub cutoff: f64,
    pub entry_fee: f64,
    pub reserve: f64,
    pub shared_prize: Option<f64>,
    pub total_effort: f64,
}

pub fn contest_oracle(ks: &[f64], params: &ContestParams) -> Result<Vec<OracleRow>, ExperimentError> {
    params
        .validate()
        .map_err(|e| ExperimentConfig::invalid("params", e.to_string()))?;
    ks.iter()
        .map(|&k| {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(ExperimentConfig::invalid("k", format!("{k} is not a finite nonnegative liability")));
            }
            let d = contest::optimal_design(k, params);
            Ok(OracleRow {
                k,
                cutoff: d.cutoff,
                entry_fee: d.entry_fee,
                reserve: d.reserve,
                shared_prize: d.shared_prize,
                total_effort: contest::max_total_effort(k, params),
            })
        })
        .collect()
}

pub fn write_oracle_csv<W: io::Write>(rows: &[OracleRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ORACLE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            format!("{:.6}", r.cutoff),
            format!("{:.6}", r.entry_fee),
            format!("{:.6}", r.reserve),
            r.shared_prize.map(|s| format!("{s:.6}")).unwrap_or_default(),
            format!("{:.6}", r.total_effort),
        ])?;
    }
    w.flush()?;
    Ok(())
}
