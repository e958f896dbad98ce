use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::{terminal_sample, BaselineError, BaselineFailure};
use crate::agents::{
    act, ActionSchema, Binding, ChatRequest, ChatTransport, LlmBackend, PromptTemplate, TransportError,
};
use crate::design::DesignVector;
use crate::env::{Environment, StateView};
use crate::record::{Evaluation, IterationRecord, RunResult};
use crate::rng::SeedTree;

/// Forwards to an inner transport and counts completed round trips.
pub struct CountingTransport {
    inner: Arc<dyn ChatTransport>,
    calls: AtomicU64,
}

impl CountingTransport {
    pub fn new(inner: Arc<dyn ChatTransport>) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatTransport for CountingTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverVariant {
    Plain,
    Cot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmBaselineConfig {
    /// Trajectory length behind each solver sample.
    pub horizon: u64,
    /// Most recent history entries shown in a prompt.
    pub history_limit: usize,
}

impl Default for LlmBaselineConfig {
    fn default() -> Self {
        Self {
            horizon: 100,
            history_limit: 50,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PromptFile {
    #[allow(dead_code)]
    version: u32,
    role: String,
    attributes: String,
    design: String,
    context: String,
    output: String,
    empty_history: String,
    #[serde(default)]
    history_header: String,
    #[serde(default)]
    plain: String,
    #[serde(default)]
    cot: String,
}

struct LoadedPrompt {
    template: PromptTemplate,
    file: PromptFile,
}

fn load(text: &str) -> LoadedPrompt {
    let file: PromptFile = toml::from_str(text).expect("bundled prompt file parses");
    let template = PromptTemplate::new(&file.role, &file.attributes, &file.design, &file.context, &file.output)
        .expect("bundled prompt file is a valid template");
    LoadedPrompt { template, file }
}

fn solver_prompt() -> &'static LoadedPrompt {
    static CELL: OnceLock<LoadedPrompt> = OnceLock::new();
    CELL.get_or_init(|| load(include_str!("../../prompts/solver.toml")))
}

fn designer_prompt() -> &'static LoadedPrompt {
    static CELL: OnceLock<LoadedPrompt> = OnceLock::new();
    CELL.get_or_init(|| load(include_str!("../../prompts/designer.toml")))
}

fn design_schema<E: Environment>(env: &E) -> ActionSchema {
    let labels = env.design_labels();
    let dom = env.domain();
    let fields: Vec<(&str, f64, f64)> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), dom.lower()[i], dom.upper()[i]))
        .collect();
    ActionSchema::clamped(&fields)
}

fn domain_text<E: Environment>(env: &E) -> String {
    let dom = env.domain();
    env.design_labels()
        .iter()
        .enumerate()
        .map(|(i, l)| format!("- {l} in [{:.4}, {:.4}]", dom.lower()[i], dom.upper()[i]))
        .collect::<Vec<_>>()
        .join("\n")
}

fn design_text(labels: &[String], theta: &DesignVector) -> String {
    let parts: Vec<String> = labels.iter().zip(theta.as_slice()).map(|(l, v)| format!("{l} = {v:.4}")).collect();
    parts.join(", ")
}

fn history_text(labels: &[String], history: &[(DesignVector, f64)], limit: usize) -> Option<String> {
    if history.is_empty() {
        return None;
    }
    let start = history.len().saturating_sub(limit);
    Some(
        history[start..]
            .iter()
            .map(|(t, c)| format!("{} -> {c:.4}", design_text(labels, t)))
            .collect::<Vec<_>>()
            .join("\n"),
    )
}

fn design_from_action<E: Environment>(
    env: &E,
    labels: &[String],
    values: &std::collections::BTreeMap<String, f64>,
) -> DesignVector {
    let v: Vec<f64> = labels.iter().map(|l| values[l]).collect();
    let theta = DesignVector::new(v).expect("clamped values are finite");
    env.domain().project(&theta).expect("schema matches the design dimension")
}

fn queries(steps: u64, qps: u64, counter: &CountingTransport) -> u64 {
    steps * qps + counter.calls()
}

/// A language model proposes designs from the history of past proposals
/// and their terminal costs; every proposal is scored by a fresh
/// trajectory from the run's fixed initial state.
pub fn llm_solver_run<E: Environment>(
    env: &E,
    budget: usize,
    backend: &LlmBackend,
    variant: SolverVariant,
    cfg: &LlmBaselineConfig,
    seed: u64,
) -> Result<RunResult, BaselineError> {
    if cfg.horizon == 0 {
        return Err(BaselineError::Config("horizon must be positive".into()));
    }
    let prompt = solver_prompt();
    let schema = design_schema(env);
    let labels = env.design_labels();
    let counter = CountingTransport::new(backend.transport.clone());
    let tree = SeedTree::new(seed);
    let mut init = tree.stream("initial");
    let mut trans = tree.stream("transition");
    let mut result = RunResult::empty(labels.clone(), env.domain().midpoint());
    let abort = |source: BaselineFailure, result: RunResult| BaselineError::Aborted {
        source,
        partial: Box::new(result),
    };
    let xi0 = match env.initial_state(&mut init) {
        Ok(s) => s,
        Err(e) => return Err(abort(e.into(), result)),
    };

    let strategy = match variant {
        SolverVariant::Plain => prompt.file.plain.clone(),
        SolverVariant::Cot => prompt.file.cot.clone(),
    };
    let mut history: Vec<(DesignVector, f64)> = Vec::new();
    let mut steps = 0u64;
    let mut last = (env.domain().midpoint(), 0.0);

    for k in 0..budget {
        let history_block = match history_text(&labels, &history, cfg.history_limit) {
            Some(h) => format!("{}\n{h}", prompt.file.history_header),
            None => prompt.file.empty_history.clone(),
        };
        let binding = Binding::new()
            .with("DIM", env.dimension().to_string())
            .with("DOMAIN", domain_text(env))
            .with("HISTORY", history_block)
            .with("STRATEGY", strategy.clone())
            .with("OUTPUT", schema.instructions());
        let proposal = match act(&prompt.template, &binding, &schema, &backend.config, &counter) {
            Ok(a) => a,
            Err(e) if e.is_extraction() => {
                log::warn!("solver iteration {k} skipped: {e}");
                result.push(IterationRecord {
                    k: k as u64,
                    theta: last.0.clone(),
                    gradient_norm: None,
                    f_evals: Vec::new(),
                    objective: last.1,
                    cumulative_env_steps: steps,
                    cumulative_queries: queries(steps, env.queries_per_step(), &counter),
                    seed,
                    skipped: true,
                    weight: None,
                });
                continue;
            }
            Err(e) => return Err(abort(e.into(), result)),
        };
        let theta = design_from_action(env, &labels, &proposal.values);
        steps += cfg.horizon;
        let cost = match terminal_sample(env, &xi0, &theta, cfg.horizon, &mut trans) {
            Ok(c) => c,
            Err(e) => return Err(abort(e.into(), result)),
        };
        history.push((theta.clone(), cost));
        last = (theta.clone(), cost);
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
            cumulative_queries: queries(steps, env.queries_per_step(), &counter),
            seed,
            skipped: false,
            weight: None,
        });
    }
    if let Some((theta, _)) = history.iter().min_by(|a, b| a.1.total_cmp(&b.1)) {
        result.final_theta = theta.clone();
    }
    Ok(result)
}

fn state_text<S: StateView>(state: &S) -> String {
    state
        .components()
        .into_iter()
        .map(|(n, v)| format!("{n}: {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A language model acts as the designer inside the running system: each
/// round it sees the last outcome and sets the design for the next round.
pub fn llm_designer_run<E: Environment>(
    env: &E,
    rounds: usize,
    backend: &LlmBackend,
    cfg: &LlmBaselineConfig,
    seed: u64,
) -> Result<RunResult, BaselineError> {
    llm_designer_run_from(env, rounds, backend, cfg, None, seed)
}

/// [`llm_designer_run`] with the first round's design given explicitly
/// (projected into the box) instead of the box midpoint.
pub fn llm_designer_run_from<E: Environment>(
    env: &E,
    rounds: usize,
    backend: &LlmBackend,
    cfg: &LlmBaselineConfig,
    theta0: Option<&[f64]>,
    seed: u64,
) -> Result<RunResult, BaselineError> {
    let prompt = designer_prompt();
    let schema = design_schema(env);
    let labels = env.design_labels();
    let counter = CountingTransport::new(backend.transport.clone());
    let tree = SeedTree::new(seed);
    let mut init = tree.stream("initial");
    let mut trans = tree.stream("transition");
    let mut result = RunResult::empty(labels.clone(), env.domain().midpoint());
    let abort = |source: BaselineFailure, result: RunResult| BaselineError::Aborted {
        source,
        partial: Box::new(result),
    };
    let mut state = match env.initial_state(&mut init) {
        Ok(s) => s,
        Err(e) => return Err(abort(e.into(), result)),
    };
    let mut theta = match theta0 {
        None => env.domain().midpoint(),
        Some(v) => DesignVector::new(v.to_vec())
            .and_then(|t| env.domain().project(&t))
            .map_err(|e| BaselineError::Config(format!("initial design: {e}")))?,
    };
    let mut history: Vec<(DesignVector, f64)> = Vec::new();
    let mut steps = 0u64;

    for k in 0..rounds {
        state = match env.step(&state, &theta, &mut trans) {
            Ok(s) => s,
            Err(e) => return Err(abort(e.into(), result)),
        };
        steps += 1;
        let cost = env.evaluate(&theta, &state);
        let used = theta.clone();

        let binding = Binding::new()
            .with("DOMAIN", domain_text(env))
            .with("CURRENT", design_text(&labels, &theta))
            .with("ROUND", (k + 1).to_string())
            .with("STATE", state_text(&state))
            .with("COST", cost)
            .with(
                "HISTORY",
                history_text(&labels, &history, cfg.history_limit).unwrap_or_else(|| prompt.file.empty_history.clone()),
            )
            .with("OUTPUT", schema.instructions());
        history.push((used.clone(), cost));
        let skipped = match act(&prompt.template, &binding, &schema, &backend.config, &counter) {
            Ok(a) => {
                theta = design_from_action(env, &labels, &a.values);
                false
            }
            Err(e) if e.is_extraction() => {
                log::warn!("designer round {k}: keeping the current design after {e}");
                true
            }
            Err(e) => return Err(abort(BaselineFailure::Agent(e), result)),
        };
        result.push(IterationRecord {
            k: k as u64,
            theta: used.clone(),
            gradient_norm: None,
            f_evals: vec![Evaluation {
                theta: used.as_slice().to_vec(),
                cost,
            }],
            objective: cost,
            cumulative_env_steps: steps,
            cumulative_queries: queries(steps, env.queries_per_step(), &counter),
            seed,
            skipped,
            weight: None,
        });
    }
    result.final_theta = theta;
    Ok(result)
}
