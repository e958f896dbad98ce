//! Single-round innovation contest: entry fee, reserve effort and shared
//! prize set by the designer; contestants decide whether to enter and how
//! much effort to exert.

pub mod analytic;
mod behavior;
mod llm;
mod persona;

pub use analytic::{cutoff, equilibrium_effort, max_total_effort, optimal_design, virtual_ability, OptimalDesign};
pub use behavior::{BehavioralStub, ContestantDecision};
pub use llm::{contestant_schema, contestant_template};
pub use persona::{Persona, PersonaPool};

use rand::{Rng, RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentError, LlmBackend};
use crate::design::{BoxDomain, DesignVector};
use crate::env::{EnvError, Environment, StateValue, StateView};
use crate::rng::StreamRng;

#[derive(Debug, Error)]
pub enum ContestError {
    #[error("ability {t} outside support [{low}, {high}]")]
    AbilityOutOfSupport { t: f64, low: f64, high: f64 },
    #[error("contestant {index} has negative or non-finite effort {effort}")]
    InvalidEffort { index: usize, effort: f64 },
    #[error("contestant {index} did not enter but was given effort {effort}")]
    EffortWithoutEntry { index: usize, effort: f64 },
    #[error("{entries} entry flags but {efforts} efforts")]
    LengthMismatch { entries: usize, efforts: usize },
    #[error("invalid persona: {0}")]
    Persona(String),
    #[error("persona file: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid contest parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContestParams {
    pub contestants: usize,
    pub prize: f64,
    /// `t0`, the designer's inverse marginal benefit of effort.
    pub designer_cost: f64,
    pub ability_low: f64,
    pub ability_high: f64,
    /// Most effort a contestant can exert in one round.
    pub endowment: f64,
}

impl Default for ContestParams {
    fn default() -> Self {
        Self {
            contestants: 3,
            prize: 120.0,
            designer_cost: 0.0,
            ability_low: 1.0,
            ability_high: 2.0,
            endowment: 300.0,
        }
    }
}

impl ContestParams {
    pub fn validate(&self) -> Result<(), ContestError> {
        if self.contestants < 2 {
            return Err(ContestError::Params("need at least two contestants".into()));
        }
        if !(self.ability_low > 0.0 && self.ability_high > self.ability_low) {
            return Err(ContestError::Params("ability support must be 0 < a < b".into()));
        }
        if !(self.prize >= 0.0 && self.endowment >= 0.0 && self.designer_cost >= 0.0) {
            return Err(ContestError::Params("prize, endowment and t0 must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `(E, ê, S)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContestDesign {
    pub entry_fee: f64,
    pub reserve: f64,
    pub shared_prize: f64,
}

impl ContestDesign {
    pub fn new(entry_fee: f64, reserve: f64, shared_prize: f64) -> Self {
        Self {
            entry_fee,
            reserve,
            shared_prize,
        }
    }

    pub fn from_theta(theta: &DesignVector) -> Self {
        Self::new(theta[0], theta[1], theta[2])
    }

    pub fn to_theta(self) -> DesignVector {
        DesignVector::new(vec![self.entry_fee, self.reserve, self.shared_prize])
            .expect("finite contest design")
    }
}

pub fn default_design_box() -> BoxDomain {
    BoxDomain::new(vec![0.0, 0.0, 0.0], vec![300.0, 1000.0, 300.0]).expect("static box")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolution {
    pub winner: Option<usize>,
    pub payoffs: Vec<f64>,
    pub total_effort: f64,
}

/// Payoffs of one round. Effort strictly above the reserve wins; ties at
/// the top are broken uniformly with `tie_rng`, which is only consumed
/// when a tie actually occurs.
pub fn resolve(
    design: &ContestDesign,
    prize: f64,
    entered: &[bool],
    efforts: &[f64],
    tie_rng: &mut StreamRng,
) -> Result<Resolution, ContestError> {
    if entered.len() != efforts.len() {
        return Err(ContestError::LengthMismatch {
            entries: entered.len(),
            efforts: efforts.len(),
        });
    }
    for (index, (&e, &x)) in entered.iter().zip(efforts).enumerate() {
        if !(x.is_finite() && x >= 0.0) {
            return Err(ContestError::InvalidEffort { index, effort: x });
        }
        if !e && x > 0.0 {
            return Err(ContestError::EffortWithoutEntry { index, effort: x });
        }
    }
    let entrants: Vec<usize> = (0..entered.len()).filter(|&i| entered[i]).collect();
    let fee = design.entry_fee;
    let total_effort: f64 = efforts.iter().sum();
    let top = entrants.iter().map(|&i| efforts[i]).fold(f64::NEG_INFINITY, f64::max);

    let mut payoffs = vec![0.0; entered.len()];
    let winner = if !entrants.is_empty() && top > design.reserve {
        let leaders: Vec<usize> = entrants.iter().copied().filter(|&i| efforts[i] == top).collect();
        let w = if leaders.len() == 1 {
            leaders[0]
        } else {
            leaders[tie_rng.random_range(0..leaders.len())]
        };
        for &i in &entrants {
            payoffs[i] = -fee;
        }
        payoffs[w] = prize + entrants.len() as f64 * fee - fee;
        Some(w)
    } else {
        for &i in &entrants {
            payoffs[i] = design.shared_prize - fee;
        }
        None
    };
    Ok(Resolution {
        winner,
        payoffs,
        total_effort,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContestOutcome {
    pub design: ContestDesign,
    pub abilities: Vec<f64>,
    pub personas: Vec<Persona>,
    pub entered: Vec<bool>,
    pub efforts: Vec<f64>,
    pub winner: Option<usize>,
    pub payoffs: Vec<f64>,
    pub total_effort: f64,
}

impl ContestOutcome {
    pub fn entrants(&self) -> usize {
        self.entered.iter().filter(|&&e| e).count()
    }
}

impl StateView for ContestOutcome {
    fn components(&self) -> Vec<(String, StateValue)> {
        let mut out = vec![
            ("total_effort".to_string(), StateValue::Number(self.total_effort)),
            ("entrants".to_string(), StateValue::Number(self.entrants() as f64)),
            (
                "winner".to_string(),
                match self.winner {
                    Some(w) => StateValue::Number(w as f64),
                    None => StateValue::Text("none".into()),
                },
            ),
        ];
        for i in 0..self.abilities.len() {
            out.push((format!("ability_{i}"), StateValue::Number(self.abilities[i])));
            out.push((format!("entered_{i}"), StateValue::Number(f64::from(u8::from(self.entered[i])))));
            out.push((format!("effort_{i}"), StateValue::Number(self.efforts[i])));
            out.push((format!("payoff_{i}"), StateValue::Number(self.payoffs[i])));
        }
        out
    }
}

/// Who decides for the contestants.
#[derive(Debug, Clone)]
pub enum ContestBackend {
    Stub(BehavioralStub),
    Llm(LlmBackend),
}

/// Draw abilities and personas, collect every contestant's decision, and
/// resolve the round.
pub fn simulate_round(
    design: &ContestDesign,
    params: &ContestParams,
    backend: &ContestBackend,
    pool: &PersonaPool,
    rng: &mut StreamRng,
) -> Result<ContestOutcome, EnvError> {
    let n = params.contestants;
    // Separate generators per consumer, seeded from the round stream, so a
    // change in how many draws one consumer makes never shifts another.
    let mut ability_rng = StreamRng::seed_from_u64(rng.next_u64());
    let mut persona_rng = StreamRng::seed_from_u64(rng.next_u64());
    let mut behavior_rng = StreamRng::seed_from_u64(rng.next_u64());
    let mut tie_rng = StreamRng::seed_from_u64(rng.next_u64());

    let abilities: Vec<f64> = (0..n)
        .map(|_| ability_rng.random_range(params.ability_low..params.ability_high))
        .collect();
    let personas: Vec<Persona> = (0..n).map(|_| pool.draw(&mut persona_rng).clone()).collect();

    let decisions: Vec<ContestantDecision> = match backend {
        ContestBackend::Stub(stub) => (0..n)
            .map(|i| stub.decide(design, params, abilities[i], &personas[i], &mut behavior_rng))
            .collect(),
        ContestBackend::Llm(llm) => llm_decisions(llm, design, params, &abilities, &personas)?,
    };

    let entered: Vec<bool> = decisions.iter().map(|d| d.enter).collect();
    let efforts: Vec<f64> = decisions
        .iter()
        .map(|d| if d.enter { d.effort.clamp(0.0, params.endowment) } else { 0.0 })
        .collect();
    let res = resolve(design, params.prize, &entered, &efforts, &mut tie_rng)
        .map_err(|e| EnvError::InvalidState(e.to_string()))?;
    Ok(ContestOutcome {
        design: *design,
        abilities,
        personas,
        entered,
        efforts,
        winner: res.winner,
        payoffs: res.payoffs,
        total_effort: res.total_effort,
    })
}

fn llm_decisions(
    llm: &LlmBackend,
    design: &ContestDesign,
    params: &ContestParams,
    abilities: &[f64],
    personas: &[Persona],
) -> Result<Vec<ContestantDecision>, EnvError> {
    let template = contestant_template();
    let schema = contestant_schema(params.endowment);
    let query = |i: usize| -> Result<ContestantDecision, AgentError> {
        let binding = llm::binding(design, params, abilities[i], &personas[i]);
        let action = llm.act(&template, &binding, &schema)?;
        Ok(ContestantDecision {
            enter: action.get("Enter") >= 0.5,
            effort: action.get("Effort"),
        })
    };
    // Moves are simultaneous, so the queries may run side by side.
    let results: Vec<Result<ContestantDecision, AgentError>> = if llm.config.max_in_flight > 1 {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..abilities.len()).map(|i| s.spawn(move || query(i))).collect();
            handles.into_iter().map(|h| h.join().expect("contestant query panicked")).collect()
        })
    } else {
        (0..abilities.len()).map(query).collect()
    };
    results.into_iter().map(|r| r.map_err(EnvError::from)).collect()
}

/// The contest as an environment. The cost is the negated total effort, and
/// the design enters it only through the contestants' behavior.
#[derive(Debug, Clone)]
pub struct ContestEnv {
    params: ContestParams,
    domain: BoxDomain,
    backend: ContestBackend,
    pool: PersonaPool,
}

impl ContestEnv {
    pub fn new(
        params: ContestParams,
        domain: BoxDomain,
        backend: ContestBackend,
        pool: PersonaPool,
    ) -> Result<Self, EnvError> {
        params.validate().map_err(|e| EnvError::InvalidState(e.to_string()))?;
        if domain.dim() != 3 {
            return Err(EnvError::Dimension {
                expected: 3,
                got: domain.dim(),
            });
        }
        Ok(Self {
            params,
            domain,
            backend,
            pool,
        })
    }

    /// Behavioral stub, default parameters, default box, built-in personas.
    pub fn with_stub() -> Self {
        Self::new(
            ContestParams::default(),
            default_design_box(),
            ContestBackend::Stub(BehavioralStub::default()),
            PersonaPool::builtin(),
        )
        .expect("default contest is valid")
    }

    pub fn params(&self) -> &ContestParams {
        &self.params
    }

    pub fn backend(&self) -> &ContestBackend {
        &self.backend
    }
}

impl Environment for ContestEnv {
    type State = ContestOutcome;

    fn name(&self) -> &str {
        "contest"
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn design_labels(&self) -> Vec<String> {
        vec!["entry_fee".into(), "reserve".into(), "shared_prize".into()]
    }

    fn initial_state(&self, _rng: &mut StreamRng) -> Result<ContestOutcome, EnvError> {
        let n = self.params.contestants;
        Ok(ContestOutcome {
            design: ContestDesign::new(0.0, 0.0, 0.0),
            abilities: vec![self.params.ability_low; n],
            personas: Vec::new(),
            entered: vec![false; n],
            efforts: vec![0.0; n],
            winner: None,
            payoffs: vec![0.0; n],
            total_effort: 0.0,
        })
    }

    fn step(&self, _state: &ContestOutcome, theta: &DesignVector, rng: &mut StreamRng) -> Result<ContestOutcome, EnvError> {
        self.check_design(theta)?;
        let clamped = self.domain.project(theta).map_err(|e| EnvError::InvalidState(e.to_string()))?;
        let design = ContestDesign::from_theta(&clamped);
        simulate_round(&design, &self.params, &self.backend, &self.pool, rng)
    }

    fn evaluate(&self, _theta: &DesignVector, state: &ContestOutcome) -> f64 {
        -state.total_effort
    }

    fn has_explicit_gradient(&self) -> bool {
        false
    }

    fn queries_per_step(&self) -> u64 {
        self.params.contestants as u64
    }
}
