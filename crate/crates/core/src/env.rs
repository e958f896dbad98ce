//! The contract every simulated system implements: a one-round transition
//! under a fixed design, and a cost evaluated on the resulting state.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::agents::AgentError;
use crate::design::{BoxDomain, DesignVector};
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum StateValue {
    Number(f64),
    Text(String),
}

impl fmt::Display for StateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateValue::Number(v) => write!(f, "{v:.4}"),
            StateValue::Text(s) => f.write_str(s),
        }
    }
}

/// Named access to the components of a system state, for logging and for
/// prompts that summarize a round.
pub trait StateView {
    fn components(&self) -> Vec<(String, StateValue)>;

    fn numeric(&self, name: &str) -> Option<f64> {
        self.components().into_iter().find_map(|(n, v)| match v {
            StateValue::Number(x) if n == name => Some(x),
            _ => None,
        })
    }
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("agent failure: {0}")]
    Agent(#[from] AgentError),
    #[error("design has dimension {got}, environment expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
}

impl EnvError {
    /// Failures an optimizer may skip over instead of aborting the run:
    /// an agent whose output never parsed, as opposed to a dead transport.
    pub fn is_recoverable(&self) -> bool {
        matches!(self, EnvError::Agent(e) if e.is_extraction())
    }
}

pub trait Environment {
    type State: Clone + StateView;

    fn name(&self) -> &str;

    fn domain(&self) -> &BoxDomain;

    fn dimension(&self) -> usize {
        self.domain().dim()
    }

    /// Column labels for the design coordinates.
    fn design_labels(&self) -> Vec<String> {
        (0..self.dimension()).map(|i| format!("theta_{i}")).collect()
    }

    fn initial_state(&self, rng: &mut StreamRng) -> Result<Self::State, EnvError>;

    /// One round of the system under `theta`.
    fn step(
        &self,
        state: &Self::State,
        theta: &DesignVector,
        rng: &mut StreamRng,
    ) -> Result<Self::State, EnvError>;

    /// Cost `F(theta; state)`.
    fn evaluate(&self, theta: &DesignVector, state: &Self::State) -> f64;

    /// `∂F/∂theta` holding the state fixed; `None` when the cost depends on
    /// the design only through the state.
    fn explicit_gradient(&self, _theta: &DesignVector, _state: &Self::State) -> Option<Vec<f64>> {
        None
    }

    fn has_explicit_gradient(&self) -> bool;

    /// Model queries consumed by one call to [`Environment::step`].
    fn queries_per_step(&self) -> u64;

    fn check_design(&self, theta: &DesignVector) -> Result<(), EnvError> {
        if theta.dim() == self.dimension() {
            Ok(())
        } else {
            Err(EnvError::Dimension {
                expected: self.dimension(),
                got: theta.dim(),
            })
        }
    }
}
