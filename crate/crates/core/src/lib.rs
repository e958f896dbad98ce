//! Zeroth-order design optimization for simulated multi-agent service
//! systems whose state evolves as a design-controlled Markov chain.

pub mod agents;
pub mod baselines;
pub mod design;
pub mod env;
pub mod envs;
pub mod estimators;
pub mod experiment;
pub mod optimizers;
pub mod quad;
pub mod record;
pub mod rng;
pub mod schedule;
pub mod validation;

pub use design::{project, BoxDomain, DesignError, DesignVector};
pub use env::{EnvError, Environment, StateValue, StateView};
pub use record::{emit_query_curve, CurvePoint, Evaluation, IterationRecord, RunResult};
pub use rng::{SeedTree, StreamRng};
pub use schedule::{delta_at, eta_at, validate_schedule, ScheduleConfig, ScheduleReport};
