//! Simulated systems the optimizers act on.

pub mod contest;
pub mod supply_chain;
pub mod synthetic;

pub use contest::{ContestBackend, ContestDesign, ContestEnv, ContestOutcome, ContestParams};
pub use supply_chain::{SupplyChainBackend, SupplyChainConfig, SupplyChainEnv, SupplyChainState};
pub use synthetic::{SyntheticEnv, SyntheticParams, SyntheticState};
