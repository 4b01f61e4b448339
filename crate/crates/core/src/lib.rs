//! Selfish-mining simulator with an adaptive timestamp-weighted fork
//! resolution defense.

pub mod attack;
pub mod chain;
pub mod defense;
pub mod error;
pub mod la;
pub mod sim;

pub use attack::{AttackerState, ReleaseDirective, Strategy};
pub use chain::{Block, BlockId, Branch, ForkSet, Owner, Settlement};
pub use defense::{
    chain_selection, tie_breaking_select, DecisionKind, Defender, FailSafe, FailSafeAction, Policy,
};
pub use error::{Error, Result};
pub use la::{ActionId, LearningAutomaton, LearningScheme, ReinforcementSignal, SchemeKind};
pub use sim::{
    default_alpha_grid, relative_revenue, run, sample_owner, threshold_sweep, AttackerKind,
    RunResult, SimConfig, SweepPoint, SweepResult,
};
