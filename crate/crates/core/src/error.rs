use thiserror::Error;

use crate::chain::BlockId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    /// The available action subset is empty or carries no probability mass.
    #[error("degenerate action set")]
    DegenerateActionSet,

    #[error("action {action} out of range for automaton with {actions} actions")]
    ActionOutOfRange { action: usize, actions: usize },

    #[error("reinforcement signal {0} outside [0, 1]")]
    InvalidSignal(f64),

    /// A time window closed without any fork decision time inside it, or the
    /// weight count exceeds the decision count.
    #[error("invalid time window: {weight_decisions} weight decisions over {taus} decision times")]
    InvalidWindow { weight_decisions: u64, taus: u64 },

    #[error("block {block} has unknown parent {parent}")]
    OrphanBlock { block: BlockId, parent: BlockId },

    #[error("relative revenue undefined: no accepted blocks")]
    UndefinedRevenue,
}

pub type Result<T> = std::result::Result<T, Error>;
