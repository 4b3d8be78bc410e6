//! Domain types and consensus mathematics. Everything here is pure and
//! deterministic.

mod consensus;
mod record;
mod value;

use thiserror::Error;

pub use consensus::{
    accepted_policies, agreement_level, can_start, check_definitive_unanimity,
    consensus_confidence, evaluate_round, is_consensus, is_settled, ConsensusOutcome,
    ConsensusStatus, HungSet,
};
pub use record::{compute_payoff, DeliberationRecord, HungReason, RecordOutcome};
pub use value::{
    fraction_to_f64, normalize_value, Action, AgentId, CanonicalValue, Fraction, Problem,
    ProblemId, ProblemKind, Threshold,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsensusError {
    #[error("no actions to evaluate")]
    Empty,
    #[error("action variant does not match the problem kind")]
    VariantMismatch,
    #[error("threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(String),
    #[error("problem statement is empty")]
    EmptyStatement,
}
