use std::collections::BTreeMap;

use thiserror::Error;

use crate::crypto::Digest;
use crate::domain::{compute_payoff, evaluate_round, is_consensus, is_settled, Action, AgentId};
use crate::network::Round;

use super::block::{Block, MAX_BLOCK_BYTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RejectReason {
    #[error("previous hash does not match the chain tip")]
    LinkageError,
    #[error("height is not tip + 1")]
    HeightMismatch,
    #[error("timestamp precedes the chain tip")]
    TimestampRegression,
    #[error("timestamp is not the tip's plus the deliberation's completion time")]
    TimestampMismatch,
    #[error("body digest does not match the body")]
    BodyDigestMismatch,
    #[error("header outcome differs from the record")]
    OutcomeMismatch,
    #[error("block exceeds the size cap")]
    Oversize,
    #[error("record violates its structural invariants")]
    MalformedRecord,
    #[error("utterance signature or digest invalid")]
    BadSignature,
    #[error("transcript does not match the recorded actions")]
    TranscriptMismatch,
    #[error("recorded consensus differs from recomputation")]
    ConsensusMismatch,
    #[error("recorded payoff differs from recomputation")]
    PayoffMismatch,
    #[error("a turn before the last already settled the deliberation")]
    EarlyExitViolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("block rejected: {reason}")]
pub struct BlockRejected {
    pub reason: RejectReason,
}

impl From<RejectReason> for BlockRejected {
    fn from(reason: RejectReason) -> Self {
        BlockRejected { reason }
    }
}

/// Checks `block` as the successor of `tip` (`None` for the genesis
/// predecessor). Pure; recomputes consensus and payoff from the record and
/// cross-checks the record against the signed transcript.
pub fn verify_block(tip: Option<&Block>, block: &Block) -> Result<(), BlockRejected> {
    use RejectReason::*;
    let (height, prev_hash, ts) = match tip {
        Some(t) => (t.header.height + 1, t.hash(), t.header.timestamp),
        None => (1, Digest::ZERO, 0),
    };
    let h = &block.header;
    if h.prev_hash != prev_hash {
        return Err(LinkageError.into());
    }
    if h.height != height {
        return Err(HeightMismatch.into());
    }
    if h.timestamp < ts {
        return Err(TimestampRegression.into());
    }
    if ts.checked_add(block.body.record.completed_at) != Some(h.timestamp) {
        return Err(TimestampMismatch.into());
    }
    let body = block.body.to_bytes();
    if Digest::of(&body) != h.body_digest {
        return Err(BodyDigestMismatch.into());
    }
    if crate::ledger::block::HEADER_BYTES + 4 + body.len() > MAX_BLOCK_BYTES {
        return Err(Oversize.into());
    }
    let record = &block.body.record;
    if h.outcome != record.outcome {
        return Err(OutcomeMismatch.into());
    }
    if !record.is_well_formed()
        || record.max_turns == 0
        || record.min_participants as usize > record.agents.len()
        || record.actions_by_round.len() > record.max_turns as usize + 1
    {
        return Err(MalformedRecord.into());
    }
    if compute_payoff(record) != record.payoff {
        return Err(PayoffMismatch.into());
    }
    if !record.outcome.is_success() {
        return if block.body.transcript.is_empty() {
            Ok(())
        } else {
            Err(TranscriptMismatch.into())
        };
    }

    let kind = record.problem.kind;
    verify_transcript(block)?;

    let rounds = &record.actions_by_round;
    if rounds.len() < 2 {
        return Err(MalformedRecord.into());
    }
    let evaluate = |round: &BTreeMap<AgentId, Action>| {
        evaluate_round(kind, round, record.theta)
            .map_err(|_| BlockRejected::from(ConsensusMismatch))
    };
    let last = rounds.len() - 1;
    let outcome = evaluate(&rounds[last])?;
    if outcome != record.consensus || !is_consensus(kind, &outcome) {
        return Err(ConsensusMismatch.into());
    }
    if record.participants() < record.min_participants as usize {
        return Err(ConsensusMismatch.into());
    }
    if last < record.max_turns as usize && !is_settled(kind, &outcome) {
        return Err(ConsensusMismatch.into());
    }
    for round in &rounds[1..last] {
        let earlier = evaluate(round)?;
        let participating = round.values().filter(|a| !a.is_abstention()).count();
        if is_settled(kind, &earlier) && participating >= record.min_participants as usize {
            return Err(EarlyExitViolation.into());
        }
    }
    Ok(())
}

/// The transcript holds exactly one valid utterance per agent and recorded
/// round, in order, each matching its recorded action.
fn verify_transcript(block: &Block) -> Result<(), BlockRejected> {
    use RejectReason::*;
    let record = &block.body.record;
    let kind = record.problem.kind;
    let n = record.agents.len();
    let transcript = &block.body.transcript;
    if transcript.len() != n * record.actions_by_round.len() {
        return Err(TranscriptMismatch.into());
    }
    for (i, u) in transcript.iter().enumerate() {
        if u.check_for(kind).is_err() {
            return Err(BadSignature.into());
        }
        let (t, slot) = (i / n, i % n);
        let round = if t == 0 {
            Round::Initial
        } else {
            Round::Reflection
        };
        if u.deliberation_id != record.deliberation_id
            || u.round != round
            || u.turn as usize != t
            || u.agent != record.agents[slot]
            || record.actions_by_round[t].get(&u.agent) != Some(&u.action.without_argument())
        {
            return Err(TranscriptMismatch.into());
        }
    }
    Ok(())
}
