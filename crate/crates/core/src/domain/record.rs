use std::collections::BTreeMap;

use num_traits::Zero;
use serde::Serialize;

use super::consensus::{ConsensusOutcome, ConsensusStatus};
use super::value::{Action, AgentId, Fraction, Problem, ProblemKind, Threshold};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HungReason {
    /// The logical clock passed the deliberation timeout.
    Timeout,
    /// Fewer non-abstaining agents than the configured minimum.
    Participation,
    /// All turns were used without reaching consensus.
    NoConvergence,
    /// The full transcript does not fit in a block.
    Oversize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordOutcome {
    Success,
    Hung(HungReason),
}

impl RecordOutcome {
    pub fn is_success(self) -> bool {
        self == RecordOutcome::Success
    }

    pub fn tag(self) -> u8 {
        match self {
            RecordOutcome::Success => 0,
            RecordOutcome::Hung(HungReason::Timeout) => 1,
            RecordOutcome::Hung(HungReason::Participation) => 2,
            RecordOutcome::Hung(HungReason::NoConvergence) => 3,
            RecordOutcome::Hung(HungReason::Oversize) => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => RecordOutcome::Success,
            1 => RecordOutcome::Hung(HungReason::Timeout),
            2 => RecordOutcome::Hung(HungReason::Participation),
            3 => RecordOutcome::Hung(HungReason::NoConvergence),
            4 => RecordOutcome::Hung(HungReason::Oversize),
            _ => return None,
        })
    }
}

/// The parameters of one deliberation as committed to the chain.
///
/// `actions_by_round[0]` is the initial round and `actions_by_round[t]` the
/// t-th reflection turn. Only rounds that reached every node are listed.
/// Actions are stored without their argument text; the arguments live in the
/// transcript utterances.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeliberationRecord {
    pub deliberation_id: String,
    pub problem: Problem,
    /// Agents in round-robin speaking order.
    pub agents: Vec<AgentId>,
    #[serde(serialize_with = "ser_threshold")]
    pub theta: Threshold,
    pub max_turns: u32,
    pub timeout: u64,
    pub min_participants: u32,
    pub actions_by_round: Vec<BTreeMap<AgentId, Action>>,
    /// Consensus evaluated on the last listed round.
    pub consensus: ConsensusOutcome,
    pub payoff: BTreeMap<AgentId, Fraction>,
    /// Logical time, relative to the start of the deliberation.
    pub completed_at: u64,
    pub outcome: RecordOutcome,
}

fn ser_threshold<S: serde::Serializer>(t: &Threshold, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&t.to_string())
}

impl DeliberationRecord {
    pub fn confidence(&self) -> Fraction {
        self.consensus.confidence
    }

    /// Share of agents that did not abstain in the last recorded round.
    pub fn participation(&self) -> Fraction {
        match (self.final_round(), self.agents.len() as u64) {
            (Some(round), n) if n > 0 => Fraction::new(
                round.values().filter(|a| !a.is_abstention()).count() as u64,
                n,
            ),
            _ => Fraction::zero(),
        }
    }

    /// Non-abstaining agents in the last recorded round.
    pub fn participants(&self) -> usize {
        self.final_round()
            .map_or(0, |r| r.values().filter(|a| !a.is_abstention()).count())
    }

    pub fn final_round(&self) -> Option<&BTreeMap<AgentId, Action>> {
        self.actions_by_round.last()
    }

    /// Checks the structural invariants: success finishes within the
    /// timeout, and every round is keyed by exactly the agent list.
    pub fn is_well_formed(&self) -> bool {
        if self.outcome.is_success() && self.completed_at > self.timeout {
            return false;
        }
        if self.outcome.is_success() && self.actions_by_round.is_empty() {
            return false;
        }
        let mut sorted = self.agents.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.agents.len() {
            return false;
        }
        self.actions_by_round
            .iter()
            .all(|round| round.keys().eq(sorted.iter()))
    }
}

/// Per-agent payoff.
///
/// This is a bookkeeping placeholder, not an incentive scheme: each agent
/// scores the fraction of recorded rounds in which its action was consistent
/// with the final outcome (same value, or at least one accepted policy).
/// Hung deliberations pay nothing.
pub fn compute_payoff(record: &DeliberationRecord) -> BTreeMap<AgentId, Fraction> {
    let rounds = record.actions_by_round.len() as u64;
    let settled = record.outcome.is_success()
        && rounds > 0
        && record.consensus.status != ConsensusStatus::NoConsensus;
    record
        .agents
        .iter()
        .map(|agent| {
            if !settled {
                return (*agent, Fraction::zero());
            }
            let hits = record
                .actions_by_round
                .iter()
                .filter(|round| {
                    round
                        .get(agent)
                        .is_some_and(|a| consistent_with(a, record.problem.kind, &record.consensus))
                })
                .count() as u64;
            (*agent, Fraction::new(hits, rounds))
        })
        .collect()
}

fn consistent_with(action: &Action, kind: ProblemKind, outcome: &ConsensusOutcome) -> bool {
    match kind {
        ProblemKind::Definitive => {
            outcome.value.is_some() && action.value() == outcome.value.as_ref()
        }
        ProblemKind::Prioritized => {
            let accepted = outcome.accepted_set();
            action
                .policies()
                .is_some_and(|p| p.iter().any(|x| accepted.contains(x)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::consensus::check_definitive_unanimity;

    fn id(b: u8) -> AgentId {
        AgentId([b; 32])
    }

    fn record(rounds: Vec<Vec<(u8, &str)>>, outcome: RecordOutcome) -> DeliberationRecord {
        let actions_by_round: Vec<BTreeMap<AgentId, Action>> = rounds
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|(a, v)| (id(a), Action::definitive(v, "")))
                    .collect()
            })
            .collect();
        let consensus = check_definitive_unanimity(actions_by_round.last().unwrap()).unwrap();
        DeliberationRecord {
            deliberation_id: "d".into(),
            problem: Problem::definitive("p", "x?").unwrap(),
            agents: vec![id(1), id(2)],
            theta: Threshold::default(),
            max_turns: 2,
            timeout: 100,
            min_participants: 2,
            actions_by_round,
            consensus,
            payoff: BTreeMap::new(),
            completed_at: 10,
            outcome,
        }
    }

    #[test]
    fn payoff_counts_consistent_rounds() {
        let r = record(
            vec![vec![(1, "5"), (2, "7")], vec![(1, "5"), (2, "5")]],
            RecordOutcome::Success,
        );
        let pay = compute_payoff(&r);
        assert_eq!(pay[&id(1)], Fraction::new(1, 1));
        assert_eq!(pay[&id(2)], Fraction::new(1, 2));
    }

    #[test]
    fn hung_pays_nothing() {
        let r = record(
            vec![vec![(1, "5"), (2, "5")]],
            RecordOutcome::Hung(HungReason::Timeout),
        );
        assert!(compute_payoff(&r).values().all(|v| v.is_zero()));
    }

    #[test]
    fn well_formedness() {
        let mut r = record(vec![vec![(1, "5"), (2, "5")]], RecordOutcome::Success);
        assert!(r.is_well_formed());
        r.completed_at = 101;
        assert!(!r.is_well_formed());
        r.completed_at = 5;
        r.actions_by_round[0].remove(&id(2));
        assert!(!r.is_well_formed());
    }

    #[test]
    fn outcome_tags_round_trip() {
        for tag in 0..5 {
            assert_eq!(RecordOutcome::from_tag(tag).unwrap().tag(), tag);
        }
        assert!(RecordOutcome::from_tag(5).is_none());
    }
}
