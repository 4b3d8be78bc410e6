//! Unanimity and graded-consensus checks.
//!
//! Definitive problems need every evaluated agent to hold the same canonical
//! value. Prioritized problems are graded: a policy's agreement level is the
//! share of agents proposing it, policies at or above θ are accepted, and the
//! confidence is the mean agreement level of the accepted set. Levels are
//! exact rationals so any verifier recomputes them bit-for-bit.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use serde::Serialize;

use super::value::{
    Action, AgentId, CanonicalValue, Fraction, Problem, ProblemId, ProblemKind, Threshold,
};
use super::ConsensusError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsensusStatus {
    Unanimous,
    Graded,
    NoConsensus,
}

impl ConsensusStatus {
    pub fn tag(self) -> u8 {
        match self {
            ConsensusStatus::Unanimous => 0,
            ConsensusStatus::Graded => 1,
            ConsensusStatus::NoConsensus => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ConsensusStatus::Unanimous),
            1 => Some(ConsensusStatus::Graded),
            2 => Some(ConsensusStatus::NoConsensus),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConsensusOutcome<A: Ord = AgentId> {
    pub status: ConsensusStatus,
    pub confidence: Fraction,
    /// The agreed value of a unanimous definitive outcome.
    pub value: Option<CanonicalValue>,
    /// Accepted policies with their agreement levels, highest level first.
    pub accepted_policies: Vec<(CanonicalValue, Fraction)>,
    /// Unanimous: everyone. Definitive without consensus: the largest value
    /// class. Graded: agents proposing at least one accepted policy.
    pub agreeing_agents: BTreeSet<A>,
}

impl<A: Ord> ConsensusOutcome<A> {
    pub fn none() -> Self {
        ConsensusOutcome {
            status: ConsensusStatus::NoConsensus,
            confidence: Fraction::zero(),
            value: None,
            accepted_policies: Vec::new(),
            agreeing_agents: BTreeSet::new(),
        }
    }

    pub fn is_unanimous(&self) -> bool {
        self.status == ConsensusStatus::Unanimous
    }

    pub fn accepted_set(&self) -> BTreeSet<&CanonicalValue> {
        self.accepted_policies.iter().map(|(p, _)| p).collect()
    }
}

/// Unanimity over definitive actions.
///
/// Unanimous (C = 1) iff every agent holds the same value and none abstains.
/// Otherwise the outcome reports the largest value class, ties going to the
/// smallest canonical value.
pub fn check_definitive_unanimity<A: Ord + Clone>(
    actions: &BTreeMap<A, Action>,
) -> Result<ConsensusOutcome<A>, ConsensusError> {
    if actions.is_empty() {
        return Err(ConsensusError::Empty);
    }
    let mut classes: BTreeMap<&CanonicalValue, BTreeSet<A>> = BTreeMap::new();
    let mut abstained = false;
    for (agent, action) in actions {
        match action {
            Action::Definitive { value, .. } => {
                classes.entry(value).or_default().insert(agent.clone());
            }
            Action::Abstain => abstained = true,
            Action::Prioritized { .. } => return Err(ConsensusError::VariantMismatch),
        }
    }

    if classes.len() == 1 && !abstained {
        let (value, agents) = classes.into_iter().next().expect("one class");
        return Ok(ConsensusOutcome {
            status: ConsensusStatus::Unanimous,
            confidence: Fraction::one(),
            value: Some(value.clone()),
            accepted_policies: Vec::new(),
            agreeing_agents: agents,
        });
    }

    let mut largest: BTreeSet<A> = BTreeSet::new();
    for agents in classes.into_values() {
        if agents.len() > largest.len() {
            largest = agents;
        }
    }
    Ok(ConsensusOutcome {
        agreeing_agents: largest,
        ..ConsensusOutcome::none()
    })
}

/// Share of agents whose policy set contains `policy`.
///
/// Every entry in `actions` counts toward the denominator, including
/// abstentions. An empty map yields zero.
pub fn agreement_level<A>(policy: &CanonicalValue, actions: &BTreeMap<A, Action>) -> Fraction {
    if actions.is_empty() {
        return Fraction::zero();
    }
    let holders = actions
        .values()
        .filter(|a| a.policies().is_some_and(|p| p.contains(policy)))
        .count();
    Fraction::new(holders as u64, actions.len() as u64)
}

/// Every policy whose agreement level reaches `theta`, paired with its level.
///
/// Ordered by descending level, then lexicographically by policy.
pub fn accepted_policies<A>(
    actions: &BTreeMap<A, Action>,
    theta: Threshold,
) -> Vec<(CanonicalValue, Fraction)> {
    if actions.is_empty() {
        return Vec::new();
    }
    let mut counts: BTreeMap<&CanonicalValue, u64> = BTreeMap::new();
    for policies in actions.values().filter_map(Action::policies) {
        for p in policies {
            *counts.entry(p).or_default() += 1;
        }
    }
    let n = actions.len() as u64;
    let mut accepted: Vec<(CanonicalValue, Fraction)> = counts
        .into_iter()
        .map(|(p, c)| (p.clone(), Fraction::new(c, n)))
        .filter(|(_, level)| *level >= theta.fraction())
        .collect();
    // counts iterate in policy order, so a stable sort on level keeps ties lexicographic
    accepted.sort_by_key(|e| std::cmp::Reverse(e.1));
    accepted
}

/// Graded consensus: the mean agreement level over the accepted policies.
///
/// An empty accepted set gives `NoConsensus` with confidence zero.
pub fn consensus_confidence<A: Ord + Clone>(
    actions: &BTreeMap<A, Action>,
    theta: Threshold,
) -> ConsensusOutcome<A> {
    let accepted = accepted_policies(actions, theta);
    if accepted.is_empty() {
        return ConsensusOutcome::none();
    }
    let total = accepted
        .iter()
        .fold(Fraction::zero(), |acc, (_, level)| acc + level);
    let confidence = total / Fraction::from_integer(accepted.len() as u64);
    let agreeing_agents = actions
        .iter()
        .filter(|(_, a)| {
            a.policies()
                .is_some_and(|p| accepted.iter().any(|(acc, _)| p.contains(acc)))
        })
        .map(|(id, _)| id.clone())
        .collect();
    ConsensusOutcome {
        status: ConsensusStatus::Graded,
        confidence,
        value: None,
        accepted_policies: accepted,
        agreeing_agents,
    }
}

/// Consensus over the non-abstaining agents of one round.
///
/// This is the check both the engine and block verification run: abstainers
/// neither veto nor dilute, they only lower participation (guarded by the
/// caller). No non-abstaining agents means no consensus.
pub fn evaluate_round<A: Ord + Clone>(
    kind: ProblemKind,
    actions: &BTreeMap<A, Action>,
    theta: Threshold,
) -> Result<ConsensusOutcome<A>, ConsensusError> {
    if actions.values().any(|a| !a.is_compatible_with(kind)) {
        return Err(ConsensusError::VariantMismatch);
    }
    let voting: BTreeMap<A, Action> = actions
        .iter()
        .filter(|(_, a)| !a.is_abstention())
        .map(|(k, a)| (k.clone(), a.clone()))
        .collect();
    if voting.is_empty() {
        return Ok(ConsensusOutcome::none());
    }
    match kind {
        ProblemKind::Definitive => check_definitive_unanimity(&voting),
        ProblemKind::Prioritized => Ok(consensus_confidence(&voting, theta)),
    }
}

/// True when a reflection turn with this outcome ends the deliberation
/// early: unanimity, or graded consensus at full confidence.
pub fn is_settled<A: Ord>(kind: ProblemKind, outcome: &ConsensusOutcome<A>) -> bool {
    match kind {
        ProblemKind::Definitive => outcome.is_unanimous(),
        ProblemKind::Prioritized => {
            outcome.status == ConsensusStatus::Graded && outcome.confidence.is_one()
        }
    }
}

/// True when this outcome counts as consensus once every turn is used.
pub fn is_consensus<A: Ord>(kind: ProblemKind, outcome: &ConsensusOutcome<A>) -> bool {
    match kind {
        ProblemKind::Definitive => outcome.is_unanimous(),
        ProblemKind::Prioritized => outcome.status == ConsensusStatus::Graded,
    }
}

/// Problems whose deliberation hung, with every agent set that failed on them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HungSet<A: Ord = AgentId> {
    entries: BTreeMap<ProblemId, Vec<BTreeSet<A>>>,
}

impl<A: Ord> Default for HungSet<A> {
    fn default() -> Self {
        HungSet {
            entries: BTreeMap::new(),
        }
    }
}

impl<A: Ord + Clone> HungSet<A> {
    pub fn new() -> Self {
        HungSet {
            entries: BTreeMap::new(),
        }
    }

    /// Records a failed deliberator set. Empty sets and repeats are ignored.
    pub fn record(&mut self, problem: &ProblemId, failed: BTreeSet<A>) -> bool {
        if failed.is_empty() {
            return false;
        }
        let sets = self.entries.entry(problem.clone()).or_default();
        if sets.contains(&failed) {
            return false;
        }
        sets.push(failed);
        true
    }

    pub fn contains(&self, problem: &ProblemId) -> bool {
        self.entries.contains_key(problem)
    }

    pub fn failed_sets(&self, problem: &ProblemId) -> &[BTreeSet<A>] {
        self.entries.get(problem).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Start gate for a deliberation.
///
/// A fresh problem always starts. A hung problem only restarts with an agent
/// set different from every set that already failed on it.
pub fn can_start<A: Ord + Clone>(
    problem: &Problem,
    hung: &HungSet<A>,
    proposed: &BTreeSet<A>,
) -> bool {
    if proposed.is_empty() {
        return false;
    }
    hung.failed_sets(&problem.id)
        .iter()
        .all(|failed| failed != proposed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::value::normalize_value;

    fn cv(s: &str) -> CanonicalValue {
        normalize_value(s).unwrap()
    }

    fn defs(pairs: &[(&'static str, &str)]) -> BTreeMap<&'static str, Action> {
        pairs
            .iter()
            .map(|(a, v)| (*a, Action::definitive(v, "")))
            .collect()
    }

    fn prio(pairs: &[(&'static str, &[&str])]) -> BTreeMap<&'static str, Action> {
        pairs
            .iter()
            .map(|(a, ps)| (*a, Action::prioritized(ps.iter().copied())))
            .collect()
    }

    fn worked_example() -> BTreeMap<&'static str, Action> {
        prio(&[
            ("a1", &["p1", "p2"]),
            ("a2", &["p1"]),
            ("a3", &["p1", "p2", "p3"]),
        ])
    }

    #[test]
    fn unanimity_examples() {
        let out =
            check_definitive_unanimity(&defs(&[("a1", "5"), ("a2", "5"), ("a3", "5")])).unwrap();
        assert_eq!(out.status, ConsensusStatus::Unanimous);
        assert_eq!(out.confidence, Fraction::one());
        assert_eq!(out.value, Some(cv("5")));

        let out =
            check_definitive_unanimity(&defs(&[("a1", "5"), ("a2", "7"), ("a3", "5")])).unwrap();
        assert_eq!(out.status, ConsensusStatus::NoConsensus);
        assert_eq!(out.agreeing_agents, BTreeSet::from(["a1", "a3"]));

        let out = check_definitive_unanimity(&defs(&[("a1", "5")])).unwrap();
        assert!(out.is_unanimous());
    }

    #[test]
    fn numeric_forms_agree() {
        let out = check_definitive_unanimity(&defs(&[("a", "42.0"), ("b", " 42 "), ("c", "042")]))
            .unwrap();
        assert!(out.is_unanimous());
    }

    #[test]
    fn abstention_blocks_raw_unanimity() {
        let mut m = defs(&[("a1", "5"), ("a2", "5")]);
        m.insert("a3", Action::Abstain);
        assert!(!check_definitive_unanimity(&m).unwrap().is_unanimous());
        // but the round evaluation only counts voters
        let out = evaluate_round(ProblemKind::Definitive, &m, Threshold::default()).unwrap();
        assert!(out.is_unanimous());
    }

    #[test]
    fn unanimity_errors() {
        let empty: BTreeMap<&str, Action> = BTreeMap::new();
        assert_eq!(
            check_definitive_unanimity(&empty),
            Err(ConsensusError::Empty)
        );
        let mut m = defs(&[("a1", "5")]);
        m.insert("a2", Action::prioritized(["p"]));
        assert_eq!(
            check_definitive_unanimity(&m),
            Err(ConsensusError::VariantMismatch)
        );
    }

    #[test]
    fn agreement_examples() {
        let m = worked_example();
        assert_eq!(agreement_level(&cv("p1"), &m), Fraction::one());
        assert_eq!(agreement_level(&cv("p3"), &m), Fraction::new(1, 3));
        assert_eq!(agreement_level(&cv("q"), &m), Fraction::zero());
    }

    #[test]
    fn accepted_examples() {
        let m = worked_example();
        let half = Threshold::new(1, 2).unwrap();
        assert_eq!(
            accepted_policies(&m, half),
            vec![(cv("p1"), Fraction::one()), (cv("p2"), Fraction::new(2, 3))]
        );
        let full = Threshold::new(1, 1).unwrap();
        assert_eq!(
            accepted_policies(&m, full),
            vec![(cv("p1"), Fraction::one())]
        );

        let same = prio(&[("a", &["p"]), ("b", &["p"])]);
        assert_eq!(
            accepted_policies(&same, Threshold::new(1, 10).unwrap()),
            vec![(cv("p"), Fraction::one())]
        );
    }

    #[test]
    fn ties_order_lexicographically() {
        let m = prio(&[("a", &["zeta", "alpha"]), ("b", &["mid"])]);
        let acc = accepted_policies(&m, Threshold::default());
        let names: Vec<_> = acc.iter().map(|(p, _)| p.as_str()).collect();
        assert_eq!(names, ["alpha", "mid", "zeta"]);
    }

    #[test]
    fn confidence_examples() {
        let out = consensus_confidence(&worked_example(), Threshold::default());
        assert_eq!(out.status, ConsensusStatus::Graded);
        assert_eq!(out.confidence, Fraction::new(5, 6));

        let same = prio(&[
            ("a", &["p1", "p2"]),
            ("b", &["p1", "p2"]),
            ("c", &["p1", "p2"]),
        ]);
        assert_eq!(
            consensus_confidence(&same, Threshold::default()).confidence,
            Fraction::one()
        );

        let disjoint = prio(&[("a", &["x"]), ("b", &["y"]), ("c", &["z"])]);
        let out = consensus_confidence(&disjoint, Threshold::default());
        assert_eq!(out.status, ConsensusStatus::NoConsensus);
        assert_eq!(out.confidence, Fraction::zero());
        assert!(out.accepted_policies.is_empty());
    }

    #[test]
    fn start_gate() {
        let p = Problem::definitive("p", "2+2?").unwrap();
        let mut hung: HungSet<&str> = HungSet::new();
        assert!(can_start(&p, &hung, &BTreeSet::from(["a1"])));
        hung.record(&p.id, BTreeSet::from(["a1", "a2", "a3"]));
        assert!(!can_start(&p, &hung, &BTreeSet::from(["a1", "a2", "a3"])));
        assert!(can_start(&p, &hung, &BTreeSet::from(["a1", "a2", "a4"])));
        // a strict subset is still a different set
        assert!(can_start(&p, &hung, &BTreeSet::from(["a1", "a2"])));
    }

    #[test]
    fn hung_set_ignores_empty_and_repeats() {
        let id = ProblemId::from("p");
        let mut hung: HungSet<u8> = HungSet::new();
        assert!(!hung.record(&id, BTreeSet::new()));
        assert!(!hung.contains(&id));
        assert!(hung.record(&id, BTreeSet::from([1, 2])));
        assert!(!hung.record(&id, BTreeSet::from([1, 2])));
        assert_eq!(hung.failed_sets(&id).len(), 1);
    }
}
