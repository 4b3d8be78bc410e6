use std::collections::BTreeMap;
use std::time::Instant;

use crate::agent::{
    build_initial_prompt, build_reflection_prompt, AgentError, Prompt, PromptStyle,
};
use crate::crypto::Digest;
use crate::domain::{
    compute_payoff, evaluate_round, fraction_to_f64, is_consensus, is_settled, Action, AgentId,
    ConsensusOutcome, DeliberationRecord, HungReason, Problem, RecordOutcome,
};
use crate::ledger::{build_block, build_empty_block, canonical_serialize, Block, LedgerError};
use crate::metrics::{consensus_accuracy, MetricsSample, Timing};
use crate::network::{sign_utterance, Round, SimNetwork, UnsignedUtterance, Utterance};

use super::{DeliberationConfig, Engine, EngineError, EngineState};

/// Everything a finished deliberation produced.
#[derive(Clone, Debug)]
pub struct DeliberationResult {
    pub record: DeliberationRecord,
    /// The block appended to the canonical chain.
    pub block: Block,
    pub metrics: MetricsSample,
    /// Every utterance of the completed rounds, in block order.
    pub transcript: Vec<Utterance>,
    /// Nodes whose own verification of their locally built block failed.
    pub rejected_by: Vec<AgentId>,
    /// Nodes whose locally built block differs from the canonical one.
    pub diverging_nodes: Vec<AgentId>,
}

impl DeliberationResult {
    /// Final recorded value of every honest agent, when the problem is
    /// definitive and a round was recorded.
    pub fn honest_final_values(&self, config: &DeliberationConfig) -> Vec<Option<Action>> {
        let Some(last) = self.record.final_round() else {
            return Vec::new();
        };
        config
            .agents
            .iter()
            .filter(|a| a.honest)
            .map(|a| last.get(&a.id()).cloned())
            .collect()
    }
}

/// A deliberation in progress. Obtained from [`Engine::start`].
pub struct Deliberation<'a> {
    engine: &'a mut Engine,
    config: &'a DeliberationConfig,
    problem: Problem,
    deliberation_id: String,
    order: Vec<AgentId>,
    net: SimNetwork,
    state: EngineState,
    /// Completed rounds, each in speaking order.
    rounds: Vec<Vec<Utterance>>,
    last_outcome: Option<ConsensusOutcome>,
    hung: Option<HungReason>,
    start: u64,
    deadline: u64,
    timing: Timing,
    abstentions: u32,
}

impl<'a> Deliberation<'a> {
    pub(super) fn new(
        engine: &'a mut Engine,
        config: &'a DeliberationConfig,
        problem: Problem,
        deliberation_id: String,
    ) -> Result<Self, EngineError> {
        let order: Vec<AgentId> = {
            let mut ids: Vec<AgentId> = config.agents.iter().map(|a| a.id()).collect();
            ids.sort();
            ids
        };
        let net = SimNetwork::new(&order, problem.kind, &config.network, config.seed)?;
        let start = net.now();
        Ok(Deliberation {
            engine,
            config,
            problem,
            deliberation_id,
            order,
            net,
            state: EngineState::Idle,
            rounds: Vec::new(),
            last_outcome: None,
            hung: None,
            start,
            deadline: start + config.timeout,
            timing: Timing::default(),
            abstentions: 0,
        })
    }

    pub fn state(&self) -> EngineState {
        self.state
    }

    pub fn id(&self) -> &str {
        &self.deliberation_id
    }

    /// Round-robin speaking order.
    pub fn order(&self) -> &[AgentId] {
        &self.order
    }

    pub fn network(&self) -> &SimNetwork {
        &self.net
    }

    pub fn rounds(&self) -> &[Vec<Utterance>] {
        &self.rounds
    }

    pub fn hung_reason(&self) -> Option<HungReason> {
        self.hung
    }

    pub fn last_outcome(&self) -> Option<&ConsensusOutcome> {
        self.last_outcome.as_ref()
    }

    fn spec(&self, id: &AgentId) -> &super::AgentSpec {
        self.config
            .agents
            .iter()
            .find(|a| a.id() == *id)
            .expect("order is built from the agent list")
    }

    fn hang(&mut self, reason: HungReason) {
        self.hung = Some(reason);
        self.state = EngineState::Conclusion;
    }

    /// Has every agent speak once at `turn`, in order, then disseminates.
    /// Returns the turn's utterances if they reached every node in time.
    fn speak_round(&mut self, turn: u32) -> Result<Option<Vec<Utterance>>, EngineError> {
        let round = if turn == 0 {
            Round::Initial
        } else {
            Round::Reflection
        };
        let mut spoken = Vec::with_capacity(self.order.len());
        for id in self.order.clone() {
            let spec = self.spec(&id).clone();
            let prompt = match turn {
                0 => build_initial_prompt(&self.problem, spec.style),
                _ => self.reflection_prompt(&id, spec.style)?,
            };
            let rendered = prompt.render();
            let pgt = self.config.timing.prompt_ticks(rendered.len());
            self.timing.prompt_generation += pgt;
            let started = Instant::now();
            let body = match spec.responder.respond(&prompt, turn) {
                Ok(body) => body,
                Err(_) => {
                    // an unavailable agent's node signs an empty utterance,
                    // which reads as an abstention
                    self.abstentions += 1;
                    String::new()
                }
            };
            let inference = match self.config.timing.wall_clock {
                true => started.elapsed().as_millis() as u64,
                false => self.config.timing.inference_ticks,
            };
            let busy_until = self.net.now() + pgt + inference;
            self.net.run_until(busy_until);
            self.net.transport_mut().advance_to(busy_until);
            if self.net.now() > self.deadline {
                return Ok(None);
            }
            let unsigned = UnsignedUtterance {
                deliberation_id: self.deliberation_id.clone(),
                round,
                turn,
                agent: id,
                body,
            };
            let u = sign_utterance(&spec.identity, unsigned, self.problem.kind)?;
            self.net.publish(u.clone())?;
            spoken.push(u);
        }
        self.net.run_until(self.deadline);
        let digests: Vec<Digest> = spoken.iter().map(|u| u.digest).collect();
        Ok(self.net.all_hold(&digests).then_some(spoken))
    }

    /// The previous turn as this agent's node holds it.
    fn reflection_prompt(&self, id: &AgentId, style: PromptStyle) -> Result<Prompt, EngineError> {
        let prev_turn = self.rounds.len() as u32 - 1;
        let node = self.net.node(id).expect("every agent has a node");
        let prev: Vec<Utterance> = node
            .utterances()
            .filter(|u| u.deliberation_id == self.deliberation_id && u.turn == prev_turn)
            .cloned()
            .collect();
        let own = prev
            .iter()
            .find(|u| u.agent == *id)
            .ok_or(AgentError::IncompleteContext { missing: *id })?;
        Ok(build_reflection_prompt(
            &self.problem,
            style,
            own,
            &prev,
            &self.order,
        )?)
    }

    fn actions(round: &[Utterance]) -> BTreeMap<AgentId, Action> {
        round
            .iter()
            .map(|u| (u.agent, u.action.without_argument()))
            .collect()
    }

    fn participants(round: &[Utterance]) -> u32 {
        round.iter().filter(|u| !u.action.is_abstention()).count() as u32
    }

    /// Collects every agent's initial response and disseminates it.
    pub fn run_initial_round(&mut self) -> Result<&[Utterance], EngineError> {
        if self.state != EngineState::Idle {
            return Err(EngineError::WrongState(self.state));
        }
        self.state = EngineState::InitialRound;
        let begin = self.net.now();
        let spoken = self.speak_round(0)?;
        self.timing.initial_round = self.net.now().min(self.deadline) - begin;
        match spoken {
            None => self.hang(HungReason::Timeout),
            Some(round) => {
                let enough = Self::participants(&round) >= self.config.min_participants;
                self.rounds.push(round);
                if enough {
                    self.state = EngineState::Reflection { turn: 1 };
                } else {
                    self.hang(HungReason::Participation);
                }
            }
        }
        Ok(self.rounds.last().map_or(&[], Vec::as_slice))
    }

    /// Runs the next reflection turn and evaluates consensus on it. Moves to
    /// `Conclusion` on settlement, on the last turn, or on a hang.
    pub fn run_reflection_turn(&mut self) -> Result<Option<&ConsensusOutcome>, EngineError> {
        let EngineState::Reflection { turn } = self.state else {
            return Err(EngineError::WrongState(self.state));
        };
        let begin = self.net.now();
        let spoken = self.speak_round(turn)?;
        self.timing.reflection += self.net.now().min(self.deadline) - begin;
        let Some(round) = spoken else {
            self.hang(HungReason::Timeout);
            return Ok(None);
        };
        let participants = Self::participants(&round);
        let outcome = evaluate_round(self.problem.kind, &Self::actions(&round), self.config.theta)?;
        self.rounds.push(round);
        self.last_outcome = Some(outcome);
        let outcome = self.last_outcome.as_ref().expect("just set");
        if participants < self.config.min_participants {
            self.hang(HungReason::Participation);
        } else if is_settled(self.problem.kind, outcome) {
            self.state = EngineState::Conclusion;
        } else if turn == self.config.max_turns {
            if is_consensus(self.problem.kind, outcome) {
                self.state = EngineState::Conclusion;
            } else {
                self.hang(HungReason::NoConvergence);
            }
        } else {
            self.state = EngineState::Reflection { turn: turn + 1 };
        }
        Ok(self.last_outcome.as_ref())
    }

    fn record(&self, outcome: RecordOutcome, completed_at: u64) -> DeliberationRecord {
        let actions_by_round: Vec<BTreeMap<AgentId, Action>> =
            self.rounds.iter().map(|r| Self::actions(r)).collect();
        let consensus = match actions_by_round.last() {
            Some(last) => evaluate_round(self.problem.kind, last, self.config.theta)
                .unwrap_or_else(|_| ConsensusOutcome::none()),
            None => ConsensusOutcome::none(),
        };
        let mut record = DeliberationRecord {
            deliberation_id: self.deliberation_id.clone(),
            problem: self.problem.clone(),
            agents: self.order.clone(),
            theta: self.config.theta,
            max_turns: self.config.max_turns,
            timeout: self.config.timeout,
            min_participants: self.config.min_participants,
            actions_by_round,
            consensus,
            payoff: BTreeMap::new(),
            completed_at,
            outcome,
        };
        record.payoff = compute_payoff(&record);
        record
    }

    /// Builds the block at every node, gossips the leader's copy, and has each
    /// node verify and append its own. Hung outcomes enter the hung set.
    pub fn conclude(mut self) -> Result<DeliberationResult, EngineError> {
        if self.state != EngineState::Conclusion {
            return Err(EngineError::WrongState(self.state));
        }
        let elapsed = self.net.now() - self.start;
        let completed_at = match self.hung {
            // a stalled dissemination may leave the clock short of the bound
            Some(HungReason::Timeout) => elapsed.max(self.config.timeout + 1),
            _ => elapsed,
        };
        let mut outcome = match self.hung {
            Some(r) => RecordOutcome::Hung(r),
            None => RecordOutcome::Success,
        };
        let transcript: Vec<Utterance> = self.rounds.iter().flatten().cloned().collect();

        let mut blocks: BTreeMap<AgentId, Block> = BTreeMap::new();
        let mut record = self.record(outcome, completed_at);
        if outcome.is_success() {
            // every node builds from the utterances it holds
            let mut oversize = false;
            for id in &self.order {
                let node = self.net.node(id).expect("node exists");
                let held: Vec<Utterance> = transcript
                    .iter()
                    .map(|u| {
                        node.get(&u.digest)
                            .cloned()
                            .expect("complete rounds reached every node")
                    })
                    .collect();
                let tip = self.engine.node_chains.get(id).and_then(|c| c.tip());
                match build_block(record.clone(), held, tip) {
                    Ok(b) => {
                        blocks.insert(*id, b);
                    }
                    Err(LedgerError::OversizeBlock { .. }) => {
                        oversize = true;
                        break;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if oversize {
                outcome = RecordOutcome::Hung(HungReason::Oversize);
                self.hung = Some(HungReason::Oversize);
                record = self.record(outcome, completed_at);
                blocks.clear();
            }
        }
        if !outcome.is_success() {
            for id in &self.order {
                let tip = self.engine.node_chains.get(id).and_then(|c| c.tip());
                blocks.insert(*id, build_empty_block(record.clone(), tip)?);
            }
            self.engine
                .hung
                .record(&self.problem.id, self.config.agent_set());
        }
        // an oversize empty block may have dropped the per-round actions
        record = blocks[&self.order[0]].body.record.clone();

        let leader = self.order[0];
        for (id, block) in &blocks {
            if let Some(node) = self.net.node_mut(id) {
                node.set_local_block(block.clone());
            }
        }
        self.net.announce_block(leader, &blocks[&leader])?;
        self.net.run_to_quiescence();

        let canonical = blocks[&leader].clone();
        let mut rejected_by = Vec::new();
        let mut diverging_nodes = Vec::new();
        for (id, block) in blocks {
            if block != canonical {
                diverging_nodes.push(id);
            }
            let chain = self.engine.node_chains.entry(id).or_default();
            if chain.verify_and_append(block).is_err() {
                rejected_by.push(id);
            }
        }
        self.engine
            .chain
            .verify_and_append(canonical.clone())
            .map_err(LedgerError::from)?;
        self.state = EngineState::Done {
            success: outcome.is_success(),
        };

        let truth = self.problem.ground_truth.as_ref();
        let accuracy_per_turn = truth.map(|t| {
            self.rounds
                .iter()
                .map(|r| consensus_accuracy(&Self::actions(r), Some(t)).expect("truth present"))
                .collect()
        });
        let stats = self.net.transport().stats();
        let metrics = MetricsSample {
            deliberation_id: self.deliberation_id.clone(),
            problem_id: self.problem.id.to_string(),
            agents: self.order.len(),
            max_turns: self.config.max_turns,
            turns_used: self.rounds.len().saturating_sub(1) as u32,
            outcome,
            confidence: record.consensus.confidence,
            accuracy_per_turn,
            timing: self.timing.clone(),
            block_bytes: canonical_serialize(&canonical)?.len(),
            block_height: canonical.height(),
            participation: record.participation(),
            announce_bytes: stats.announce_bytes,
            data_bytes: stats.data_bytes,
            abstentions: self.abstentions,
            verification_failures: rejected_by.len() as u32,
        };
        debug_assert!(fraction_to_f64(metrics.participation) <= 1.0);
        Ok(DeliberationResult {
            record,
            block: canonical,
            metrics,
            transcript: if outcome.is_success() {
                transcript
            } else {
                Vec::new()
            },
            rejected_by,
            diverging_nodes,
        })
    }
}
