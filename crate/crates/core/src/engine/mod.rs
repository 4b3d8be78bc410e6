//! The deliberation state machine.
//!
//! A deliberation runs an initial round, then up to T reflection turns in
//! round-robin order (ascending node id), then a mechanical conclusion that
//! builds, gossips, verifies and appends one block. Consensus is checked after
//! every reflection turn; a settled turn exits early. Any failure to converge,
//! to participate or to finish within the timeout yields an empty block and
//! adds the problem to the hung set.

mod deliberation;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::agent::{assign_prompt_styles, AgentError, PromptStyle, Responder};
use crate::crypto::NodeIdentity;
use crate::domain::{AgentId, ConsensusError, HungSet, Problem, ProblemId, Threshold};
use crate::ledger::{Chain, LedgerError};
use crate::network::{NetworkConfig, NetworkError, Utterance};

pub use deliberation::{Deliberation, DeliberationResult};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("problem {0} is hung for this agent set; change the deliberators to restart it")]
    StartRefused(ProblemId),
    #[error("deliberation is in state {0:?}, which does not allow this step")]
    WrongState(EngineState),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EngineState {
    Idle,
    InitialRound,
    Reflection { turn: u32 },
    Conclusion,
    Done { success: bool },
}

/// One deliberator: its node identity, how it answers, and its prompt style.
#[derive(Clone, Debug)]
pub struct AgentSpec {
    pub identity: NodeIdentity,
    pub responder: Arc<dyn Responder>,
    pub style: PromptStyle,
    /// Label only; consistency is asserted over honest agents.
    pub honest: bool,
}

impl AgentSpec {
    pub fn new(identity: NodeIdentity, responder: impl Responder + 'static) -> Self {
        AgentSpec {
            identity,
            responder: Arc::new(responder),
            style: PromptStyle::ZeroShot,
            honest: true,
        }
    }

    pub fn id(&self) -> AgentId {
        self.identity.node_id()
    }
}

/// Logical costs charged to the clock while agents speak.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimingModel {
    /// Ticks per model response.
    pub inference_ticks: u64,
    /// Prompt assembly costs one tick plus one per this many prompt bytes.
    pub prompt_bytes_per_tick: u64,
    /// Charge measured response time in milliseconds instead of
    /// `inference_ticks`. Runs are then no longer reproducible.
    pub wall_clock: bool,
}

impl Default for TimingModel {
    fn default() -> Self {
        TimingModel {
            inference_ticks: 5,
            prompt_bytes_per_tick: 256,
            wall_clock: false,
        }
    }
}

impl TimingModel {
    pub fn prompt_ticks(&self, prompt_len: usize) -> u64 {
        1 + prompt_len as u64 / self.prompt_bytes_per_tick.max(1)
    }
}

#[derive(Clone, Debug)]
pub struct DeliberationConfig {
    pub agents: Vec<AgentSpec>,
    pub max_turns: u32,
    /// Logical time bound for the whole deliberation.
    pub timeout: u64,
    pub theta: Threshold,
    pub min_participants: u32,
    pub seed: u64,
    pub network: NetworkConfig,
    pub timing: TimingModel,
}

impl DeliberationConfig {
    /// Defaults: θ = 1/2, every agent must participate, the default network,
    /// and a timeout of 50 per-turn bounds. Prompt styles are assigned by
    /// speaking order.
    pub fn new(mut agents: Vec<AgentSpec>, max_turns: u32) -> Self {
        agents.sort_by_key(AgentSpec::id);
        let styles = assign_prompt_styles(agents.len());
        for (a, style) in agents.iter_mut().zip(styles) {
            a.style = style;
        }
        let n = agents.len() as u32;
        let mut config = DeliberationConfig {
            agents,
            max_turns,
            timeout: 0,
            theta: Threshold::default(),
            min_participants: n,
            seed: 0,
            network: NetworkConfig::default(),
            timing: TimingModel::default(),
        };
        config.timeout = config.default_timeout();
        config
    }

    /// Fifty times a generous bound on one turn: every agent speaking in
    /// sequence plus a few latency and retry rounds each.
    pub fn default_timeout(&self) -> u64 {
        let n = self.agents.len() as u64;
        let per_turn = n
            * (self.timing.inference_ticks
                + 16
                + 4 * self.network.link.max_latency
                + 2 * self.network.retry_delay);
        50 * per_turn.max(1)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_theta(mut self, theta: Threshold) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_timeout(mut self, timeout: u64) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_min_participants(mut self, min: u32) -> Self {
        self.min_participants = min;
        self
    }

    /// Replaces the network and recomputes the default timeout.
    pub fn with_network(mut self, network: NetworkConfig) -> Self {
        self.network = network;
        self.timeout = self.default_timeout();
        self
    }

    pub fn agent_set(&self) -> BTreeSet<AgentId> {
        self.agents.iter().map(AgentSpec::id).collect()
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        if self.agents.is_empty() {
            return bad("no agents".into());
        }
        if self.agent_set().len() != self.agents.len() {
            return bad("duplicate agent identity".into());
        }
        if self.max_turns == 0 {
            return bad("max_turns must be at least 1".into());
        }
        if self.min_participants as usize > self.agents.len() {
            return bad(format!(
                "min_participants {} exceeds {} agents",
                self.min_participants,
                self.agents.len()
            ));
        }
        let link = self.network.link;
        if link.min_latency > link.max_latency || !(0.0..=1.0).contains(&link.drop_probability) {
            return bad("invalid link model".into());
        }
        Ok(())
    }
}

/// Long-lived state across deliberations: the hung set, each node's chain and
/// the canonical chain.
#[derive(Debug, Default)]
pub struct Engine {
    hung: HungSet,
    chain: Chain,
    node_chains: BTreeMap<AgentId, Chain>,
    attempts: BTreeMap<ProblemId, u32>,
}

impl Engine {
    pub fn new() -> Self {
        Engine::default()
    }

    pub fn hung_set(&self) -> &HungSet {
        &self.hung
    }

    /// The chain every honest node agrees on.
    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn node_chain(&self, id: &AgentId) -> Option<&Chain> {
        self.node_chains.get(id)
    }

    pub fn node_chains(&self) -> &BTreeMap<AgentId, Chain> {
        &self.node_chains
    }

    /// Checks the start gate and opens a deliberation in state `Idle`.
    pub fn start<'a>(
        &'a mut self,
        config: &'a DeliberationConfig,
        problem: &Problem,
    ) -> Result<Deliberation<'a>, EngineError> {
        config.validate()?;
        if !crate::domain::can_start(problem, &self.hung, &config.agent_set()) {
            return Err(EngineError::StartRefused(problem.id.clone()));
        }
        let attempt = self.attempts.entry(problem.id.clone()).or_insert(0);
        let deliberation_id = format!("{}#{}", problem.id, attempt);
        *attempt += 1;
        // nodes that missed earlier deliberations catch up with the canonical chain
        for a in &config.agents {
            let chain = self.node_chains.entry(a.id()).or_default();
            if chain.height() < self.chain.height() {
                *chain = self.chain.clone();
            }
        }
        Deliberation::new(self, config, problem.clone(), deliberation_id)
    }

    /// Runs all three rounds and returns the record, the appended block and
    /// the metrics sample.
    pub fn run_deliberation(
        &mut self,
        config: &DeliberationConfig,
        problem: &Problem,
    ) -> Result<DeliberationResult, EngineError> {
        let mut d = self.start(config, problem)?;
        d.run_initial_round()?;
        while d.state() != EngineState::Conclusion {
            d.run_reflection_turn()?;
        }
        d.conclude()
    }
}

#[derive(Serialize)]
struct TranscriptLine<'a> {
    deliberation_id: &'a str,
    round: crate::network::Round,
    turn: u32,
    agent: AgentId,
    digest: crate::crypto::Digest,
    action: &'a crate::domain::Action,
    body_bytes: usize,
}

/// Line-delimited JSON, one record per utterance.
pub fn write_transcript<W: Write>(utterances: &[Utterance], mut out: W) -> io::Result<()> {
    for u in utterances {
        let line = TranscriptLine {
            deliberation_id: &u.deliberation_id,
            round: u.round,
            turn: u.turn,
            agent: u.agent,
            digest: u.digest,
            action: &u.action,
            body_bytes: u.body.len(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
