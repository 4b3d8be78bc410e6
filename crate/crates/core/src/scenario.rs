//! Scenario files and the sweep runner.
//!
//! A scenario is a TOML file naming the problems, the agent population, the
//! network, and a sweep over agent counts × turn counts. Each sweep cell gets
//! its own engine, network and chain; cells run in parallel and their output is
//! written in cell order, so a seed fixes every output byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::agent::AgentBehavior;
use crate::crypto::NodeIdentity;
use crate::domain::{Action, Problem, ProblemKind, Threshold};
use crate::engine::{
    write_transcript, AgentSpec, DeliberationConfig, Engine, EngineError, TimingModel,
};
use crate::ledger::{Chain, LedgerError};
use crate::metrics::{write_csv, MetricsRow, MetricsSample};
use crate::network::{LinkModel, NetworkConfig, Topology};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("metrics output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    /// True for problems with the scenario itself rather than the run.
    pub fn is_config_error(&self) -> bool {
        matches!(self, ScenarioError::Parse(_) | ScenarioError::Invalid(_))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub sweep: Sweep,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub deliberation: DeliberationSection,
    pub population: Option<Population>,
    #[serde(default)]
    pub agents: Vec<AgentEntry>,
    pub problems: Vec<ProblemEntry>,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub agents: Vec<usize>,
    pub turns: Vec<u32>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub min_latency: u64,
    pub max_latency: u64,
    pub drop_probability: f64,
    pub retry_delay: u64,
    /// Peer lists by agent index; omitted means fully connected.
    pub adjacency: Option<Vec<Vec<usize>>>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let d = NetworkConfig::default();
        NetworkSection {
            min_latency: d.link.min_latency,
            max_latency: d.link.max_latency,
            drop_probability: d.link.drop_probability,
            retry_delay: d.retry_delay,
            adjacency: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeliberationSection {
    pub theta: Option<f64>,
    pub timeout: Option<u64>,
    pub min_participants: Option<u32>,
    pub inference_ticks: Option<u64>,
    pub wall_clock: bool,
}

/// A generated agent population.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "behavior", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Population {
    /// ⌈n · initial_accuracy⌉ agents start on the ground truth, the rest on
    /// distinct wrong answers; the last `stubborn` agents never move.
    Convergent {
        initial_accuracy: f64,
        p_adopt: f64,
        #[serde(default)]
        stubborn: usize,
        #[serde(default)]
        distractors: Vec<String>,
    },
    Remote {
        endpoint: String,
        model: String,
        #[serde(default = "default_remote_timeout")]
        timeout_ms: u64,
    },
}

fn default_remote_timeout() -> u64 {
    30_000
}

/// One explicitly configured agent. A sweep cell with n agents uses the
/// first n entries.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "behavior", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AgentEntry {
    Scripted {
        responses: Vec<String>,
    },
    Stubborn {
        answer: Option<String>,
        #[serde(default)]
        policies: Vec<String>,
    },
    Convergent {
        answer: Option<String>,
        #[serde(default)]
        policies: Vec<String>,
        p_adopt: f64,
    },
    Remote {
        endpoint: String,
        model: String,
        #[serde(default = "default_remote_timeout")]
        timeout_ms: u64,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemEntry {
    pub id: String,
    pub statement: String,
    #[serde(default = "default_kind")]
    pub kind: String,
    pub ground_truth: Option<String>,
}

fn default_kind() -> String {
    "definitive".into()
}

impl ProblemEntry {
    pub fn to_problem(&self) -> Result<Problem, ScenarioError> {
        let kind = match self.kind.as_str() {
            "definitive" => ProblemKind::Definitive,
            "prioritized" => ProblemKind::Prioritized,
            other => {
                return Err(ScenarioError::Invalid(format!(
                    "problem {}: unknown kind {other:?}",
                    self.id
                )))
            }
        };
        let p = Problem::new(self.id.as_str(), self.statement.as_str(), kind)
            .map_err(|e| ScenarioError::Invalid(format!("problem {}: {e}", self.id)))?;
        Ok(match &self.ground_truth {
            Some(t) => p.with_ground_truth(t),
            None => p,
        })
    }
}

/// SplitMix64 finalizer; derives independent sub-seeds.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ScenarioError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        Scenario::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_owned()));
        if self.sweep.agents.is_empty() || self.sweep.turns.is_empty() {
            return bad("sweep ranges must be non-empty");
        }
        if self.sweep.agents.contains(&0) || self.sweep.turns.contains(&0) {
            return bad("sweep values must be at least 1");
        }
        if self.problems.is_empty() {
            return bad("at least one problem is required");
        }
        match (&self.population, self.agents.is_empty()) {
            (Some(_), false) => return bad("give either [population] or [[agents]], not both"),
            (None, true) => return bad("no agents: add [population] or [[agents]]"),
            (None, false) => {
                let max = *self.sweep.agents.iter().max().expect("non-empty");
                if self.agents.len() < max {
                    return bad("fewer [[agents]] than the largest sweep cell");
                }
            }
            (
                Some(Population::Convergent {
                    initial_accuracy,
                    p_adopt,
                    ..
                }),
                true,
            ) => {
                if !(0.0..=1.0).contains(initial_accuracy) || !(0.0..=1.0).contains(p_adopt) {
                    return bad("initial_accuracy and p_adopt must lie in [0, 1]");
                }
                if self.problems.iter().any(|p| p.ground_truth.is_none()) {
                    return bad("a convergent population needs a ground truth on every problem");
                }
            }
            (Some(Population::Remote { .. }), true) => {}
        }
        for p in &self.problems {
            p.to_problem()?;
        }
        if let Some(theta) = self.deliberation.theta {
            Threshold::from_f64(theta).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<(usize, u32)> {
        self.sweep
            .agents
            .iter()
            .flat_map(|&n| self.sweep.turns.iter().map(move |&t| (n, t)))
            .collect()
    }

    fn network(&self, n: usize) -> NetworkConfig {
        let s = &self.network;
        NetworkConfig {
            link: LinkModel {
                min_latency: s.min_latency,
                max_latency: s.max_latency,
                drop_probability: s.drop_probability,
            },
            topology: match &s.adjacency {
                Some(adj) => Topology::Adjacency(adj.iter().take(n).cloned().collect()),
                None => Topology::FullyConnected,
            },
            retry_delay: s.retry_delay,
        }
    }

    /// Agents for one deliberation: identities are fixed per cell, behaviors
    /// are drawn per problem.
    fn agents(
        &self,
        n: usize,
        problem: &Problem,
        seed: u64,
    ) -> Result<Vec<AgentSpec>, ScenarioError> {
        let identity = |i: usize| NodeIdentity::derive(self.seed, i as u64);
        let kind = problem.kind;
        if let Some(pop) = &self.population {
            return Ok(match pop {
                Population::Remote {
                    endpoint,
                    model,
                    timeout_ms,
                } => (0..n)
                    .map(|i| AgentSpec::new(identity(i), remote(endpoint, model, *timeout_ms)))
                    .collect(),
                Population::Convergent {
                    initial_accuracy,
                    p_adopt,
                    stubborn,
                    distractors,
                } => {
                    let truth = problem.ground_truth.as_ref().ok_or_else(|| {
                        ScenarioError::Invalid(format!(
                            "problem {} has no ground truth",
                            problem.id
                        ))
                    })?;
                    let correct = ((n as f64 * initial_accuracy) - 1e-9).ceil().max(0.0) as usize;
                    let mut slots: Vec<usize> = (0..n).collect();
                    slots.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                    let mut is_correct = vec![false; n];
                    for &i in &slots[..correct.min(n)] {
                        is_correct[i] = true;
                    }
                    let stubborn_from = n.saturating_sub(*stubborn);
                    let mut wrong = 0;
                    (0..n)
                        .map(|i| {
                            let action = if is_correct[i] {
                                match kind {
                                    ProblemKind::Definitive => {
                                        Action::definitive(truth.as_str(), "")
                                    }
                                    ProblemKind::Prioritized => Action::prioritized([
                                        truth.as_str(),
                                        format!("option {i}").as_str(),
                                    ]),
                                }
                            } else {
                                wrong += 1;
                                let d = distractor(truth.as_str(), distractors, wrong - 1);
                                match kind {
                                    ProblemKind::Definitive => Action::definitive(&d, ""),
                                    ProblemKind::Prioritized => Action::prioritized([d.as_str()]),
                                }
                            };
                            // the tail of the shuffled order is stubborn
                            if slots.iter().position(|&s| s == i).unwrap_or(0) >= stubborn_from {
                                let mut s =
                                    AgentSpec::new(identity(i), AgentBehavior::stubborn(action));
                                s.honest = false;
                                s
                            } else {
                                AgentSpec::new(
                                    identity(i),
                                    AgentBehavior::convergent(
                                        action,
                                        *p_adopt,
                                        mix(seed, i as u64),
                                    ),
                                )
                            }
                        })
                        .collect()
                }
            });
        }
        self.agents
            .iter()
            .take(n)
            .enumerate()
            .map(|(i, entry)| {
                let action = |answer: &Option<String>, policies: &[String]| match kind {
                    ProblemKind::Definitive => {
                        Action::definitive(answer.as_deref().unwrap_or(""), "")
                    }
                    ProblemKind::Prioritized => {
                        Action::prioritized(policies.iter().map(String::as_str))
                    }
                };
                Ok(match entry {
                    AgentEntry::Scripted { responses } => {
                        AgentSpec::new(identity(i), AgentBehavior::scripted(responses.clone()))
                    }
                    AgentEntry::Stubborn { answer, policies } => {
                        let mut s = AgentSpec::new(
                            identity(i),
                            AgentBehavior::stubborn(action(answer, policies)),
                        );
                        s.honest = false;
                        s
                    }
                    AgentEntry::Convergent {
                        answer,
                        policies,
                        p_adopt,
                    } => AgentSpec::new(
                        identity(i),
                        AgentBehavior::convergent(
                            action(answer, policies),
                            *p_adopt,
                            mix(seed, i as u64),
                        ),
                    ),
                    AgentEntry::Remote {
                        endpoint,
                        model,
                        timeout_ms,
                    } => AgentSpec::new(identity(i), remote(endpoint, model, *timeout_ms)),
                })
            })
            .collect()
    }

    /// The engine configuration for one deliberation of a cell.
    pub fn config(
        &self,
        n: usize,
        turns: u32,
        problem_index: usize,
    ) -> Result<DeliberationConfig, ScenarioError> {
        let problem = self.problems[problem_index].to_problem()?;
        let seed = mix(
            mix(self.seed, (n as u64) << 32 | u64::from(turns)),
            problem_index as u64,
        );
        let d = &self.deliberation;
        let mut config = DeliberationConfig::new(self.agents(n, &problem, seed)?, turns)
            .with_network(self.network(n))
            .with_seed(seed);
        config.timing = TimingModel {
            inference_ticks: d.inference_ticks.unwrap_or(config.timing.inference_ticks),
            wall_clock: d.wall_clock,
            ..config.timing
        };
        config.timeout = d.timeout.unwrap_or_else(|| config.default_timeout());
        if let Some(theta) = d.theta {
            config.theta =
                Threshold::from_f64(theta).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        }
        if let Some(m) = d.min_participants {
            config.min_participants = m.min(n as u32);
        }
        Ok(config)
    }
}

fn remote(endpoint: &str, model: &str, timeout_ms: u64) -> AgentBehavior {
    AgentBehavior::Remote {
        endpoint: endpoint.to_owned(),
        model: model.to_owned(),
        timeout: Duration::from_millis(timeout_ms),
    }
}

/// The j-th wrong answer: from the list when given, else the truth shifted
/// by j + 1 for numbers, or a labelled variant for text.
fn distractor(truth: &str, list: &[String], j: usize) -> String {
    if !list.is_empty() {
        return list[j % list.len()].clone();
    }
    match truth.parse::<i64>() {
        Ok(v) => (v + j as i64 + 1).to_string(),
        Err(_) => format!("not {truth} {}", j + 1),
    }
}

/// What one sweep cell produced.
#[derive(Clone, Debug)]
pub struct CellOutput {
    pub agents: usize,
    pub turns: u32,
    pub samples: Vec<MetricsSample>,
    pub chain: Chain,
    pub transcript: Vec<u8>,
}

impl CellOutput {
    pub fn file_stem(&self) -> String {
        format!("cell-{}a-{}t", self.agents, self.turns)
    }
}

/// Runs every problem in one cell on a fresh engine.
pub fn run_cell(
    scenario: &Scenario,
    agents: usize,
    turns: u32,
) -> Result<CellOutput, ScenarioError> {
    let mut engine = Engine::new();
    let mut samples = Vec::new();
    let mut transcript = Vec::new();
    for i in 0..scenario.problems.len() {
        let config = scenario.config(agents, turns, i)?;
        let problem = scenario.problems[i].to_problem()?;
        let result = engine.run_deliberation(&config, &problem)?;
        write_transcript(&result.transcript, &mut transcript)?;
        samples.push(result.metrics);
    }
    Ok(CellOutput {
        agents,
        turns,
        samples,
        chain: engine.chain().clone(),
        transcript,
    })
}

#[derive(Clone, Debug)]
pub struct ScenarioReport {
    pub out_dir: PathBuf,
    pub metrics_path: PathBuf,
    pub chain_paths: Vec<PathBuf>,
    pub rows: Vec<MetricsRow>,
    /// Chains whose persisted file failed to verify on reload, with the reason.
    pub failures: Vec<(PathBuf, String)>,
}

impl ScenarioReport {
    pub fn all_verified(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs the sweep and writes `metrics.csv`, one chain file and one
/// transcript stream per cell under `out_dir`. Every written chain is
/// reloaded and verified from genesis.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path) -> Result<ScenarioReport, ScenarioError> {
    scenario.validate()?;
    let cells = scenario.cells();
    let outputs: Vec<CellOutput> = cells
        .par_iter()
        .map(|&(n, t)| run_cell(scenario, n, t))
        .collect::<Result<_, _>>()?;

    fs::create_dir_all(out_dir.join("chains"))?;
    fs::create_dir_all(out_dir.join("transcripts"))?;
    let mut rows = Vec::new();
    let mut chain_paths = Vec::new();
    let mut failures = Vec::new();
    for cell in &outputs {
        let stem = cell.file_stem();
        let chain_path = out_dir.join("chains").join(format!("{stem}.chain"));
        cell.chain.save(&chain_path)?;
        fs::write(
            out_dir.join("transcripts").join(format!("{stem}.jsonl")),
            &cell.transcript,
        )?;
        if let Err(e) = Chain::load(&chain_path) {
            failures.push((chain_path.clone(), e.to_string()));
        }
        chain_paths.push(chain_path);
        rows.extend(cell.samples.iter().map(MetricsRow::from_sample));
    }
    let metrics_path = out_dir.join("metrics.csv");
    write_csv(&rows, fs::File::create(&metrics_path)?)?;
    Ok(ScenarioReport {
        out_dir: out_dir.to_owned(),
        metrics_path,
        chain_paths,
        rows,
        failures,
    })
}
