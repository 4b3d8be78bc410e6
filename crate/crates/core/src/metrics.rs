//! Per-deliberation measurements and their tabular form.
//!
//! Times are logical transport ticks. The round-trip cost (TRC) of a
//! deliberation is the initial-round time plus the reflection time; prompt
//! generation time (PGT) is the share of both spent assembling prompts.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{fraction_to_f64, Action, AgentId, CanonicalValue, Fraction, RecordOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("problem has no ground truth; accuracy unavailable")]
pub struct AccuracyUnavailable;

/// Share of all agents whose value equals `truth`. Abstainers count as wrong.
pub fn consensus_accuracy(
    actions: &BTreeMap<AgentId, Action>,
    truth: Option<&CanonicalValue>,
) -> Result<Fraction, AccuracyUnavailable> {
    let truth = truth.ok_or(AccuracyUnavailable)?;
    if actions.is_empty() {
        return Ok(Fraction::from_integer(0));
    }
    let correct = actions
        .values()
        .filter(|a| match a {
            Action::Definitive { value, .. } => value == truth,
            Action::Prioritized { policies } => policies.contains(truth),
            Action::Abstain => false,
        })
        .count();
    Ok(Fraction::new(correct as u64, actions.len() as u64))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Timing {
    pub initial_round: u64,
    pub reflection: u64,
    pub prompt_generation: u64,
}

impl Timing {
    pub fn total(&self) -> u64 {
        self.initial_round + self.reflection
    }
}

/// What one deliberation measured.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MetricsSample {
    pub deliberation_id: String,
    pub problem_id: String,
    pub agents: usize,
    pub max_turns: u32,
    /// Reflection turns that completed.
    pub turns_used: u32,
    pub outcome: RecordOutcome,
    pub confidence: Fraction,
    /// Accuracy of each completed round, initial round first; `None` without
    /// a ground truth.
    pub accuracy_per_turn: Option<Vec<Fraction>>,
    pub timing: Timing,
    pub block_bytes: usize,
    pub block_height: u64,
    pub participation: Fraction,
    pub announce_bytes: u64,
    pub data_bytes: u64,
    pub abstentions: u32,
    pub verification_failures: u32,
}

fn outcome_label(o: RecordOutcome) -> &'static str {
    match o {
        RecordOutcome::Success => "success",
        RecordOutcome::Hung(r) => match r {
            crate::domain::HungReason::Timeout => "hung_timeout",
            crate::domain::HungReason::Participation => "hung_participation",
            crate::domain::HungReason::NoConvergence => "hung_no_convergence",
            crate::domain::HungReason::Oversize => "hung_oversize",
        },
    }
}

fn decimal(f: Fraction) -> String {
    format!("{:.6}", fraction_to_f64(f))
}

/// One flat table row. Fractions are written with six decimals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub cell_agents: usize,
    pub cell_turns: u32,
    pub deliberation_id: String,
    pub problem_id: String,
    pub outcome: String,
    pub turns_used: u32,
    pub confidence: String,
    pub accuracy_per_turn: String,
    pub final_accuracy: String,
    pub initial_round_ticks: u64,
    pub reflection_ticks: u64,
    pub prompt_generation_ticks: u64,
    pub trc_ticks: u64,
    pub block_bytes: usize,
    pub block_height: u64,
    pub participation: String,
    pub announce_bytes: u64,
    pub data_bytes: u64,
    pub abstentions: u32,
    pub verification_failures: u32,
}

impl MetricsRow {
    pub fn from_sample(s: &MetricsSample) -> Self {
        let acc = s.accuracy_per_turn.as_deref();
        MetricsRow {
            cell_agents: s.agents,
            cell_turns: s.max_turns,
            deliberation_id: s.deliberation_id.clone(),
            problem_id: s.problem_id.clone(),
            outcome: outcome_label(s.outcome).to_owned(),
            turns_used: s.turns_used,
            confidence: decimal(s.confidence),
            accuracy_per_turn: acc
                .map(|a| a.iter().map(|f| decimal(*f)).collect::<Vec<_>>().join(";"))
                .unwrap_or_default(),
            final_accuracy: acc
                .and_then(|a| a.last())
                .map(|f| decimal(*f))
                .unwrap_or_default(),
            initial_round_ticks: s.timing.initial_round,
            reflection_ticks: s.timing.reflection,
            prompt_generation_ticks: s.timing.prompt_generation,
            trc_ticks: s.timing.total(),
            block_bytes: s.block_bytes,
            block_height: s.block_height,
            participation: decimal(s.participation),
            announce_bytes: s.announce_bytes,
            data_bytes: s.data_bytes,
            abstentions: s.abstentions,
            verification_failures: s.verification_failures,
        }
    }
}

/// Writes rows as CSV with a header line.
pub fn write_csv<W: io::Write>(rows: &[MetricsRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<MetricsRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Per-cell aggregate of a metrics table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub agents: usize,
    pub turns: u32,
    pub deliberations: usize,
    pub successes: usize,
    pub mean_trc_ticks: f64,
    pub mean_prompt_generation_ticks: f64,
    pub mean_block_bytes: f64,
    pub mean_participation: f64,
    pub mean_final_accuracy: Option<f64>,
}

/// Groups rows by (agents, turns) in first-seen order.
pub fn summarize(rows: &[MetricsRow]) -> Vec<CellSummary> {
    let mut cells: Vec<((usize, u32), Vec<&MetricsRow>)> = Vec::new();
    for r in rows {
        let key = (r.cell_agents, r.cell_turns);
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => cells.push((key, vec![r])),
        }
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    cells
        .into_iter()
        .map(|((agents, turns), rs)| {
            let col = |f: &dyn Fn(&MetricsRow) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
            let acc: Vec<f64> = rs
                .iter()
                .filter_map(|r| r.final_accuracy.parse().ok())
                .collect();
            CellSummary {
                agents,
                turns,
                deliberations: rs.len(),
                successes: rs.iter().filter(|r| r.outcome == "success").count(),
                mean_trc_ticks: mean(&col(&|r| r.trc_ticks as f64)),
                mean_prompt_generation_ticks: mean(&col(&|r| r.prompt_generation_ticks as f64)),
                mean_block_bytes: mean(&col(&|r| r.block_bytes as f64)),
                mean_participation: mean(&col(&|r| r.participation.parse().unwrap_or(0.0))),
                mean_final_accuracy: (!acc.is_empty()).then(|| mean(&acc)),
            }
        })
        .collect()
}
