use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::format::{ANSWER_MARKER, POLICY_MARKER};
use super::AgentError;
use crate::domain::{AgentId, Problem, ProblemKind};
use crate::network::Utterance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PromptStyle {
    ChainOfThought,
    ZeroShot,
}

/// The first ⌈n/2⌉ agents reason step by step, the rest answer zero-shot.
pub fn assign_prompt_styles(n: usize) -> Vec<PromptStyle> {
    assign_prompt_styles_with(n, 0.5)
}

/// Like [`assign_prompt_styles`] with ⌈n·cot_fraction⌉ chain-of-thought agents.
pub fn assign_prompt_styles_with(n: usize, cot_fraction: f64) -> Vec<PromptStyle> {
    let fraction = cot_fraction.clamp(0.0, 1.0);
    // n is tiny, the product is exact enough; ceil of e.g. 4 * 0.5 must stay 2
    let cot = ((n as f64 * fraction) - 1e-9).ceil().max(0.0) as usize;
    (0..n)
        .map(|i| {
            if i < cot {
                PromptStyle::ChainOfThought
            } else {
                PromptStyle::ZeroShot
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextEntry {
    pub agent: AgentId,
    pub body: String,
}

/// A prompt for one agent at one turn.
///
/// Initial prompts carry only the problem. Reflection prompts add the agent's
/// own previous response and then every previous-turn response (its own
/// included) in round-robin order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prompt {
    pub problem: String,
    pub kind: ProblemKind,
    pub style: PromptStyle,
    pub own_previous: Option<String>,
    pub context: Vec<ContextEntry>,
}

const STEP_BY_STEP: &str =
    "Think through the problem step by step before giving your final answer.";
const REFLECT: &str =
    "Evaluate your previous response against the responses above and improve your answer.";

impl Prompt {
    pub fn is_reflection(&self) -> bool {
        self.own_previous.is_some()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "PROBLEM:\n{}\n", self.problem.trim());
        if let Some(own) = &self.own_previous {
            let _ = writeln!(out, "YOUR PREVIOUS RESPONSE:\n{}\n", own.trim());
            let _ = writeln!(out, "RESPONSES FROM THE PREVIOUS TURN:");
            for (i, entry) in self.context.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "[Agent {} {}]\n{}\n",
                    i + 1,
                    entry.agent.short(),
                    entry.body.trim()
                );
            }
            let _ = writeln!(out, "{REFLECT}");
        }
        if self.style == PromptStyle::ChainOfThought {
            let _ = writeln!(out, "{STEP_BY_STEP}");
        }
        match self.kind {
            ProblemKind::Definitive => {
                let _ = write!(
                    out,
                    "End with a final line of the form \"{ANSWER_MARKER} <value>\"."
                );
            }
            ProblemKind::Prioritized => {
                let _ = write!(
                    out,
                    "List every policy you support, one per line, each of the form \"{POLICY_MARKER} <policy>\"."
                );
            }
        }
        out
    }
}

pub fn build_initial_prompt(problem: &Problem, style: PromptStyle) -> Prompt {
    Prompt {
        problem: problem.statement.clone(),
        kind: problem.kind,
        style,
        own_previous: None,
        context: Vec::new(),
    }
}

/// Builds a reflection prompt from the previous turn.
///
/// `order` is the round-robin order; `all_prev` may arrive in any order but
/// must hold one utterance per agent in `order`. The output only depends on
/// the content, never on the input ordering.
pub fn build_reflection_prompt(
    problem: &Problem,
    style: PromptStyle,
    own_prev: &Utterance,
    all_prev: &[Utterance],
    order: &[AgentId],
) -> Result<Prompt, AgentError> {
    let by_agent: BTreeMap<AgentId, &Utterance> = all_prev.iter().map(|u| (u.agent, u)).collect();
    if !order.contains(&own_prev.agent) {
        return Err(AgentError::IncompleteContext {
            missing: own_prev.agent,
        });
    }
    let context = order
        .iter()
        .map(|agent| {
            by_agent
                .get(agent)
                .map(|u| ContextEntry {
                    agent: *agent,
                    body: u.body.clone(),
                })
                .ok_or(AgentError::IncompleteContext { missing: *agent })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prompt {
        problem: problem.statement.clone(),
        kind: problem.kind,
        style,
        own_previous: Some(own_prev.body.clone()),
        context,
    })
}
