use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::format::{extract_action, render_action};
use super::prompt::Prompt;
use super::remote::RemoteClient;
use super::AgentError;
use crate::domain::{Action, CanonicalValue, ProblemKind};

/// Anything that can answer a prompt. Implementations must be deterministic
/// given `(prompt, turn)` for runs to be reproducible.
pub trait Responder: Send + Sync + fmt::Debug {
    fn respond(&self, prompt: &Prompt, turn: u32) -> Result<String, AgentError>;
}

/// Built-in stand-ins for a language model.
#[derive(Clone, Debug)]
pub enum AgentBehavior {
    /// Returns `responses[turn]` verbatim.
    Scripted { responses: Vec<String> },
    /// Starts from `initial` and, at each reflection turn, adopts the strict
    /// majority decision of the previous turn with probability `p_adopt`.
    Convergent {
        initial: Action,
        p_adopt: f64,
        seed: u64,
    },
    /// Always answers with the same action.
    Stubborn { action: Action },
    /// Forwards the prompt to a chat-completion endpoint.
    Remote {
        endpoint: String,
        model: String,
        timeout: Duration,
    },
}

impl AgentBehavior {
    pub fn scripted<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        AgentBehavior::Scripted {
            responses: responses.into_iter().map(Into::into).collect(),
        }
    }

    pub fn convergent(initial: Action, p_adopt: f64, seed: u64) -> Self {
        AgentBehavior::Convergent {
            initial,
            p_adopt: p_adopt.clamp(0.0, 1.0),
            seed,
        }
    }

    pub fn stubborn(action: Action) -> Self {
        AgentBehavior::Stubborn { action }
    }

    /// Checks the behavior can serve `max_turns` reflection turns.
    pub fn validate(&self, max_turns: u32) -> Result<(), AgentError> {
        match self {
            AgentBehavior::Scripted { responses } if responses.len() < max_turns as usize + 1 => {
                Err(AgentError::ScriptExhausted {
                    turn: responses.len() as u32,
                })
            }
            AgentBehavior::Convergent { p_adopt, .. } if !(0.0..=1.0).contains(p_adopt) => Err(
                AgentError::InvalidBehavior(format!("p_adopt {p_adopt} outside [0, 1]")),
            ),
            _ => Ok(()),
        }
    }
}

impl Responder for AgentBehavior {
    fn respond(&self, prompt: &Prompt, turn: u32) -> Result<String, AgentError> {
        match self {
            AgentBehavior::Scripted { responses } => responses
                .get(turn as usize)
                .cloned()
                .ok_or(AgentError::ScriptExhausted { turn }),
            AgentBehavior::Stubborn { action } => Ok(render_action(&with_argument(
                action,
                "I have considered the other views and maintain my position.",
            ))),
            AgentBehavior::Convergent {
                initial,
                p_adopt,
                seed,
            } => Ok(converge(initial, *p_adopt, *seed, prompt, turn)),
            AgentBehavior::Remote {
                endpoint,
                model,
                timeout,
            } => RemoteClient::new(endpoint, model, *timeout).complete(prompt),
        }
    }
}

fn with_argument(action: &Action, argument: &str) -> Action {
    match action {
        Action::Definitive { value, .. } => Action::Definitive {
            value: value.clone(),
            argument: argument.to_owned(),
        },
        other => other.clone(),
    }
}

fn converge(initial: &Action, p_adopt: f64, seed: u64, prompt: &Prompt, turn: u32) -> String {
    let Some(own_text) = prompt.own_previous.as_deref().filter(|_| turn > 0) else {
        return render_action(&with_argument(initial, "Initial assessment."));
    };
    let kind = prompt.kind;
    let own = extract_action(own_text, kind);
    let context: Vec<Action> = prompt
        .context
        .iter()
        .map(|e| extract_action(&e.body, kind))
        .collect();

    // one draw per turn from a stream keyed by (seed, turn): the answer is a
    // pure function of the prompt, whatever order agents are polled in
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (u64::from(turn)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let adopt = rng.random::<f64>() < p_adopt;

    let summary = summarize(&context);
    let next = match (majority(&context, kind), adopt) {
        (Some(m), true) => m,
        _ => own,
    };
    let argument = format!("Reviewed {} responses: {}.", context.len(), summary);
    render_action(&with_argument(&next, &argument))
}

fn summarize(context: &[Action]) -> String {
    context
        .iter()
        .map(|a| match a {
            Action::Definitive { value, .. } => value.to_string(),
            Action::Prioritized { policies } if !policies.is_empty() => policies
                .iter()
                .map(CanonicalValue::as_str)
                .collect::<Vec<_>>()
                .join("+"),
            _ => "abstain".to_owned(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Strict majority over the whole context; ties and pluralities give `None`.
///
/// For prioritized problems the majority decision is the set of policies held
/// by more than half of the context, when that set is non-empty.
pub fn majority(context: &[Action], kind: ProblemKind) -> Option<Action> {
    let n = context.len();
    match kind {
        ProblemKind::Definitive => {
            let mut counts: BTreeMap<&CanonicalValue, usize> = BTreeMap::new();
            for v in context.iter().filter_map(Action::value) {
                *counts.entry(v).or_default() += 1;
            }
            counts
                .into_iter()
                .find(|(_, c)| 2 * c > n)
                .map(|(v, _)| Action::Definitive {
                    value: v.clone(),
                    argument: String::new(),
                })
        }
        ProblemKind::Prioritized => {
            let mut counts: BTreeMap<&CanonicalValue, usize> = BTreeMap::new();
            for set in context.iter().filter_map(Action::policies) {
                for p in set {
                    *counts.entry(p).or_default() += 1;
                }
            }
            let policies: std::collections::BTreeSet<_> = counts
                .into_iter()
                .filter(|(_, c)| 2 * c > n)
                .map(|(p, _)| p.clone())
                .collect();
            (!policies.is_empty()).then_some(Action::Prioritized { policies })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::prompt::{ContextEntry, PromptStyle};
    use crate::domain::AgentId;

    fn reflection(own: &str, context: &[&str], kind: ProblemKind) -> Prompt {
        Prompt {
            problem: "p".into(),
            kind,
            style: PromptStyle::ZeroShot,
            own_previous: Some(own.into()),
            context: context
                .iter()
                .enumerate()
                .map(|(i, b)| ContextEntry {
                    agent: AgentId([i as u8; 32]),
                    body: b.to_string(),
                })
                .collect(),
        }
    }

    fn value_of(text: &str) -> String {
        extract_action(text, ProblemKind::Definitive)
            .value()
            .unwrap()
            .to_string()
    }

    #[test]
    fn stubborn_ignores_everything() {
        let b = AgentBehavior::stubborn(Action::definitive("7", ""));
        let p = reflection(
            "ANSWER: 5",
            &["ANSWER: 5", "ANSWER: 5"],
            ProblemKind::Definitive,
        );
        let out = b.respond(&p, 3).unwrap();
        assert!(out.ends_with("ANSWER: 7"), "{out}");
    }

    #[test]
    fn convergent_certainty_cases() {
        let p = reflection(
            "ANSWER: 9",
            &["ANSWER: 5", "ANSWER: 5", "ANSWER: 9"],
            ProblemKind::Definitive,
        );
        let always = AgentBehavior::convergent(Action::definitive("9", ""), 1.0, 1);
        assert!(always.respond(&p, 1).unwrap().ends_with("ANSWER: 5"));
        let never = AgentBehavior::convergent(Action::definitive("9", ""), 0.0, 1);
        assert_eq!(value_of(&never.respond(&p, 1).unwrap()), "9");
    }

    #[test]
    fn convergent_initial_turn_uses_initial_action() {
        let b = AgentBehavior::convergent(Action::definitive("12", ""), 1.0, 4);
        let p = Prompt {
            problem: "p".into(),
            kind: ProblemKind::Definitive,
            style: PromptStyle::ChainOfThought,
            own_previous: None,
            context: vec![],
        };
        assert_eq!(value_of(&b.respond(&p, 0).unwrap()), "12");
    }

    #[test]
    fn ties_keep_own_answer() {
        let p = reflection(
            "ANSWER: 9",
            &["ANSWER: 5", "ANSWER: 9"],
            ProblemKind::Definitive,
        );
        let b = AgentBehavior::convergent(Action::definitive("9", ""), 1.0, 1);
        assert_eq!(value_of(&b.respond(&p, 1).unwrap()), "9");
    }

    #[test]
    fn convergent_is_deterministic() {
        let p = reflection(
            "ANSWER: 9",
            &["ANSWER: 5", "ANSWER: 5", "ANSWER: 9"],
            ProblemKind::Definitive,
        );
        let b = AgentBehavior::convergent(Action::definitive("9", ""), 0.5, 77);
        for turn in 1..20 {
            assert_eq!(b.respond(&p, turn).unwrap(), b.respond(&p, turn).unwrap());
        }
    }

    #[test]
    fn prioritized_majority_set() {
        let ctx = [
            Action::prioritized(["a", "b"]),
            Action::prioritized(["a"]),
            Action::prioritized(["a", "b", "c"]),
        ];
        assert_eq!(
            majority(&ctx, ProblemKind::Prioritized),
            Some(Action::prioritized(["a", "b"]))
        );
        let p = reflection(
            "POLICY: c",
            &["POLICY: a\nPOLICY: b", "POLICY: a", "POLICY: a\nPOLICY: c"],
            ProblemKind::Prioritized,
        );
        let b = AgentBehavior::convergent(Action::prioritized(["c"]), 1.0, 0);
        let out = extract_action(&b.respond(&p, 1).unwrap(), ProblemKind::Prioritized);
        assert_eq!(out, Action::prioritized(["a"]));
    }

    #[test]
    fn scripts_must_cover_all_turns() {
        let b = AgentBehavior::scripted(["ANSWER: 1", "ANSWER: 2"]);
        assert!(b.validate(1).is_ok());
        assert_eq!(b.validate(2), Err(AgentError::ScriptExhausted { turn: 2 }));
        let p = reflection("", &[], ProblemKind::Definitive);
        assert_eq!(b.respond(&p, 1).unwrap(), "ANSWER: 2");
        assert!(b.respond(&p, 2).is_err());
    }

    /// With p_adopt = 1 and a strict initial majority, every agent sees the
    /// same R^0 and adopts the same value, so unanimity holds after one turn.
    /// Checked over every assignment of values {0,1,2} to up to 5 agents.
    #[test]
    fn certain_adoption_converges_within_two_turns() {
        for n in 1..=5usize {
            for code in 0..3usize.pow(n as u32) {
                let initial: Vec<String> = (0..n)
                    .map(|i| ((code / 3usize.pow(i as u32)) % 3).to_string())
                    .collect();
                let actions: Vec<Action> =
                    initial.iter().map(|v| Action::definitive(v, "")).collect();
                let Some(_) = majority(&actions, ProblemKind::Definitive) else {
                    continue;
                };

                let agents: Vec<AgentBehavior> = actions
                    .iter()
                    .enumerate()
                    .map(|(i, a)| AgentBehavior::convergent(a.clone(), 1.0, i as u64))
                    .collect();
                let mut bodies: Vec<String> = actions.iter().map(render_action).collect();
                let mut unanimous = false;
                for turn in 1..=2 {
                    let refs: Vec<&str> = bodies.iter().map(String::as_str).collect();
                    bodies = agents
                        .iter()
                        .zip(&bodies)
                        .map(|(agent, own)| {
                            agent
                                .respond(&reflection(own, &refs, ProblemKind::Definitive), turn)
                                .unwrap()
                        })
                        .collect();
                    let values: std::collections::BTreeSet<_> =
                        bodies.iter().map(|b| value_of(b)).collect();
                    if values.len() == 1 {
                        unanimous = true;
                        break;
                    }
                }
                assert!(unanimous, "n={n} initial={initial:?}");
            }
        }
    }
}
