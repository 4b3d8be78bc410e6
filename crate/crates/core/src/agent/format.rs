//! The answer-marker convention.
//!
//! A definitive answer is the text after the last `ANSWER:` marker on its
//! line. A prioritized answer is every line starting with `POLICY:`.

use std::collections::BTreeSet;

use crate::domain::{normalize_value, Action, ProblemKind};

pub const ANSWER_MARKER: &str = "ANSWER:";
pub const POLICY_MARKER: &str = "POLICY:";

/// Pulls the decision out of free text. Missing markers give an abstention:
/// `Abstain` for definitive problems, an empty policy set for prioritized ones.
pub fn extract_action(text: &str, kind: ProblemKind) -> Action {
    match kind {
        ProblemKind::Definitive => {
            let Some(at) = text.rfind(ANSWER_MARKER) else {
                return Action::Abstain;
            };
            let rest = &text[at + ANSWER_MARKER.len()..];
            let value = rest.lines().next().unwrap_or("");
            Action::definitive(value, text[..at].trim())
        }
        ProblemKind::Prioritized => {
            let policies: BTreeSet<_> = text
                .lines()
                .filter_map(|line| line.trim_start().strip_prefix(POLICY_MARKER))
                .filter_map(normalize_value)
                .collect();
            Action::Prioritized { policies }
        }
    }
}

/// Renders an action with markers so that [`extract_action`] reads it back.
pub fn render_action(action: &Action) -> String {
    match action {
        Action::Abstain => "I abstain.".to_owned(),
        Action::Definitive { value, argument } if argument.is_empty() => {
            format!("{ANSWER_MARKER} {value}")
        }
        Action::Definitive { value, argument } => format!("{argument}\n{ANSWER_MARKER} {value}"),
        Action::Prioritized { policies } if policies.is_empty() => {
            "No policies proposed.".to_owned()
        }
        Action::Prioritized { policies } => policies
            .iter()
            .map(|p| format!("{POLICY_MARKER} {p}"))
            .collect::<Vec<_>>()
            .join("\n"),
    }
}
