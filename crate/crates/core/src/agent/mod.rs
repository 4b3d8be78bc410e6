//! Agents and prompt construction.
//!
//! An initial prompt carries the problem and a style directive. A reflection
//! prompt concatenates the problem, the agent's own previous response and the
//! full previous turn in round-robin order. Agents answer through
//! [`Responder`]; decisions are read back with [`extract_action`].

mod behavior;
mod format;
mod prompt;
mod remote;

use thiserror::Error;

use crate::domain::AgentId;

pub use behavior::{majority, AgentBehavior, Responder};
pub use format::{extract_action, render_action, ANSWER_MARKER, POLICY_MARKER};
pub use prompt::{
    assign_prompt_styles, assign_prompt_styles_with, build_initial_prompt, build_reflection_prompt,
    ContextEntry, Prompt, PromptStyle,
};
pub use remote::{ChatChoice, ChatMessage, ChatReply, ChatRequest, RemoteClient, SYSTEM_PROMPT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    /// The agent could not answer this turn; the engine records an abstention.
    #[error("agent unavailable: {0}")]
    Unavailable(String),
    #[error("previous-turn utterance missing for agent {missing}")]
    IncompleteContext { missing: AgentId },
    #[error("script has no response for turn {turn}")]
    ScriptExhausted { turn: u32 },
    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),
}
