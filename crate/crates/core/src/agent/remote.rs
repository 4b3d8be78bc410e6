//! Chat-completion client for remotely hosted models.
//!
//! Request: `{"model": ..., "messages": [{"role": ..., "content": ...}]}`.
//! Reply: `{"choices": [{"message": {"role": "assistant", "content": ...}}]}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompt::Prompt;
use super::AgentError;

pub const SYSTEM_PROMPT: &str =
    "You are a deliberating agent. Reason carefully and follow the answer format exactly.";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct ChatReply {
    pub choices: Vec<ChatChoice>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct ChatChoice {
    pub message: ChatMessage,
}

impl ChatRequest {
    pub fn for_prompt(model: &str, prompt: &Prompt) -> Self {
        ChatRequest {
            model: model.to_owned(),
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: SYSTEM_PROMPT.into(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: prompt.render(),
                },
            ],
        }
    }
}

pub struct RemoteClient {
    endpoint: String,
    model: String,
    agent: ureq::Agent,
}

impl RemoteClient {
    pub fn new(endpoint: &str, model: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        RemoteClient {
            endpoint: endpoint.to_owned(),
            model: model.to_owned(),
            agent,
        }
    }

    /// Any transport failure, timeout, non-2xx status or malformed reply is
    /// reported as `Unavailable`.
    pub fn complete(&self, prompt: &Prompt) -> Result<String, AgentError> {
        let request = ChatRequest::for_prompt(&self.model, prompt);
        let mut response = self
            .agent
            .post(&self.endpoint)
            .send_json(&request)
            .map_err(|e| AgentError::Unavailable(e.to_string()))?;
        let reply: ChatReply = response
            .body_mut()
            .read_json()
            .map_err(|e| AgentError::Unavailable(format!("bad reply: {e}")))?;
        reply
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| AgentError::Unavailable("reply has no choices".into()))
    }
}
