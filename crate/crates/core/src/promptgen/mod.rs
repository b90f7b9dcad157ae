//! Five-shot chat prompts and synthetic summary generation.

mod client;
mod job;
mod qc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::SerializedInput;

pub use client::{generate_summary, ChatEndpoint, HttpChatClient, API_BASE_ENV, API_KEY_ENV};
pub use job::{run_generation_job, GenerationItem, JobFailure, JobReport};
pub use qc::{sample_quality_check, QualityCheck, QcKeyEntry, QcRow};

pub const SYSTEM_INSTRUCTION: &str = include_str!("../../assets/system_instruction.txt");
const DEMONSTRATIONS_JSON: &str = include_str!("../../assets/demonstrations.json");

pub const DEMONSTRATION_COUNT: usize = 5;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("bad prompt bundle: {0}")]
    BadBundle(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned an empty completion")]
    EmptyCompletion,
    #[error("input exceeds the endpoint context limit: {0}")]
    ContextOverflow(String),
    #[error("unexpected endpoint response: {0}")]
    InvalidResponse(String),
    #[error("{0} is not set")]
    MissingCredentials(&'static str),
    #[error("need {needed} paired samples, have {available}")]
    InsufficientPool { needed: usize, available: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    fn new(role: Role, content: impl Into<String>) -> Self {
        Self { role, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demonstration {
    pub input: SerializedInput,
    pub summary: String,
}

/// Demonstrations shipped with the crate.
pub fn default_demonstrations() -> Vec<Demonstration> {
    serde_json::from_str(DEMONSTRATIONS_JSON).expect("bundled demonstrations are valid JSON")
}

/// Everything needed to prompt for one target diff.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_instruction: String,
    pub demonstrations: Vec<Demonstration>,
    pub target: SerializedInput,
}

impl PromptBundle {
    /// Bundle with the shipped instruction and demonstrations.
    pub fn with_defaults(target: SerializedInput) -> Self {
        Self {
            system_instruction: SYSTEM_INSTRUCTION.trim_end().to_string(),
            demonstrations: default_demonstrations(),
            target,
        }
    }

    pub fn retarget(&self, target: SerializedInput) -> Self {
        Self { target, ..self.clone() }
    }
}

/// Sampling parameters sent with every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationParams {
    pub max_tokens: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
    pub stop: String,
    pub n: u32,
    pub best_of: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            max_tokens: 1000,
            temperature: 0.0,
            top_p: 1.0,
            frequency_penalty: 0.2,
            presence_penalty: 0.0,
            stop: "\n".to_string(),
            n: 1,
            best_of: 1,
        }
    }
}

/// `[promptgen]` configuration section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptgenConfig {
    pub model: String,
    /// Requests in flight at once.
    pub concurrency: usize,
    pub timeout_secs: u64,
    pub retry: crate::http::RetryPolicy,
    pub params: GenerationParams,
}

impl Default for PromptgenConfig {
    fn default() -> Self {
        Self {
            model: "gpt-3.5-turbo".to_string(),
            concurrency: 4,
            timeout_secs: 120,
            retry: Default::default(),
            params: Default::default(),
        }
    }
}

/// Render a serialized diff the way demonstrations show it to the model:
/// one "old text:" line and one "new text:" line, omitting an empty group.
pub fn render_diff(input: &SerializedInput) -> Result<String, PromptError> {
    let diff = input
        .parse()
        .map_err(|e| PromptError::BadBundle(format!("unparseable diff: {e}")))?;
    let mut lines = Vec::with_capacity(2);
    if !diff.removed.is_empty() {
        lines.push(format!("old text: {}", diff.removed.join(" ")));
    }
    if !diff.added.is_empty() {
        lines.push(format!("new text: {}", diff.added.join(" ")));
    }
    if lines.is_empty() {
        return Err(PromptError::BadBundle("empty diff".into()));
    }
    Ok(lines.join("\n"))
}

/// System turn, five user/assistant pairs, then the target as a user turn.
pub fn build_messages(bundle: &PromptBundle) -> Result<Vec<Message>, PromptError> {
    if bundle.demonstrations.len() != DEMONSTRATION_COUNT {
        return Err(PromptError::BadBundle(format!(
            "expected {DEMONSTRATION_COUNT} demonstrations, got {}",
            bundle.demonstrations.len()
        )));
    }
    let mut messages = Vec::with_capacity(2 * DEMONSTRATION_COUNT + 2);
    messages.push(Message::new(Role::System, bundle.system_instruction.clone()));
    for demo in &bundle.demonstrations {
        messages.push(Message::new(Role::User, render_diff(&demo.input)?));
        messages.push(Message::new(Role::Assistant, demo.summary.clone()));
    }
    messages.push(Message::new(Role::User, render_diff(&bundle.target)?));
    Ok(messages)
}
