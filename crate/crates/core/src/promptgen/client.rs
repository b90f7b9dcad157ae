//! Chat-completions client and single-summary generation.

use std::time::Duration;

use log::{debug, warn};
use serde::Deserialize;
use serde_json::{json, Value};

use super::{build_messages, GenerationParams, Message, PromptBundle, PromptError, PromptgenConfig};
use crate::http::{retry_after, RetryPolicy};

pub const API_KEY_ENV: &str = "EDITSUM_API_KEY";
pub const API_BASE_ENV: &str = "EDITSUM_API_BASE";
const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";

/// Anything that turns a message list into one completion string.
pub trait ChatEndpoint: Send + Sync {
    fn complete(&self, messages: &[Message], params: &GenerationParams) -> Result<String, PromptError>;
}

/// Client for the `/chat/completions` JSON wire format.
#[derive(Debug, Clone)]
pub struct HttpChatClient {
    url: String,
    api_key: String,
    model: String,
    http: reqwest::blocking::Client,
    retry: RetryPolicy,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

fn is_context_overflow(body: &str) -> bool {
    let parsed: Option<Value> = serde_json::from_str(body).ok();
    let code = parsed
        .as_ref()
        .and_then(|v| v.pointer("/error/code"))
        .and_then(Value::as_str)
        .unwrap_or_default();
    code == "context_length_exceeded" || body.contains("maximum context length")
}

impl HttpChatClient {
    pub fn new(base_url: &str, api_key: &str, config: &PromptgenConfig) -> Result<Self, PromptError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs.max(1)))
            .build()
            .map_err(|e| PromptError::Transport(e.to_string()))?;
        Ok(Self {
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key: api_key.to_string(),
            model: config.model.clone(),
            http,
            retry: config.retry.clone(),
        })
    }

    /// Credentials from [`API_KEY_ENV`]; base URL from [`API_BASE_ENV`] if set.
    pub fn from_env(config: &PromptgenConfig) -> Result<Self, PromptError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| PromptError::MissingCredentials(API_KEY_ENV))?;
        let base = std::env::var(API_BASE_ENV).unwrap_or_else(|_| DEFAULT_API_BASE.to_string());
        Self::new(&base, &key, config)
    }

    fn request_body(&self, messages: &[Message], params: &GenerationParams) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": messages,
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "frequency_penalty": params.frequency_penalty,
            "presence_penalty": params.presence_penalty,
            "n": params.n,
        });
        if !params.stop.is_empty() {
            body["stop"] = json!([params.stop]);
        }
        // chat endpoints reject best_of; only send a non-default value
        if params.best_of != 1 {
            body["best_of"] = json!(params.best_of);
        }
        body
    }
}

impl ChatEndpoint for HttpChatClient {
    fn complete(&self, messages: &[Message], params: &GenerationParams) -> Result<String, PromptError> {
        let body = self.request_body(messages, params);
        let attempts = self.retry.max_attempts.max(1);
        let mut last_error = String::new();
        for attempt in 0..attempts {
            let last = attempt + 1 == attempts;
            let response = match self.http.post(&self.url).bearer_auth(&self.api_key).json(&body).send() {
                Ok(r) => r,
                Err(e) => {
                    last_error = e.to_string();
                    if !last {
                        std::thread::sleep(self.retry.delay(attempt, None));
                    }
                    continue;
                }
            };
            let status = response.status();
            if status.as_u16() == 429 || status.is_server_error() {
                debug!("chat endpoint returned {status}, attempt {}", attempt + 1);
                if last {
                    return Err(if status.as_u16() == 429 {
                        PromptError::RateLimited { attempts }
                    } else {
                        PromptError::Transport(format!("HTTP {status}"))
                    });
                }
                let wait = retry_after(response.headers());
                std::thread::sleep(self.retry.delay(attempt, wait));
                continue;
            }
            let text = response.text().map_err(|e| PromptError::Transport(e.to_string()))?;
            if !status.is_success() {
                if is_context_overflow(&text) {
                    return Err(PromptError::ContextOverflow(text));
                }
                return Err(PromptError::Transport(format!("HTTP {status}: {text}")));
            }
            let completion: Completion =
                serde_json::from_str(&text).map_err(|e| PromptError::InvalidResponse(e.to_string()))?;
            let choice = completion
                .choices
                .into_iter()
                .next()
                .ok_or_else(|| PromptError::InvalidResponse("no choices".into()))?;
            return Ok(choice.message.content.unwrap_or_default());
        }
        Err(PromptError::Transport(last_error))
    }
}

/// Cut at the first stop sequence and trim surrounding whitespace.
fn trim_completion(text: &str, stop: &str) -> String {
    let cut = if stop.is_empty() {
        text
    } else {
        text.split(stop).next().unwrap_or_default()
    };
    cut.trim().to_string()
}

/// Prompt the endpoint for one summary. An empty completion is retried once.
pub fn generate_summary(
    bundle: &PromptBundle,
    params: &GenerationParams,
    endpoint: &dyn ChatEndpoint,
) -> Result<String, PromptError> {
    let messages = build_messages(bundle)?;
    for attempt in 0..2 {
        let summary = trim_completion(&endpoint.complete(&messages, params)?, &params.stop);
        if !summary.is_empty() {
            return Ok(summary);
        }
        if attempt == 0 {
            warn!("empty completion, retrying once");
        }
    }
    Err(PromptError::EmptyCompletion)
}
