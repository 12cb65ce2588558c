use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::Stage;

/// One structured-output call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub stage: Stage,
    /// The user's message, verbatim.
    pub message: String,
    pub prompt: String,
    pub schema: Json,
    /// 0 for the first try, 1 for the retry.
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("backend timed out")]
    Timeout,
    #[error("no scripted {stage:?} output for message {message:?}")]
    ScriptMiss { stage: Stage, message: String },
    #[error("backend failure: {0}")]
    Failure(String),
}

pub trait CompletionBackend: Send + Sync {
    fn complete_structured(&self, request: &CompletionRequest) -> Result<Json, BackendError>;
}

/// Canned outputs for one message. A stage given as a list answers the
/// n-th attempt with the n-th item, repeating the last.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedTurn {
    pub orchestrator: Attempts,
    #[serde(default, skip_serializing_if = "Attempts::is_empty")]
    pub filter: Attempts,
    #[serde(default, skip_serializing_if = "Attempts::is_empty")]
    pub viz: Attempts,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Json", into = "Json")]
pub struct Attempts(pub Vec<Json>);

impl Attempts {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn single(output: Json) -> Self {
        Attempts(vec![output])
    }
}

impl From<Json> for Attempts {
    fn from(v: Json) -> Self {
        match v {
            Json::Null => Attempts(Vec::new()),
            Json::Array(items) => Attempts(items),
            other => Attempts(vec![other]),
        }
    }
}

impl From<Attempts> for Json {
    fn from(mut a: Attempts) -> Json {
        if a.0.len() == 1 && !a.0[0].is_array() {
            a.0.pop().expect("one item")
        } else {
            Json::Array(a.0)
        }
    }
}

/// Answers from a fixed map keyed by the exact user message. A message
/// or stage with nothing scripted is an error, never a fallback.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    turns: BTreeMap<String, ScriptedTurn>,
}

impl ScriptedBackend {
    pub fn new(turns: impl IntoIterator<Item = (String, ScriptedTurn)>) -> Self {
        ScriptedBackend {
            turns: turns.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, message: impl Into<String>, turn: ScriptedTurn) {
        self.turns.insert(message.into(), turn);
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete_structured(&self, request: &CompletionRequest) -> Result<Json, BackendError> {
        let miss = || BackendError::ScriptMiss {
            stage: request.stage,
            message: request.message.clone(),
        };
        let turn = self.turns.get(&request.message).ok_or_else(miss)?;
        let attempts = match request.stage {
            Stage::Orchestrator => &turn.orchestrator,
            Stage::Filter => &turn.filter,
            Stage::Viz => &turn.viz,
        };
        let i = (request.attempt as usize).min(attempts.0.len().saturating_sub(1));
        attempts.0.get(i).cloned().ok_or_else(miss)
    }
}

/// Settings for [`RemoteBackend`].
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub url: String,
    pub token: Option<String>,
    pub timeout: Duration,
}

impl RemoteConfig {
    /// Read `LINKDASH_BACKEND_URL` and `LINKDASH_BACKEND_TOKEN`.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var("LINKDASH_BACKEND_URL").ok()?;
        Some(RemoteConfig {
            url,
            token: std::env::var("LINKDASH_BACKEND_TOKEN").ok(),
            timeout: Duration::from_secs(60),
        })
    }
}

/// POSTs `{stage, message, prompt, schema, temperature: 0}` and expects
/// `{"output": ...}` back.
///
/// The blocking HTTP client may be neither built nor dropped on an async
/// runtime thread, so it is built on first use (always on a blocking
/// thread in the service) and dropped on a plain thread when needed.
pub struct RemoteBackend {
    config: RemoteConfig,
    client: OnceLock<reqwest::blocking::Client>,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        if !config.url.starts_with("http://") && !config.url.starts_with("https://") {
            return Err(BackendError::Failure(format!("backend URL {:?} is not http(s)", config.url)));
        }
        Ok(RemoteBackend {
            config,
            client: OnceLock::new(),
        })
    }

    fn client(&self) -> Result<&reqwest::blocking::Client, BackendError> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let built = reqwest::blocking::Client::builder()
            .timeout(self.config.timeout)
            .build()
            .map_err(|e| BackendError::Failure(e.to_string()))?;
        Ok(self.client.get_or_init(|| built))
    }
}

impl Drop for RemoteBackend {
    fn drop(&mut self) {
        if let Some(client) = self.client.take() {
            if tokio::runtime::Handle::try_current().is_ok() {
                std::thread::spawn(move || drop(client));
            }
        }
    }
}

#[derive(Deserialize)]
struct RemoteReply {
    output: Json,
}

impl CompletionBackend for RemoteBackend {
    fn complete_structured(&self, request: &CompletionRequest) -> Result<Json, BackendError> {
        let body = serde_json::json!({
            "stage": request.stage,
            "message": request.message,
            "prompt": request.prompt,
            "schema": request.schema,
            "temperature": 0,
        });
        let mut call = self.client()?.post(&self.config.url).json(&body);
        if let Some(token) = &self.config.token {
            call = call.bearer_auth(token);
        }
        let response = call.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Failure(e.to_string())
            }
        })?;
        if !response.status().is_success() {
            return Err(BackendError::Failure(format!("backend answered {}", response.status())));
        }
        let reply: RemoteReply = response.json().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Failure(e.to_string())
            }
        })?;
        Ok(reply.output)
    }
}
