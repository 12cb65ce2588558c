use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{respond, AgentConfig, AgentError, Route, ScriptedBackend, ScriptedTurn};
use crate::datapackage::{load_package, Package, PackageError};
use crate::grammar::{parse_spec_value, validate_spec};
use crate::session::{apply_action, apply_chat, digest, snapshot, Action, SessionError, SessionState, Snapshot};

pub const TRANSCRIPT_VERSION: u32 = 1;

/// A chat message with the agent answers to replay for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatStep {
    pub text: String,
    pub scripted: ScriptedTurn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Step {
    Chat { chat: ChatStep },
    Action { action: Action },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transcript {
    pub version: u32,
    /// Descriptor path, relative to the transcript file.
    pub package: PathBuf,
    #[serde(default)]
    pub steps: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_digest: Option<String>,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("cannot read transcript {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed transcript: {0}")]
    Malformed(String),
    #[error("transcript version {0} is not supported")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Package(#[from] PackageError),
    #[error("step {index}: scripted {stage} output is invalid: {reason}")]
    InvalidScript { index: usize, stage: &'static str, reason: String },
    #[error("step {index}: {source}")]
    Agent { index: usize, source: AgentError },
    #[error("step {index}: {source}")]
    Session { index: usize, source: SessionError },
}

/// A transcript with its package loaded and its scripts checked.
#[derive(Debug, Clone)]
pub struct LoadedTranscript {
    pub transcript: Transcript,
    pub package: Package,
}

impl LoadedTranscript {
    /// The scripted backend answering every chat step of this transcript.
    pub fn backend(&self) -> ScriptedBackend {
        ScriptedBackend::new(self.transcript.steps.iter().filter_map(|s| match s {
            Step::Chat { chat } => Some((chat.text.clone(), chat.scripted.clone())),
            Step::Action { .. } => None,
        }))
    }
}

fn check_script(index: usize, turn: &ScriptedTurn, package: &Package) -> Result<(), TranscriptError> {
    let bad = |stage, reason: String| TranscriptError::InvalidScript { index, stage, reason };
    for out in &turn.orchestrator.0 {
        serde_json::from_value::<Route>(out.clone()).map_err(|e| bad("orchestrator", e.to_string()))?;
    }
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Filters {
        #[allow(dead_code)]
        filters: Vec<crate::agents::FilterCommand>,
    }
    for out in &turn.filter.0 {
        serde_json::from_value::<Filters>(out.clone()).map_err(|e| bad("filter", e.to_string()))?;
    }
    for out in &turn.viz.0 {
        let spec = parse_spec_value(out).map_err(|e| bad("viz", e.to_string()))?;
        if let Some(v) = validate_spec(&spec, package).first() {
            return Err(bad("viz", format!("{}: {}", v.locus, v.reason)));
        }
    }
    Ok(())
}

/// Read a transcript, load its package, and check every scripted output.
pub fn load_transcript(path: impl AsRef<Path>) -> Result<LoadedTranscript, TranscriptError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| TranscriptError::Io {
        path: path.to_owned(),
        source,
    })?;
    let transcript: Transcript = serde_json::from_str(&text).map_err(|e| TranscriptError::Malformed(e.to_string()))?;
    if transcript.version != TRANSCRIPT_VERSION {
        return Err(TranscriptError::UnsupportedVersion(transcript.version));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let package = load_package(base.join(&transcript.package))?;
    let mut seen: BTreeMap<&str, &ScriptedTurn> = BTreeMap::new();
    for (index, step) in transcript.steps.iter().enumerate() {
        if let Step::Chat { chat } = step {
            check_script(index, &chat.scripted, &package)?;
            if seen.insert(&chat.text, &chat.scripted).is_some_and(|prev| prev != &chat.scripted) {
                return Err(TranscriptError::Malformed(format!(
                    "step {index}: {:?} is scripted twice with different answers",
                    chat.text
                )));
            }
        }
    }
    Ok(LoadedTranscript { transcript, package })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub index: usize,
    pub label: String,
    pub version: u64,
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub steps: Vec<StepReport>,
    pub state: SessionState,
    pub snapshot: Snapshot,
    pub digest: String,
    pub elapsed: Duration,
}

impl ReplayReport {
    /// False only when the transcript names a digest and it differs.
    pub fn digest_matches(&self, expected: Option<&str>) -> bool {
        expected.is_none_or(|d| d == self.digest)
    }
}

fn label(step: &Step) -> String {
    match step {
        Step::Chat { chat } => format!("chat {:?}", chat.text),
        Step::Action { action } => {
            let json = serde_json::to_value(action).expect("action serializes");
            format!("action {}", json["type"].as_str().unwrap_or("?"))
        }
    }
}

/// Run every step of a loaded transcript in a fresh session.
pub fn replay(loaded: &LoadedTranscript, config: &AgentConfig) -> Result<ReplayReport, TranscriptError> {
    let started = Instant::now();
    let package = &loaded.package;
    let backend = loaded.backend();
    let mut state = SessionState::new("replay", package);
    let mut steps = Vec::new();
    for (index, step) in loaded.transcript.steps.iter().enumerate() {
        state = match step {
            Step::Chat { chat } => {
                let output = respond(&chat.text, package, &state.registry, &backend, config)
                    .map_err(|source| TranscriptError::Agent { index, source })?;
                apply_chat(&state, package, output.into_turn(&chat.text), None)
            }
            Step::Action { action } => apply_action(&state, package, action.clone(), None),
        }
        .map_err(|source| TranscriptError::Session { index, source })?
        .0;
        steps.push(StepReport {
            index,
            label: label(step),
            version: state.version,
            counts: state.counts(package),
        });
    }
    Ok(ReplayReport {
        steps,
        snapshot: snapshot(&state),
        digest: digest(&state),
        state,
        elapsed: started.elapsed(),
    })
}
