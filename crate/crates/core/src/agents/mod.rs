//! The agent pipeline: an orchestrator routes each message to a filter
//! agent, a visualization agent, or both.
//!
//! Every agent answers with structured output against a published schema.
//! An answer that does not decode, or that names data the context does not
//! offer, is re-requested once and then rejected; nothing invalid leaves
//! this module.

mod backend;
mod context;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::datapackage::{FieldKind, Package};
use crate::grammar::{grammar_schema, parse_spec_value, validate_spec, Bounds, FilterTransform, SelectionKind, Transform, VizSpec};
use crate::linking::{Selection, SelectionPayload, SelectionRegistry};
use crate::value::Value;

pub use backend::{
    Attempts, BackendError, CompletionBackend, CompletionRequest, RemoteBackend, RemoteConfig, ScriptedBackend,
    ScriptedTurn,
};
pub use context::{build_context, AgentConfig, AgentContext, EntityContext, FieldContext, SelectionContext};

const ORCHESTRATOR_PROMPT: &str = include_str!("../../assets/prompts/orchestrator.v1.txt");
const FILTER_PROMPT: &str = include_str!("../../assets/prompts/filter.v1.txt");
const VIZ_PROMPT: &str = include_str!("../../assets/prompts/viz.v1.txt");
const RETRY_PROMPT: &str = include_str!("../../assets/prompts/retry.v1.txt");
const ROUTE_SCHEMA: &str = include_str!("../../assets/schemas/route.schema.json");
const FILTER_SCHEMA: &str = include_str!("../../assets/schemas/filter.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Orchestrator,
    Filter,
    Viz,
}

impl Stage {
    pub fn schema(self) -> Json {
        match self {
            Stage::Orchestrator => serde_json::from_str(ROUTE_SCHEMA).expect("bundled schema"),
            Stage::Filter => serde_json::from_str(FILTER_SCHEMA).expect("bundled schema"),
            Stage::Viz => grammar_schema(),
        }
    }

    fn template(self) -> &'static str {
        match self {
            Stage::Orchestrator => ORCHESTRATOR_PROMPT,
            Stage::Filter => FILTER_PROMPT,
            Stage::Viz => VIZ_PROMPT,
        }
    }
}

/// A raw agent answer, kept for disclosure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub stage: Stage,
    pub attempt: u32,
    pub output: Json,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("backend timed out")]
    BackendTimeout,
    #[error("no scripted {stage:?} output for message {message:?}")]
    ScriptMiss { stage: Stage, message: String },
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("{stage:?} output rejected: {reason}")]
    SchemaViolation { stage: Stage, reason: String, traces: Vec<Trace> },
    #[error("unresolvable field: {reason}")]
    UnresolvableField { reason: String, traces: Vec<Trace> },
    #[error("agent context is {size} bytes, over the {budget} byte budget")]
    ContextTooLarge { size: usize, budget: usize },
}

impl From<BackendError> for AgentError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Timeout => AgentError::BackendTimeout,
            BackendError::ScriptMiss { stage, message } => AgentError::ScriptMiss { stage, message },
            BackendError::Failure(m) => AgentError::Backend(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Route {
    pub wants_filter: bool,
    pub wants_viz: bool,
    /// Text answer for messages that need no action.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
}

/// A filter as requested by the filter agent. After validation, interval
/// commands carry both bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterCommand {
    pub entity: String,
    pub field: String,
    pub kind: SelectionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Value>>,
}

impl FilterCommand {
    pub fn to_selection(&self, name: &str, package: &Package) -> Result<Selection, crate::linking::LinkError> {
        let payload = match self.kind {
            SelectionKind::Interval => SelectionPayload::interval([Bounds::new(self.min, self.max)]),
            SelectionKind::Point => SelectionPayload::point(self.values.iter().flatten().map(|v| [v.clone()])),
        };
        let selection = Selection {
            name: name.to_owned(),
            entity: self.entity.clone(),
            fields: vec![self.field.clone()],
            payload,
            mode: Default::default(),
        };
        crate::linking::check_selection(package, &selection)?;
        Ok(selection)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterReply {
    filters: Vec<FilterCommand>,
}

/// Everything one message produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentOutput {
    pub route: Route,
    pub filter_commands: Vec<FilterCommand>,
    pub viz_spec: Option<VizSpec>,
    pub traces: Vec<Trace>,
}

enum Rejection {
    Schema(String),
    Unresolvable(String),
}

fn render_prompt(stage: Stage, context: &AgentContext, message: &str) -> String {
    stage
        .template()
        .replace("{{context}}", &context.to_json())
        .replace("{{message}}", message)
}

/// Ask `stage`, allowing one re-prompt when the answer is rejected.
fn ask<T>(
    stage: Stage,
    message: &str,
    context: &AgentContext,
    backend: &dyn CompletionBackend,
    traces: &mut Vec<Trace>,
    accept: impl Fn(&Json) -> Result<T, Rejection>,
) -> Result<T, AgentError> {
    let base = render_prompt(stage, context, message);
    let mut prompt = base.clone();
    let mut last = None;
    for attempt in 0..2 {
        let request = CompletionRequest {
            stage,
            message: message.to_owned(),
            prompt: prompt.clone(),
            schema: stage.schema(),
            attempt,
        };
        let output = backend.complete_structured(&request)?;
        match accept(&output) {
            Ok(v) => {
                traces.push(Trace {
                    stage,
                    attempt,
                    output,
                    rejected: None,
                });
                return Ok(v);
            }
            Err(rejection) => {
                let reason = match &rejection {
                    Rejection::Schema(r) | Rejection::Unresolvable(r) => r.clone(),
                };
                traces.push(Trace {
                    stage,
                    attempt,
                    output,
                    rejected: Some(reason.clone()),
                });
                prompt = format!("{base}{}", RETRY_PROMPT.replace("{{error}}", &reason));
                last = Some(rejection);
            }
        }
    }
    let traces = traces.clone();
    Err(match last.expect("two rejected attempts") {
        Rejection::Schema(reason) => AgentError::SchemaViolation { stage, reason, traces },
        Rejection::Unresolvable(reason) => AgentError::UnresolvableField { reason, traces },
    })
}

fn accept_route(output: &Json) -> Result<Route, Rejection> {
    let route: Route = serde_json::from_value(output.clone()).map_err(|e| Rejection::Schema(e.to_string()))?;
    if !route.wants_filter && !route.wants_viz && route.reply.as_deref().is_none_or(|r| r.trim().is_empty()) {
        return Err(Rejection::Schema("a message that needs no action needs a reply".into()));
    }
    Ok(route)
}

/// Check one filter command against the context, snapping missing
/// interval bounds to the observed extremes.
fn accept_filter(context: &AgentContext, mut c: FilterCommand) -> Result<FilterCommand, Rejection> {
    let field = context.field(&c.entity, &c.field).ok_or_else(|| {
        Rejection::Unresolvable(format!("{}.{} is not an available field", c.entity, c.field))
    })?;
    match c.kind {
        SelectionKind::Interval => {
            if field.kind != FieldKind::Quantitative {
                return Err(Rejection::Schema(format!("{} is not quantitative", c.field)));
            }
            if c.values.is_some() {
                return Err(Rejection::Schema("interval filters take min and max, not values".into()));
            }
            if c.min.is_some_and(|v| !v.is_finite()) || c.max.is_some_and(|v| !v.is_finite()) {
                return Err(Rejection::Schema("bounds must be finite".into()));
            }
            c.min = c.min.or(field.min);
            c.max = c.max.or(field.max);
            if let (Some(lo), Some(hi)) = (c.min, c.max) {
                if lo > hi {
                    return Err(Rejection::Schema(format!("min {lo} exceeds max {hi}")));
                }
            }
        }
        SelectionKind::Point => {
            if !field.kind.is_categorical() {
                return Err(Rejection::Schema(format!("{} is not categorical", c.field)));
            }
            if c.min.is_some() || c.max.is_some() {
                return Err(Rejection::Schema("point filters take values, not bounds".into()));
            }
            let values = c
                .values
                .as_ref()
                .filter(|v| !v.is_empty())
                .ok_or_else(|| Rejection::Schema("point filters need at least one value".into()))?;
            let known = field.categories.as_deref().unwrap_or_default();
            for v in values {
                let ok = if v.is_null() { field.has_nulls } else { known.contains(v) };
                if !ok {
                    return Err(Rejection::Unresolvable(format!("{v} is not a value of {}", c.field)));
                }
            }
        }
    }
    Ok(c)
}

/// Decide what the message asks for.
pub fn orchestrate(
    message: &str,
    context: &AgentContext,
    backend: &dyn CompletionBackend,
    traces: &mut Vec<Trace>,
) -> Result<Route, AgentError> {
    ask(Stage::Orchestrator, message, context, backend, traces, accept_route)
}

/// Produce validated filter commands.
pub fn run_filter_agent(
    message: &str,
    context: &AgentContext,
    backend: &dyn CompletionBackend,
    traces: &mut Vec<Trace>,
) -> Result<Vec<FilterCommand>, AgentError> {
    ask(Stage::Filter, message, context, backend, traces, |output| {
        let reply: FilterReply = serde_json::from_value(output.clone()).map_err(|e| Rejection::Schema(e.to_string()))?;
        if reply.filters.is_empty() {
            return Err(Rejection::Schema("at least one filter is required".into()));
        }
        reply.filters.into_iter().map(|c| accept_filter(context, c)).collect()
    })
}

/// Produce a spec that parses, validates against `package`, and only
/// refers to registered selections.
pub fn run_viz_agent(
    message: &str,
    context: &AgentContext,
    backend: &dyn CompletionBackend,
    package: &Package,
    registry: &SelectionRegistry,
    traces: &mut Vec<Trace>,
) -> Result<VizSpec, AgentError> {
    ask(Stage::Viz, message, context, backend, traces, |output| {
        let spec = parse_spec_value(output).map_err(|e| Rejection::Schema(e.to_string()))?;
        if let Some(v) = validate_spec(&spec, package).into_iter().next() {
            return Err(Rejection::Schema(format!("{}: {}", v.locus, v.reason)));
        }
        for t in &spec.transformation {
            if let Transform::Filter(FilterTransform::Selection { selection, .. }) = t {
                if !registry.contains(selection) {
                    return Err(Rejection::Unresolvable(format!("no selection named {selection}")));
                }
            }
        }
        Ok(spec)
    })
}

/// Run the full pipeline for one message.
pub fn respond(
    message: &str,
    package: &Package,
    registry: &SelectionRegistry,
    backend: &dyn CompletionBackend,
    config: &AgentConfig,
) -> Result<AgentOutput, AgentError> {
    let context = build_context(package, registry, config)?;
    let mut traces = Vec::new();
    let route = orchestrate(message, &context, backend, &mut traces)?;
    let filter_commands = if route.wants_filter {
        run_filter_agent(message, &context, backend, &mut traces)?
    } else {
        Vec::new()
    };
    let viz_spec = if route.wants_viz {
        Some(run_viz_agent(message, &context, backend, package, registry, &mut traces)?)
    } else {
        None
    };
    Ok(AgentOutput {
        route,
        filter_commands,
        viz_spec,
        traces,
    })
}

impl AgentOutput {
    /// The session-level turn this output amounts to.
    pub fn into_turn(self, text: &str) -> crate::session::ChatTurn {
        crate::session::ChatTurn {
            text: text.to_owned(),
            reply: self.route.reply,
            filters: self.filter_commands,
            viz: self.viz_spec,
        }
    }
}
