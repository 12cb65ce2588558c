//! Conversational session state.
//!
//! A session is an append-only conversation, a dashboard of specs, and the
//! selection registry they share. Every mutation goes through
//! [`apply_action`] (or [`apply_chat`] for a whole agent turn), which
//! returns a new state and never leaves a partial one behind.

mod snapshot;
mod widgets;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::FilterCommand;
use crate::dataflow::{execute, DataflowError, ResultTable};
use crate::datapackage::{FieldKind, Package};
use crate::grammar::{
    default_representation, validate_spec, Channel, FilterTransform, SelectionDecl, Transform, VizSpec,
};
use crate::linking::{
    derive_brush, entity_counts, inject_filters, retarget_selection, surviving_rows, update_selection, BrushBinding,
    LinkError, Selection, SelectionPayload,
};

pub use snapshot::{digest, restore, snapshot, Snapshot, SNAPSHOT_SCHEMA_VERSION};
pub use widgets::{
    derive_viz_widget, render, render_widget, EntryView, FieldDomain, FilterChip, StateView, VizSlot, VizView, Widget,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("stale version: expected {expected}, session is at {actual}")]
    StaleVersion { expected: u64, actual: u64 },
    #[error("invalid action at {locus}: {reason}")]
    InvalidAction { locus: String, reason: String },
    #[error("kind mismatch: {0}")]
    KindMismatch(String),
    #[error("unknown visualization {0}")]
    UnknownViz(String),
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error(transparent)]
    Selection(#[from] LinkError),
    #[error(transparent)]
    Dataflow(#[from] DataflowError),
    #[error("snapshot schema {found} is newer than supported {supported}")]
    VersionSkew { found: u32, supported: u32 },
    #[error("malformed snapshot: {0}")]
    Malformed(String),
}

fn invalid(locus: impl Into<String>, reason: impl Into<String>) -> SessionError {
    SessionError::InvalidAction {
        locus: locus.into(),
        reason: reason.into(),
    }
}

/// What a widget entry points at. Widgets are rendered from live state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "widget", rename_all = "snake_case")]
pub enum WidgetRef {
    Viz { viz_id: String },
    Filter { selection: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Entry {
    UserMessage { text: String },
    AgentReply { text: String },
    Widget(WidgetRef),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardItem {
    pub viz_id: String,
    /// The spec with its brush declaration and injected named filters.
    pub spec: VizSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brush: Option<BrushBinding>,
}

/// A change to an existing filter: new values, or a new target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FilterChange {
    Payload { payload: SelectionPayload },
    Retarget { entity: String, fields: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    CreateViz {
        spec: VizSpec,
    },
    CreateFilter {
        selection: Selection,
    },
    AdjustFilter {
        name: String,
        #[serde(flatten)]
        change: FilterChange,
    },
    AdjustVizField {
        viz_id: String,
        channel: Channel,
        field: String,
    },
    /// Set a chart's brush; no payload clears it.
    Brush {
        viz_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        payload: Option<SelectionPayload>,
    },
    Download {
        entity: String,
    },
    DismissViz {
        viz_id: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    UserMessage { text: String },
    AgentReplied { text: String },
    VizCreated { viz_id: String },
    VizUpdated { viz_id: String },
    VizDismissed { viz_id: String },
    FilterCreated { name: String },
    SelectionUpdated { name: String },
    WidgetCreated(WidgetRef),
    Downloaded { entity: String, rows: usize },
}

/// An applied action and the version it produced. Brushes are logged as
/// the filter adjustment they amount to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedAction {
    pub version: u64,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub package: String,
    pub entries: Vec<Entry>,
    pub dashboard: Vec<DashboardItem>,
    pub registry: crate::linking::SelectionRegistry,
    pub version: u64,
    pub log: Vec<LoggedAction>,
    next_viz: u64,
    next_filter: u64,
}

impl SessionState {
    pub fn new(id: impl Into<String>, package: &Package) -> Self {
        SessionState {
            id: id.into(),
            package: package.name.clone(),
            entries: Vec::new(),
            dashboard: Vec::new(),
            registry: Default::default(),
            version: 0,
            log: Vec::new(),
            next_viz: 1,
            next_filter: 1,
        }
    }

    pub fn viz(&self, viz_id: &str) -> Option<&DashboardItem> {
        self.dashboard.iter().find(|d| d.viz_id == viz_id)
    }

    pub fn counts(&self, package: &Package) -> BTreeMap<String, usize> {
        entity_counts(package, &self.registry)
    }

    /// Execute one dashboard chart.
    pub fn table(&self, package: &Package, viz_id: &str) -> Result<ResultTable, SessionError> {
        let item = self.viz(viz_id).ok_or_else(|| SessionError::UnknownViz(viz_id.to_owned()))?;
        Ok(execute(&item.spec, package, &self.registry)?)
    }

    fn brush_owner(&self, selection: &str) -> Option<&DashboardItem> {
        self.dashboard
            .iter()
            .find(|d| d.brush.as_ref().is_some_and(|b| b.selection == selection))
    }

    fn has_widget(&self, target: &WidgetRef) -> bool {
        self.entries.iter().any(|e| matches!(e, Entry::Widget(w) if w == target))
    }

    fn check_version(&self, expected: Option<u64>) -> Result<(), SessionError> {
        match expected {
            Some(v) if v != self.version => Err(SessionError::StaleVersion {
                expected: v,
                actual: self.version,
            }),
            _ => Ok(()),
        }
    }

    fn reinject(&mut self, package: &Package) {
        for item in &mut self.dashboard {
            item.spec = inject_filters(&item.spec, &self.registry, package);
        }
    }
}

/// Map an output column of `spec` to the source entity field it carries.
/// Derived columns map to nothing.
pub fn resolve_column(spec: &VizSpec, package: &Package, column: &str) -> Option<(String, String)> {
    if spec.derived_fields().contains(column) {
        return None;
    }
    let primary = package.entity(spec.primary_entity())?;
    let mut cols: Vec<(String, (String, String))> = primary
        .fields
        .iter()
        .map(|f| (f.name.clone(), (primary.name.clone(), f.name.clone())))
        .collect();
    for t in &spec.transformation {
        if let Transform::Join { right_alias, .. } = t {
            let entity = spec.source.iter().find(|s| &s.alias == right_alias)?;
            let right = package.entity(&entity.entity)?;
            for f in &right.fields {
                let name = if cols.iter().any(|(n, _)| n == &f.name) {
                    format!("{right_alias}.{}", f.name)
                } else {
                    f.name.clone()
                };
                cols.push((name, (right.name.clone(), f.name.clone())));
            }
        }
    }
    cols.into_iter().find(|(n, _)| n == column).map(|(_, src)| src)
}

fn identity_payload(package: &Package, selection: &Selection) -> Result<SelectionPayload, SessionError> {
    Ok(Selection::full_domain(package, &selection.entity, &selection.fields, selection.kind())?)
}

/// Declare the brush for a chart and return the selection it drives.
fn attach_brush(
    spec: &mut VizSpec,
    viz_id: &str,
    package: &Package,
) -> Result<Option<(BrushBinding, Selection)>, SessionError> {
    spec.selections.retain(|s| !s.brush);
    let Some(geometry) = derive_brush(spec) else {
        return Ok(None);
    };
    let mut sources = geometry.fields().into_iter().map(|c| resolve_column(spec, package, &c));
    let Some(Some((entity, first))) = sources.next() else {
        return Ok(None);
    };
    let mut fields = vec![first];
    for s in sources {
        match s {
            Some((e, f)) if e == entity => fields.push(f),
            // fields from different entities cannot share one selection
            _ => return Ok(None),
        }
    }
    let name = format!("brush_{viz_id}");
    let kind = geometry.kind();
    let payload = Selection::full_domain(package, &entity, &fields, kind)?;
    spec.selections.push(SelectionDecl {
        name: name.clone(),
        kind,
        entity: entity.clone(),
        fields: fields.clone(),
        values: Vec::new(),
        ranges: Vec::new(),
        mapping: None,
        brush: true,
    });
    let binding = BrushBinding {
        viz_id: viz_id.to_owned(),
        selection: name.clone(),
        geometry,
    };
    let selection = Selection {
        name,
        entity,
        fields,
        payload,
        mode: Default::default(),
    };
    Ok(Some((binding, selection)))
}

fn check_spec(spec: &VizSpec, state: &SessionState, package: &Package) -> Result<(), SessionError> {
    if let Some(v) = validate_spec(spec, package).into_iter().next() {
        return Err(invalid(v.locus, v.reason));
    }
    for (i, t) in spec.transformation.iter().enumerate() {
        if let Transform::Filter(FilterTransform::Selection { selection, .. }) = t {
            if !state.registry.contains(selection) {
                return Err(invalid(format!("transformation[{i}]"), format!("no selection named {selection}")));
            }
        }
    }
    Ok(())
}

/// Apply one action. `expected_version`, when given, must equal the
/// current version.
pub fn apply_action(
    state: &SessionState,
    package: &Package,
    action: Action,
    expected_version: Option<u64>,
) -> Result<(SessionState, Vec<Event>), SessionError> {
    state.check_version(expected_version)?;
    let mut next = state.clone();
    let mut events = Vec::new();
    let logged = apply_in_place(&mut next, package, action, &mut events)?;
    next.reinject(package);
    for item in &next.dashboard {
        execute(&item.spec, package, &next.registry)?;
    }
    next.version += 1;
    next.log.push(LoggedAction {
        version: next.version,
        action: logged,
    });
    Ok((next, events))
}

fn apply_in_place(
    state: &mut SessionState,
    package: &Package,
    action: Action,
    events: &mut Vec<Event>,
) -> Result<Action, SessionError> {
    match action {
        Action::CreateViz { spec } => {
            check_spec(&spec, state, package)?;
            let viz_id = format!("v{}", state.next_viz);
            let mut spec = default_representation(&spec);
            let brush = match attach_brush(&mut spec, &viz_id, package)? {
                Some((binding, selection)) => {
                    state.registry = state.registry.create(package, selection)?;
                    Some(binding)
                }
                None => None,
            };
            state.dashboard.push(DashboardItem {
                viz_id: viz_id.clone(),
                spec: spec.clone(),
                brush,
            });
            check_spec(&spec, state, package)?;
            state.next_viz += 1;
            let widget = WidgetRef::Viz { viz_id: viz_id.clone() };
            state.entries.push(Entry::Widget(widget.clone()));
            events.push(Event::VizCreated { viz_id });
            events.push(Event::WidgetCreated(widget));
            Ok(Action::CreateViz { spec })
        }
        Action::CreateFilter { selection } => {
            if state.brush_owner(&selection.name).is_some() || selection.name.starts_with("brush_") {
                return Err(invalid("selection.name", "brush_ names are reserved for chart brushes"));
            }
            state.registry = state.registry.create(package, selection.clone())?;
            let widget = WidgetRef::Filter {
                selection: selection.name.clone(),
            };
            state.entries.push(Entry::Widget(widget.clone()));
            events.push(Event::FilterCreated {
                name: selection.name.clone(),
            });
            events.push(Event::WidgetCreated(widget));
            Ok(Action::CreateFilter { selection })
        }
        Action::AdjustFilter { name, change } => {
            match &change {
                FilterChange::Payload { payload } => {
                    state.registry = update_selection(&state.registry, package, &name, payload.clone())?;
                    // a brush gets its mirrored filter widget once it filters something
                    let widget = WidgetRef::Filter { selection: name.clone() };
                    if state.brush_owner(&name).is_some() && !state.has_widget(&widget) {
                        let sel = state.registry.get(&name).expect("just updated");
                        if *payload != identity_payload(package, sel)? {
                            state.entries.push(Entry::Widget(widget.clone()));
                            events.push(Event::WidgetCreated(widget));
                        }
                    }
                }
                FilterChange::Retarget { entity, fields } => {
                    if state.brush_owner(&name).is_some() {
                        return Err(invalid("name", "a brush selection follows its chart and cannot be retargeted"));
                    }
                    state.registry = retarget_selection(&state.registry, package, &name, entity, fields.clone())?;
                }
            }
            events.push(Event::SelectionUpdated { name: name.clone() });
            Ok(Action::AdjustFilter { name, change })
        }
        Action::Brush { viz_id, payload } => {
            let item = state.viz(&viz_id).ok_or_else(|| SessionError::UnknownViz(viz_id.clone()))?;
            let binding = item
                .brush
                .as_ref()
                .ok_or_else(|| invalid("viz_id", format!("{viz_id} has no brush")))?;
            let name = binding.selection.clone();
            let payload = match payload {
                Some(p) => p,
                None => identity_payload(package, state.registry.get(&name).expect("brush is registered"))?,
            };
            if payload.kind() != binding.geometry.kind() {
                return Err(SessionError::KindMismatch(format!("{viz_id} brushes {:?} selections", binding.geometry.kind())));
            }
            apply_in_place(
                state,
                package,
                Action::AdjustFilter {
                    name,
                    change: FilterChange::Payload { payload },
                },
                events,
            )
        }
        Action::AdjustVizField { viz_id, channel, field } => {
            adjust_viz_field(state, package, &viz_id, channel, &field)?;
            events.push(Event::VizUpdated { viz_id: viz_id.clone() });
            Ok(Action::AdjustVizField { viz_id, channel, field })
        }
        Action::Download { entity } => {
            let rows = surviving_rows(package, &state.registry, &entity)
                .map_err(|_| SessionError::UnknownEntity(entity.clone()))?
                .into_iter()
                .filter(|&b| b)
                .count();
            events.push(Event::Downloaded {
                entity: entity.clone(),
                rows,
            });
            Ok(Action::Download { entity })
        }
        Action::DismissViz { viz_id } => {
            let pos = state
                .dashboard
                .iter()
                .position(|d| d.viz_id == viz_id)
                .ok_or_else(|| SessionError::UnknownViz(viz_id.clone()))?;
            let item = state.dashboard.remove(pos);
            if let Some(b) = item.brush {
                state.registry = state.registry.remove(&b.selection)?;
            }
            events.push(Event::VizDismissed { viz_id: viz_id.clone() });
            Ok(Action::DismissViz { viz_id })
        }
    }
}

/// Swap the field on one channel for another source field of the same
/// kind. Grouping, ordering and cdf steps that used the old field follow it.
fn adjust_viz_field(
    state: &mut SessionState,
    package: &Package,
    viz_id: &str,
    channel: Channel,
    field: &str,
) -> Result<(), SessionError> {
    let pos = state
        .dashboard
        .iter()
        .position(|d| d.viz_id == viz_id)
        .ok_or_else(|| SessionError::UnknownViz(viz_id.to_owned()))?;
    let item = &state.dashboard[pos];
    let entity = item.spec.primary_entity().to_owned();
    let old = item
        .spec
        .encoding(channel)
        .ok_or_else(|| invalid("channel", format!("{viz_id} encodes nothing on {channel:?}")))?
        .field
        .clone();
    let old_schema = package
        .field(&entity, &old)
        .filter(|_| !item.spec.derived_fields().contains(old.as_str()))
        .ok_or_else(|| invalid("channel", format!("{old} is not a source field of {entity}")))?;
    let new_schema = package
        .field(&entity, field)
        .ok_or_else(|| invalid("field", format!("{entity} has no field {field}")))?;
    if new_schema.kind != old_schema.kind || new_schema.kind == FieldKind::Identifier {
        return Err(SessionError::KindMismatch(format!(
            "{field} is {:?}, {old} is {:?}",
            new_schema.kind, old_schema.kind
        )));
    }

    let mut spec = item.spec.clone();
    let swap = |f: &mut String| {
        if *f == old {
            *f = field.to_owned();
        }
    };
    for t in &mut spec.transformation {
        match t {
            Transform::Groupby { fields } => fields.iter_mut().for_each(swap),
            Transform::Cdf { field: f, .. } | Transform::Orderby { field: f, .. } => swap(f),
            Transform::Rollup { in_field: Some(f), .. } => swap(f),
            _ => {}
        }
    }
    let rep = spec.representation.as_mut().expect("encoding exists");
    for enc in rep.mapping.iter_mut().filter(|e| e.channel == channel) {
        enc.field = field.to_owned();
    }

    let old_brush = state.dashboard[pos].brush.clone();
    let old_decl = spec.selections.iter().find(|s| s.brush).cloned();
    let new_brush = attach_brush(&mut spec, viz_id, package)?;
    let unchanged = match (&old_brush, &new_brush) {
        (Some(a), Some((b, _))) => a == b && old_decl.as_ref() == spec.selections.iter().find(|s| s.brush),
        (None, None) => true,
        _ => false,
    };
    if !unchanged {
        if let Some(b) = &old_brush {
            state.registry = state.registry.remove(&b.selection)?;
        }
        if let Some((_, selection)) = &new_brush {
            state.registry = state.registry.create(package, selection.clone())?;
        }
    }
    check_spec(&spec, state, package)?;
    let item = &mut state.dashboard[pos];
    item.spec = spec;
    item.brush = new_brush.map(|(b, _)| b);
    Ok(())
}

/// One chat turn after the agents have run: the user's message, the
/// reply if any, then each filter and the chart, in that order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filters: Vec<FilterCommand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viz: Option<VizSpec>,
}

/// Apply a whole chat turn atomically. The version advances once per
/// created filter or chart, and once for a turn that creates neither.
pub fn apply_chat(
    state: &SessionState,
    package: &Package,
    turn: ChatTurn,
    expected_version: Option<u64>,
) -> Result<(SessionState, Vec<Event>), SessionError> {
    state.check_version(expected_version)?;
    let mut next = state.clone();
    let mut events = vec![Event::UserMessage { text: turn.text.clone() }];
    next.entries.push(Entry::UserMessage { text: turn.text });
    if let Some(reply) = turn.reply {
        events.push(Event::AgentReplied { text: reply.clone() });
        next.entries.push(Entry::AgentReply { text: reply });
    }
    let mut acted = false;
    for command in turn.filters {
        let name = format!("f{}", next.next_filter);
        let selection = command.to_selection(&name, package).map_err(|e| invalid("filters", e.to_string()))?;
        let (s, ev) = apply_action(&next, package, Action::CreateFilter { selection }, None)?;
        next = s;
        next.next_filter += 1;
        events.extend(ev);
        acted = true;
    }
    if let Some(spec) = turn.viz {
        let (s, ev) = apply_action(&next, package, Action::CreateViz { spec }, None)?;
        next = s;
        events.extend(ev);
        acted = true;
    }
    if !acted {
        next.version += 1;
    }
    Ok((next, events))
}

/// CSV of the records of `entity` surviving the registry, with the
/// original header and cell text.
pub fn download(state: &SessionState, package: &Package, entity: &str) -> Result<Vec<u8>, SessionError> {
    let table = package
        .entity(entity)
        .ok_or_else(|| SessionError::UnknownEntity(entity.to_owned()))?;
    let mask = surviving_rows(package, &state.registry, entity)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| SessionError::Malformed(e.to_string());
    w.write_record(table.fields.iter().map(|f| f.name.as_str())).map_err(io)?;
    for (row, keep) in table.raw_rows.iter().zip(mask) {
        if keep {
            w.write_record(row).map_err(io)?;
        }
    }
    w.into_inner().map_err(|e| SessionError::Malformed(e.to_string()))
}
