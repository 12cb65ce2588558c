use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataflow::{execute, ResultTable};
use crate::datapackage::{field_profile, FieldKind, Package};
use crate::grammar::{Channel, LinkMode, SelectionKind, VizSpec};
use crate::linking::{BrushBinding, Selection, SelectionPayload};
use crate::value::Value;

use super::{Entry, SessionError, SessionState, WidgetRef};

/// One dropdown of a chart widget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VizSlot {
    pub channel: Channel,
    pub field: String,
    pub kind: FieldKind,
    /// Same-entity fields of the same kind, identifiers excluded.
    pub candidates: Vec<String>,
}

/// The values a filter widget offers for one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDomain {
    pub field: String,
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    /// Observed categories; null is listed last when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<Value>>,
    pub has_nulls: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Widget {
    VizAdjust {
        viz_id: String,
        slots: Vec<VizSlot>,
    },
    FilterAdjust {
        selection: String,
        entity: String,
        fields: Vec<String>,
        kind: SelectionKind,
        mode: LinkMode,
        payload: SelectionPayload,
        domain: Vec<FieldDomain>,
        /// The chart whose brush mirrors this filter.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        brush_of: Option<String>,
    },
}

/// Dropdowns for every encoded source field of a chart.
pub fn derive_viz_widget(viz_id: &str, spec: &VizSpec, package: &Package) -> Widget {
    let entity = spec.primary_entity();
    let derived = spec.derived_fields();
    let slots = match (&spec.representation, package.entity(entity)) {
        (Some(rep), Some(table)) => rep
            .mapping
            .iter()
            .filter(|e| !derived.contains(e.field.as_str()))
            .filter_map(|e| {
                let schema = table.field(&e.field)?;
                Some(VizSlot {
                    channel: e.channel,
                    field: e.field.clone(),
                    kind: schema.kind,
                    candidates: table
                        .fields
                        .iter()
                        .filter(|f| f.kind == schema.kind && f.kind != FieldKind::Identifier)
                        .map(|f| f.name.clone())
                        .collect(),
                })
            })
            .collect(),
        _ => Vec::new(),
    };
    Widget::VizAdjust {
        viz_id: viz_id.to_owned(),
        slots,
    }
}

fn field_domains(package: &Package, selection: &Selection) -> Vec<FieldDomain> {
    let stats = field_profile(package, &selection.entity).unwrap_or_default();
    selection
        .fields
        .iter()
        .filter_map(|f| {
            let s = stats.iter().find(|s| &s.field == f)?;
            let categories = s.categories.as_ref().map(|cats| {
                let mut values: Vec<Value> = cats.iter().map(|c| c.value.clone()).collect();
                if s.null_count > 0 {
                    values.push(Value::Null);
                }
                values
            });
            Some(FieldDomain {
                field: f.clone(),
                kind: s.kind,
                min: s.observed_min,
                max: s.observed_max,
                categories,
                has_nulls: s.null_count > 0,
            })
        })
        .collect()
}

/// Render a widget entry from live state; references to dismissed charts
/// or removed selections render as nothing.
pub fn render_widget(state: &SessionState, package: &Package, target: &WidgetRef) -> Option<Widget> {
    match target {
        WidgetRef::Viz { viz_id } => state.viz(viz_id).map(|d| derive_viz_widget(viz_id, &d.spec, package)),
        WidgetRef::Filter { selection } => {
            let sel = state.registry.get(selection)?;
            Some(Widget::FilterAdjust {
                selection: sel.name.clone(),
                entity: sel.entity.clone(),
                fields: sel.fields.clone(),
                kind: sel.kind(),
                mode: sel.mode,
                payload: sel.payload.clone(),
                domain: field_domains(package, sel),
                brush_of: state.brush_owner(selection).map(|d| d.viz_id.clone()),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EntryView {
    UserMessage { text: String },
    AgentReply { text: String },
    Widget { widget: Widget },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VizView {
    pub viz_id: String,
    pub spec: VizSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brush: Option<BrushBinding>,
    pub table: ResultTable,
}

/// An active filter as listed in the filter bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterChip {
    pub name: String,
    pub entity: String,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brush_of: Option<String>,
}

/// Everything a client needs to draw the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub id: String,
    pub package: String,
    pub version: u64,
    pub entries: Vec<EntryView>,
    pub dashboard: Vec<VizView>,
    pub counts: BTreeMap<String, usize>,
    pub filters: Vec<FilterChip>,
}

fn bound(v: Option<f64>, open: &str) -> String {
    v.map_or_else(|| open.to_owned(), |x| x.to_string())
}

fn summarize(sel: &Selection) -> String {
    match &sel.payload {
        SelectionPayload::Interval { ranges } => sel
            .fields
            .iter()
            .zip(ranges)
            .map(|(f, b)| format!("{f}: {} to {}", bound(b.min, "min"), bound(b.max, "max")))
            .collect::<Vec<_>>()
            .join("; "),
        SelectionPayload::Point { values } => {
            let tuples: Vec<String> = values
                .iter()
                .map(|t| t.iter().map(Value::to_string).collect::<Vec<_>>().join(" / "))
                .collect();
            format!("{}: {}", sel.fields.join(" / "), tuples.join(", "))
        }
    }
}

pub fn render(state: &SessionState, package: &Package) -> Result<StateView, SessionError> {
    let entries = state
        .entries
        .iter()
        .filter_map(|e| match e {
            Entry::UserMessage { text } => Some(EntryView::UserMessage { text: text.clone() }),
            Entry::AgentReply { text } => Some(EntryView::AgentReply { text: text.clone() }),
            Entry::Widget(target) => render_widget(state, package, target).map(|widget| EntryView::Widget { widget }),
        })
        .collect();
    let dashboard = state
        .dashboard
        .iter()
        .map(|d| {
            Ok(VizView {
                viz_id: d.viz_id.clone(),
                spec: d.spec.clone(),
                brush: d.brush.clone(),
                table: execute(&d.spec, package, &state.registry)?,
            })
        })
        .collect::<Result<_, SessionError>>()?;
    let mut filters = Vec::new();
    for sel in state.registry.iter() {
        let brush_of = state.brush_owner(&sel.name).map(|d| d.viz_id.clone());
        if brush_of.is_some() && sel.payload == Selection::full_domain(package, &sel.entity, &sel.fields, sel.kind())? {
            continue;
        }
        filters.push(FilterChip {
            name: sel.name.clone(),
            entity: sel.entity.clone(),
            summary: summarize(sel),
            brush_of,
        });
    }
    Ok(StateView {
        id: state.id.clone(),
        package: state.package.clone(),
        version: state.version,
        entries,
        dashboard,
        counts: state.counts(package),
        filters,
    })
}
