//! The declarative visualization grammar.
//!
//! A [`VizSpec`] names one or more source entities, an ordered list of
//! transforms, an optional representation mapping fields to visual
//! channels, and selection declarations. Only the source block is
//! required; a spec without a representation renders as a table.
//!
//! The canonical JSON shape is published as a JSON Schema document
//! ([`grammar_schema`]); the same shape is used for agent structured output.

mod parse;
mod validate;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datapackage::Relationship;
use crate::value::Value;

pub use parse::{parse_spec, parse_spec_value};
pub use validate::{validate_spec, Violation, ViolationKind};

/// Version of the published grammar schema.
pub const GRAMMAR_VERSION: u32 = 1;

const GRAMMAR_SCHEMA: &str = include_str!("../../assets/grammar.schema.json");

/// The published JSON Schema for [`VizSpec`] documents.
pub fn grammar_schema() -> serde_json::Value {
    serde_json::from_str(GRAMMAR_SCHEMA).expect("bundled grammar schema is valid JSON")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("malformed document at {locus}: {reason}")]
    MalformedDocument { locus: String, reason: String },
    #[error("unknown transform kind {found:?} at {locus}")]
    UnknownTransformKind { locus: String, found: String },
    #[error("unknown mark {found:?}")]
    UnknownMark { found: String },
    #[error("unknown channel {found:?} at {locus}")]
    UnknownChannel { locus: String, found: String },
    #[error("duplicate source alias {0:?}")]
    DuplicateAlias(String),
    #[error("channel {0:?} is encoded more than once")]
    DuplicateChannel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VizSpec {
    pub source: Vec<SourceRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transformation: Vec<Transform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<Representation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selections: Vec<SelectionDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceRef {
    pub alias: String,
    pub entity: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Transform {
    Filter(FilterTransform),
    Groupby {
        fields: Vec<String>,
    },
    Rollup {
        out_field: String,
        op: RollupOp,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        in_field: Option<String>,
    },
    Cdf {
        field: String,
        out_fraction: String,
    },
    Join {
        left_alias: String,
        right_alias: String,
        via: Relationship,
    },
    Orderby {
        field: String,
        direction: SortDirection,
    },
}

pub(crate) const TRANSFORM_KINDS: [&str; 6] = ["filter", "groupby", "rollup", "cdf", "join", "orderby"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum FilterTransform {
    /// Keep records admitted by a named selection.
    Selection {
        selection: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        link: Option<CrossEntityLink>,
    },
    Predicate { predicate: Predicate },
}

/// How a selection on one entity filters a directly related entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossEntityLink {
    pub relationship: Relationship,
    #[serde(default)]
    pub mode: LinkMode,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    /// At least one related record is selected.
    #[default]
    Any,
    /// Every related record is selected.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predicate {
    pub field: String,
    pub op: PredicateOp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredicateOp {
    In,
    Range,
    NotNull,
    IsNull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RollupOp {
    Count,
    Mean,
    Sum,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortDirection {
    #[default]
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Representation {
    pub mark: Mark,
    #[serde(default)]
    pub mapping: Vec<Encoding>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Bar,
    Point,
    Line,
    /// Tabular: one table row per data row.
    Row,
}

pub(crate) const MARKS: [&str; 4] = ["bar", "point", "line", "row"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    X,
    Y,
    Color,
}

pub(crate) const CHANNELS: [&str; 3] = ["x", "y", "color"];

impl Channel {
    pub fn is_positional(self) -> bool {
        matches!(self, Channel::X | Channel::Y)
    }
}

/// Kind of a field as seen by an encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingKind {
    Quantitative,
    Nominal,
    Ordinal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Encoding {
    pub channel: Channel,
    pub field: String,
    pub field_kind: EncodingKind,
    #[serde(default, skip_serializing_if = "EncodingOptions::is_empty")]
    pub options: EncodingOptions,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack: Option<StackMode>,
}

impl EncodingOptions {
    pub fn is_empty(&self) -> bool {
        self.stack.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StackMode {
    None,
    Stacked,
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionKind {
    Point,
    Interval,
}

/// Inclusive numeric bounds; `None` leaves that side open.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

impl Bounds {
    pub fn new(min: Option<f64>, max: Option<f64>) -> Self {
        Bounds { min, max }
    }

    pub fn unbounded() -> Self {
        Bounds::default()
    }

    pub fn is_unbounded(&self) -> bool {
        self.min.is_none() && self.max.is_none()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m)
    }
}

/// A selection declared by a spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionDecl {
    pub name: String,
    pub kind: SelectionKind,
    pub entity: String,
    pub fields: Vec<String>,
    /// Allowed value tuples (point selections).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<Vec<Value>>,
    /// Per-field bounds (interval selections).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ranges: Vec<Bounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<Relationship>,
    /// Set when the selection is driven by brushing this spec's chart.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub brush: bool,
}

impl VizSpec {
    /// A spec that shows `entity` as a table.
    pub fn table(alias: &str, entity: &str) -> Self {
        VizSpec {
            source: vec![SourceRef {
                alias: alias.to_owned(),
                entity: entity.to_owned(),
            }],
            transformation: Vec::new(),
            representation: None,
            selections: Vec::new(),
        }
    }

    /// The entity whose records the spec's rows start from.
    pub fn primary_entity(&self) -> &str {
        &self.source[0].entity
    }

    pub fn primary_alias(&self) -> &str {
        &self.source[0].alias
    }

    /// Names produced by transforms rather than read from source data.
    pub fn derived_fields(&self) -> BTreeSet<&str> {
        self.transformation
            .iter()
            .filter_map(|t| match t {
                Transform::Rollup { out_field, .. } => Some(out_field.as_str()),
                Transform::Cdf { out_fraction, .. } => Some(out_fraction.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn mark(&self) -> Option<Mark> {
        self.representation.as_ref().map(|r| r.mark)
    }

    pub fn encoding(&self, channel: Channel) -> Option<&Encoding> {
        self.representation
            .as_ref()
            .and_then(|r| r.mapping.iter().find(|e| e.channel == channel))
    }

    /// The brush-driven selection declared by this spec, if any.
    pub fn brush_selection(&self) -> Option<&SelectionDecl> {
        self.selections.iter().find(|s| s.brush)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("spec serializes")
    }
}

/// Attach the tabular representation when a spec has none.
pub fn default_representation(spec: &VizSpec) -> VizSpec {
    let mut out = spec.clone();
    if out.representation.is_none() {
        out.representation = Some(Representation {
            mark: Mark::Row,
            mapping: Vec::new(),
        });
    }
    out
}
