use serde::{Deserialize, Serialize};

use crate::grammar::{Channel, EncodingKind, Mark, SelectionKind, VizSpec};

/// The in-chart gesture a spec supports, over output column names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BrushGeometry {
    XInterval { field: String },
    YInterval { field: String },
    XyInterval { x_field: String, y_field: String },
    /// Clicking selects the combination of values on these fields.
    Point { fields: Vec<String> },
}

impl BrushGeometry {
    pub fn kind(&self) -> SelectionKind {
        match self {
            BrushGeometry::Point { .. } => SelectionKind::Point,
            _ => SelectionKind::Interval,
        }
    }

    /// Fields in payload order.
    pub fn fields(&self) -> Vec<String> {
        match self {
            BrushGeometry::XInterval { field } | BrushGeometry::YInterval { field } => vec![field.clone()],
            BrushGeometry::XyInterval { x_field, y_field } => vec![x_field.clone(), y_field.clone()],
            BrushGeometry::Point { fields } => fields.clone(),
        }
    }
}

/// A chart's brush and the selection it drives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrushBinding {
    pub viz_id: String,
    pub selection: String,
    pub geometry: BrushGeometry,
}

/// Pick the brush for a spec from its encodings.
///
/// Only fields read from source data count; rollup and cdf outputs are
/// ignored. Quantitative x and y give a 2D interval, one quantitative
/// positional field gives a 1D interval on that axis, and otherwise the
/// categorical fields on x, y and color together give a point selection.
/// Tables have no brush.
pub fn derive_brush(spec: &VizSpec) -> Option<BrushGeometry> {
    let rep = spec.representation.as_ref()?;
    if rep.mark == Mark::Row {
        return None;
    }
    let derived = spec.derived_fields();
    let source = |channel: Channel| {
        rep.mapping
            .iter()
            .find(|e| e.channel == channel && !derived.contains(e.field.as_str()))
    };
    let quant = |channel: Channel| source(channel).filter(|e| e.field_kind == EncodingKind::Quantitative);

    match (quant(Channel::X), quant(Channel::Y)) {
        (Some(x), Some(y)) => {
            return Some(BrushGeometry::XyInterval {
                x_field: x.field.clone(),
                y_field: y.field.clone(),
            })
        }
        (Some(x), None) => return Some(BrushGeometry::XInterval { field: x.field.clone() }),
        (None, Some(y)) => return Some(BrushGeometry::YInterval { field: y.field.clone() }),
        (None, None) => {}
    }

    let mut fields: Vec<String> = Vec::new();
    for channel in [Channel::X, Channel::Y, Channel::Color] {
        if let Some(e) = source(channel).filter(|e| e.field_kind != EncodingKind::Quantitative) {
            if !fields.contains(&e.field) {
                fields.push(e.field.clone());
            }
        }
    }
    (!fields.is_empty()).then_some(BrushGeometry::Point { fields })
}
