use serde::{Deserialize, Serialize};

use super::{
    EncodingKind, FilterTransform, Mark, PredicateOp, RollupOp, SelectionKind, Transform,
    VizSpec,
};
use crate::datapackage::{FieldKind, Package};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnknownEntity,
    UnknownAlias,
    UnresolvedField,
    KindMismatch,
    InvalidTransform,
    JoinKeyMismatch,
    InvalidRepresentation,
    InvalidSelection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub locus: String,
    pub kind: ViolationKind,
    pub reason: String,
}

#[derive(Clone)]
struct Col {
    name: String,
    kind: FieldKind,
}

enum Pending {
    None,
    Group { keys: Vec<String>, aggs: Vec<Col> },
    Whole { aggs: Vec<Col> },
}

struct Shape {
    cols: Vec<Col>,
    /// Rows still correspond one-to-one (or one-to-many after a join) to
    /// records of the primary entity.
    record_rows: bool,
    pending: Pending,
}

impl Shape {
    fn find(&self, name: &str) -> Option<&Col> {
        self.cols.iter().find(|c| c.name == name)
    }

    fn settle(&mut self) {
        match std::mem::replace(&mut self.pending, Pending::None) {
            Pending::None => {}
            Pending::Group { keys, aggs } => {
                let mut cols: Vec<Col> = keys
                    .iter()
                    .filter_map(|k| self.find(k).cloned())
                    .collect();
                cols.extend(aggs);
                self.cols = cols;
                self.record_rows = false;
            }
            Pending::Whole { aggs } => {
                self.cols = aggs;
                self.record_rows = false;
            }
        }
    }
}

fn encoding_accepts(enc: EncodingKind, col: FieldKind) -> bool {
    match enc {
        EncodingKind::Quantitative => col == FieldKind::Quantitative,
        EncodingKind::Nominal | EncodingKind::Ordinal => col != FieldKind::Quantitative,
    }
}

/// Check every entity and field reference in `spec` against `package`.
///
/// Returns an empty list iff the spec can execute without resolution or
/// kind errors. Selection names used by filters are resolved later,
/// against the session's registry.
pub fn validate_spec(spec: &VizSpec, package: &Package) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |locus: String, kind: ViolationKind, reason: String| {
        out.push(Violation { locus, kind, reason })
    };

    let mut unknown_source = false;
    for (i, s) in spec.source.iter().enumerate() {
        if package.entity(&s.entity).is_none() {
            unknown_source = true;
            push(
                format!("source[{i}].entity"),
                ViolationKind::UnknownEntity,
                format!("no entity named {:?}", s.entity),
            );
        }
    }
    if unknown_source {
        return out;
    }

    let primary = package.entity(spec.primary_entity()).expect("checked");
    let mut shape = Shape {
        cols: primary
            .fields
            .iter()
            .map(|f| Col {
                name: f.name.clone(),
                kind: f.kind,
            })
            .collect(),
        record_rows: true,
        pending: Pending::None,
    };

    for (i, t) in spec.transformation.iter().enumerate() {
        let locus = format!("transformation[{i}]");
        let unresolved = |f: &str| format!("field {f:?} is not available at this step");
        match t {
            Transform::Rollup { out_field, op, in_field } => {
                let input = match (op, in_field) {
                    (RollupOp::Count, None) => None,
                    (RollupOp::Count, Some(_)) => {
                        push(locus, ViolationKind::InvalidTransform, "count takes no input field".into());
                        continue;
                    }
                    (_, None) => {
                        push(locus, ViolationKind::InvalidTransform, format!("{op:?} needs an input field"));
                        continue;
                    }
                    (_, Some(f)) => Some(f),
                };
                if let Some(f) = input {
                    match shape.find(f) {
                        None => {
                            push(format!("{locus}.in_field"), ViolationKind::UnresolvedField, unresolved(f));
                            continue;
                        }
                        Some(c) if c.kind != FieldKind::Quantitative => {
                            push(
                                format!("{locus}.in_field"),
                                ViolationKind::KindMismatch,
                                format!("{f:?} is not quantitative"),
                            );
                            continue;
                        }
                        Some(_) => {}
                    }
                }
                let col = Col {
                    name: out_field.clone(),
                    kind: FieldKind::Quantitative,
                };
                let taken = |name: &str, keys: &[String], aggs: &[Col]| {
                    keys.iter().any(|k| k == name) || aggs.iter().any(|a| a.name == name)
                };
                match &mut shape.pending {
                    Pending::Group { keys, aggs } => {
                        if taken(out_field, keys, aggs) {
                            push(locus, ViolationKind::InvalidTransform, format!("{out_field:?} already exists"));
                            continue;
                        }
                        aggs.push(col);
                    }
                    Pending::Whole { aggs } => {
                        if taken(out_field, &[], aggs) {
                            push(locus, ViolationKind::InvalidTransform, format!("{out_field:?} already exists"));
                            continue;
                        }
                        aggs.push(col);
                    }
                    Pending::None => shape.pending = Pending::Whole { aggs: vec![col] },
                }
                continue;
            }
            Transform::Cdf { .. } => {
                // a bare groupby partitions the cdf instead of aggregating
                if matches!(&shape.pending, Pending::Group { aggs, .. } if !aggs.is_empty())
                    || matches!(shape.pending, Pending::Whole { .. })
                {
                    shape.settle();
                }
            }
            _ => shape.settle(),
        }

        match t {
            Transform::Filter(FilterTransform::Selection { link, .. }) => {
                if !shape.record_rows {
                    push(
                        locus,
                        ViolationKind::InvalidTransform,
                        "selection filters must come before aggregation".into(),
                    );
                    continue;
                }
                if let Some(link) = link {
                    let rel = &link.relationship;
                    if rel.other_end(spec.primary_entity()).is_none()
                        || !package.relations.contains(rel)
                    {
                        push(
                            format!("{locus}.link"),
                            ViolationKind::JoinKeyMismatch,
                            format!(
                                "relationship {}->{} does not link {}",
                                rel.from_entity,
                                rel.to_entity,
                                spec.primary_entity()
                            ),
                        );
                    }
                }
            }
            Transform::Filter(FilterTransform::Predicate { predicate: p }) => {
                let Some(col) = shape.find(&p.field) else {
                    push(format!("{locus}.predicate.field"), ViolationKind::UnresolvedField, unresolved(&p.field));
                    continue;
                };
                match p.op {
                    PredicateOp::Range => {
                        if col.kind != FieldKind::Quantitative {
                            push(locus, ViolationKind::KindMismatch, format!("range on non-quantitative {:?}", p.field));
                        } else if p.values.is_some() {
                            push(locus, ViolationKind::InvalidTransform, "range takes min/max, not values".into());
                        } else if let (Some(lo), Some(hi)) = (p.min, p.max) {
                            if lo > hi {
                                push(locus, ViolationKind::InvalidTransform, format!("min {lo} exceeds max {hi}"));
                            }
                        }
                    }
                    PredicateOp::In => {
                        if !col.kind.is_categorical() {
                            push(locus, ViolationKind::KindMismatch, format!("in on non-categorical {:?}", p.field));
                        } else if p.values.is_none() || p.min.is_some() || p.max.is_some() {
                            push(locus, ViolationKind::InvalidTransform, "in takes a values list only".into());
                        }
                    }
                    PredicateOp::NotNull | PredicateOp::IsNull => {
                        if p.values.is_some() || p.min.is_some() || p.max.is_some() {
                            push(locus, ViolationKind::InvalidTransform, "null tests take no arguments".into());
                        }
                    }
                }
            }
            Transform::Groupby { fields } => {
                if fields.is_empty() {
                    push(locus, ViolationKind::InvalidTransform, "groupby needs at least one field".into());
                    continue;
                }
                if let Some(f) = fields.iter().find(|f| shape.find(f).is_none()) {
                    push(format!("{locus}.fields"), ViolationKind::UnresolvedField, unresolved(f));
                    continue;
                }
                shape.pending = Pending::Group {
                    keys: fields.clone(),
                    aggs: Vec::new(),
                };
            }
            Transform::Cdf { field, out_fraction } => {
                match shape.find(field) {
                    None => {
                        push(format!("{locus}.field"), ViolationKind::UnresolvedField, unresolved(field));
                        continue;
                    }
                    Some(c) if c.kind != FieldKind::Quantitative => {
                        push(format!("{locus}.field"), ViolationKind::KindMismatch, format!("cdf on non-quantitative {field:?}"));
                        continue;
                    }
                    Some(_) => {}
                }
                if shape.find(out_fraction).is_some() {
                    push(locus, ViolationKind::InvalidTransform, format!("{out_fraction:?} already exists"));
                    continue;
                }
                // partition keys stay as ordinary columns
                shape.pending = Pending::None;
                shape.cols.push(Col {
                    name: out_fraction.clone(),
                    kind: FieldKind::Quantitative,
                });
            }
            Transform::Join { left_alias, right_alias, via } => {
                let alias_entity = |a: &str| spec.source.iter().find(|s| s.alias == a).map(|s| s.entity.as_str());
                let (Some(left), Some(right)) = (alias_entity(left_alias), alias_entity(right_alias)) else {
                    push(locus, ViolationKind::UnknownAlias, format!("unknown alias in {left_alias:?}/{right_alias:?}"));
                    continue;
                };
                if left_alias != spec.primary_alias() || left_alias == right_alias {
                    push(
                        locus,
                        ViolationKind::UnknownAlias,
                        "joins attach another source to the first source".into(),
                    );
                    continue;
                }
                let connects = (via.from_entity == left && via.to_entity == right)
                    || (via.from_entity == right && via.to_entity == left);
                if !connects || !package.relations.contains(via) {
                    push(
                        format!("{locus}.via"),
                        ViolationKind::JoinKeyMismatch,
                        format!("no declared relationship links {left} and {right} this way"),
                    );
                    continue;
                }
                let left_keys = via.fields_on(left).expect("connects");
                if let Some(k) = left_keys.iter().find(|k| shape.find(k).is_none()) {
                    push(format!("{locus}.via"), ViolationKind::JoinKeyMismatch, unresolved(k));
                    continue;
                }
                let right_table = package.entity(right).expect("checked");
                for f in &right_table.fields {
                    let name = if shape.find(&f.name).is_some() {
                        format!("{right_alias}.{}", f.name)
                    } else {
                        f.name.clone()
                    };
                    shape.cols.push(Col { name, kind: f.kind });
                }
            }
            Transform::Orderby { field, .. } => {
                if shape.find(field).is_none() {
                    push(format!("{locus}.field"), ViolationKind::UnresolvedField, unresolved(field));
                }
            }
            Transform::Rollup { .. } => unreachable!("handled above"),
        }
    }
    shape.settle();

    if let Some(rep) = &spec.representation {
        match rep.mark {
            Mark::Row if !rep.mapping.is_empty() => push(
                "representation.mapping".into(),
                ViolationKind::InvalidRepresentation,
                "tabular marks take no encodings".into(),
            ),
            Mark::Bar | Mark::Point | Mark::Line if !rep.mapping.iter().any(|e| e.channel.is_positional()) => push(
                "representation.mapping".into(),
                ViolationKind::InvalidRepresentation,
                "needs an x or y encoding".into(),
            ),
            _ => {}
        }
        for (i, enc) in rep.mapping.iter().enumerate() {
            let locus = format!("representation.mapping[{i}]");
            match shape.find(&enc.field) {
                None => push(locus.clone(), ViolationKind::UnresolvedField, format!("field {:?} does not exist", enc.field)),
                Some(c) if !encoding_accepts(enc.field_kind, c.kind) => push(
                    locus.clone(),
                    ViolationKind::KindMismatch,
                    format!("{:?} is {:?}, encoded as {:?}", enc.field, c.kind, enc.field_kind),
                ),
                Some(_) => {}
            }
            if enc.options.stack.is_some()
                && (rep.mark != Mark::Bar
                    || !enc.channel.is_positional()
                    || enc.field_kind != EncodingKind::Quantitative)
            {
                push(
                    format!("{locus}.options.stack"),
                    ViolationKind::InvalidRepresentation,
                    "stacking applies to the quantitative axis of a bar mark".into(),
                );
            }
        }
    }

    let mut brushes = 0;
    for (i, sel) in spec.selections.iter().enumerate() {
        let locus = format!("selections[{i}]");
        brushes += usize::from(sel.brush);
        let Some(entity) = package.entity(&sel.entity) else {
            push(locus.clone(), ViolationKind::UnknownEntity, format!("no entity named {:?}", sel.entity));
            continue;
        };
        if sel.fields.is_empty() {
            push(locus.clone(), ViolationKind::InvalidSelection, "selections need at least one field".into());
            continue;
        }
        for f in &sel.fields {
            match entity.field(f) {
                None => push(format!("{locus}.fields"), ViolationKind::UnresolvedField, format!("{} has no field {f:?}", sel.entity)),
                Some(schema) => {
                    let ok = match sel.kind {
                        SelectionKind::Interval => schema.kind == FieldKind::Quantitative,
                        SelectionKind::Point => schema.kind != FieldKind::Quantitative,
                    };
                    if !ok {
                        push(format!("{locus}.fields"), ViolationKind::KindMismatch, format!("{f:?} cannot back a {:?} selection", sel.kind));
                    }
                }
            }
        }
        match sel.kind {
            SelectionKind::Interval => {
                if !sel.values.is_empty()
                    || (!sel.ranges.is_empty() && sel.ranges.len() != sel.fields.len())
                    || sel.ranges.iter().any(|b| matches!((b.min, b.max), (Some(lo), Some(hi)) if lo > hi))
                {
                    push(locus.clone(), ViolationKind::InvalidSelection, "interval needs one ordered range per field".into());
                }
            }
            SelectionKind::Point => {
                if !sel.ranges.is_empty() || sel.values.iter().any(|t| t.len() != sel.fields.len()) {
                    push(locus.clone(), ViolationKind::InvalidSelection, "point values must match the field arity".into());
                }
            }
        }
        if let Some(rel) = &sel.mapping {
            if !package.relations.contains(rel) || rel.other_end(&sel.entity).is_none() {
                push(format!("{locus}.mapping"), ViolationKind::JoinKeyMismatch, "mapping is not a declared relationship of this entity".into());
            }
        }
    }
    if brushes > 1 {
        push("selections".into(), ViolationKind::InvalidSelection, "at most one brush selection per spec".into());
    }

    out
}
