//! Selections and the filter algebra that links views together.
//!
//! Every filter, whether it came from an agent, a widget, or a brush, is a
//! named [`Selection`] in a [`SelectionRegistry`]. Specs pick those up
//! through `filter{selection}` transforms inserted by [`inject_filters`];
//! all applicable selections are intersected. A selection on a different
//! entity applies through a single direct foreign key, never through an
//! intermediate table.

mod brush;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataflow::{cross_entity_membership, RowMask};
use crate::datapackage::{relation_between, FieldKind, Package};
use crate::grammar::{Bounds, CrossEntityLink, FilterTransform, LinkMode, SelectionKind, Transform, VizSpec};
use crate::value::Value;

pub use brush::{derive_brush, BrushBinding, BrushGeometry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("interval on {field} has min {min} above max {max}")]
    InvalidInterval { field: String, min: f64, max: f64 },
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("{entity} has no field {field}")]
    UnknownField { entity: String, field: String },
    #[error("kind mismatch on {field}: {reason}")]
    KindMismatch { field: String, reason: String },
    #[error("payload shape does not match fields of {0}")]
    ArityMismatch(String),
    #[error("no selection named {0}")]
    UnknownSelection(String),
    #[error("a selection named {0} already exists")]
    DuplicateSelection(String),
}

/// The values a selection admits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SelectionPayload {
    /// Admitted value tuples, one value per selection field. A null value
    /// admits records whose cell is null.
    Point { values: BTreeSet<Vec<Value>> },
    /// One range per selection field. A fully open range admits every
    /// record, nulls included; any bound excludes nulls.
    Interval { ranges: Vec<Bounds> },
}

impl SelectionPayload {
    pub fn kind(&self) -> SelectionKind {
        match self {
            SelectionPayload::Point { .. } => SelectionKind::Point,
            SelectionPayload::Interval { .. } => SelectionKind::Interval,
        }
    }

    pub fn interval(ranges: impl IntoIterator<Item = Bounds>) -> Self {
        SelectionPayload::Interval {
            ranges: ranges.into_iter().collect(),
        }
    }

    pub fn point<I, T>(values: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = Value>,
    {
        SelectionPayload::Point {
            values: values.into_iter().map(|t| t.into_iter().collect()).collect(),
        }
    }
}

/// A named filter over fields of one entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub name: String,
    pub entity: String,
    pub fields: Vec<String>,
    pub payload: SelectionPayload,
    /// How the selection filters directly related entities.
    #[serde(default)]
    pub mode: LinkMode,
}

impl Selection {
    pub fn kind(&self) -> SelectionKind {
        self.payload.kind()
    }

    /// Which rows of the selection's own entity it admits.
    pub fn admitted_rows(&self, package: &Package) -> Result<RowMask, LinkError> {
        let table = package
            .entity(&self.entity)
            .ok_or_else(|| LinkError::UnknownEntity(self.entity.clone()))?;
        let cols = self.fields.iter().map(|f| {
            table.field_index(f).ok_or_else(|| LinkError::UnknownField {
                entity: self.entity.clone(),
                field: f.clone(),
            })
        });
        let cols: Vec<usize> = cols.collect::<Result<_, _>>()?;
        let mask = match &self.payload {
            SelectionPayload::Point { values } => table
                .rows
                .iter()
                .map(|row| {
                    let tuple: Vec<Value> = cols.iter().map(|&c| row[c].clone()).collect();
                    values.contains(&tuple)
                })
                .collect(),
            SelectionPayload::Interval { ranges } => table
                .rows
                .iter()
                .map(|row| {
                    cols.iter().zip(ranges).all(|(&c, b)| {
                        b.is_unbounded() || row[c].as_f64().is_some_and(|v| b.contains(v))
                    })
                })
                .collect(),
        };
        Ok(mask)
    }

    /// A payload that admits every record of the given fields: open
    /// ranges for intervals, every observed tuple for points.
    pub fn full_domain(
        package: &Package,
        entity: &str,
        fields: &[String],
        kind: SelectionKind,
    ) -> Result<SelectionPayload, LinkError> {
        let table = package
            .entity(entity)
            .ok_or_else(|| LinkError::UnknownEntity(entity.to_owned()))?;
        let cols: Vec<usize> = fields
            .iter()
            .map(|f| {
                table.field_index(f).ok_or_else(|| LinkError::UnknownField {
                    entity: entity.to_owned(),
                    field: f.clone(),
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(match kind {
            SelectionKind::Point => SelectionPayload::Point {
                values: table
                    .rows
                    .iter()
                    .map(|row| cols.iter().map(|&c| row[c].clone()).collect())
                    .collect(),
            },
            SelectionKind::Interval => SelectionPayload::Interval {
                ranges: vec![Bounds::unbounded(); fields.len()],
            },
        })
    }
}

/// Check a selection against the package's schema.
pub fn check_selection(package: &Package, sel: &Selection) -> Result<(), LinkError> {
    let table = package
        .entity(&sel.entity)
        .ok_or_else(|| LinkError::UnknownEntity(sel.entity.clone()))?;
    if sel.fields.is_empty() {
        return Err(LinkError::ArityMismatch(sel.name.clone()));
    }
    for f in &sel.fields {
        let schema = table.field(f).ok_or_else(|| LinkError::UnknownField {
            entity: sel.entity.clone(),
            field: f.clone(),
        })?;
        match sel.kind() {
            SelectionKind::Interval if schema.kind != FieldKind::Quantitative => {
                return Err(LinkError::KindMismatch {
                    field: f.clone(),
                    reason: "interval selections need quantitative fields".into(),
                })
            }
            SelectionKind::Point if schema.kind == FieldKind::Quantitative => {
                return Err(LinkError::KindMismatch {
                    field: f.clone(),
                    reason: "point selections need categorical fields".into(),
                })
            }
            _ => {}
        }
    }
    match &sel.payload {
        SelectionPayload::Interval { ranges } => {
            if ranges.len() != sel.fields.len() {
                return Err(LinkError::ArityMismatch(sel.name.clone()));
            }
            for (f, b) in sel.fields.iter().zip(ranges) {
                if let (Some(min), Some(max)) = (b.min, b.max) {
                    if min > max {
                        return Err(LinkError::InvalidInterval {
                            field: f.clone(),
                            min,
                            max,
                        });
                    }
                }
                if b.min.is_some_and(|v| !v.is_finite()) || b.max.is_some_and(|v| !v.is_finite()) {
                    return Err(LinkError::KindMismatch {
                        field: f.clone(),
                        reason: "bounds must be finite".into(),
                    });
                }
            }
        }
        SelectionPayload::Point { values } => {
            if values.iter().any(|t| t.len() != sel.fields.len()) {
                return Err(LinkError::ArityMismatch(sel.name.clone()));
            }
        }
    }
    Ok(())
}

/// Named selections, keyed and iterated by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SelectionRegistry {
    selections: BTreeMap<String, Selection>,
}

impl SelectionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&Selection> {
        self.selections.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.selections.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Selection> {
        self.selections.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.selections.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.selections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selections.is_empty()
    }

    /// Register a new selection after checking it against the package.
    pub fn create(&self, package: &Package, selection: Selection) -> Result<SelectionRegistry, LinkError> {
        if self.contains(&selection.name) {
            return Err(LinkError::DuplicateSelection(selection.name));
        }
        check_selection(package, &selection)?;
        let mut next = self.clone();
        next.selections.insert(selection.name.clone(), selection);
        Ok(next)
    }

    pub fn remove(&self, name: &str) -> Result<SelectionRegistry, LinkError> {
        let mut next = self.clone();
        next.selections
            .remove(name)
            .ok_or_else(|| LinkError::UnknownSelection(name.to_owned()))?;
        Ok(next)
    }
}

/// Replace the payload of an existing selection.
///
/// Specs referencing the selection by name see the new payload on their
/// next execution; no re-injection is needed.
pub fn update_selection(
    registry: &SelectionRegistry,
    package: &Package,
    name: &str,
    payload: SelectionPayload,
) -> Result<SelectionRegistry, LinkError> {
    let current = registry
        .get(name)
        .ok_or_else(|| LinkError::UnknownSelection(name.to_owned()))?;
    let updated = Selection {
        payload,
        ..current.clone()
    };
    check_selection(package, &updated)?;
    let mut next = registry.clone();
    next.selections.insert(name.to_owned(), updated);
    Ok(next)
}

/// Point a selection at different fields (possibly of another entity),
/// resetting its payload to the full observed domain.
pub fn retarget_selection(
    registry: &SelectionRegistry,
    package: &Package,
    name: &str,
    entity: &str,
    fields: Vec<String>,
) -> Result<SelectionRegistry, LinkError> {
    let current = registry
        .get(name)
        .ok_or_else(|| LinkError::UnknownSelection(name.to_owned()))?;
    let kind = match package.field(entity, fields.first().map(String::as_str).unwrap_or("")) {
        Some(f) if f.kind == FieldKind::Quantitative => SelectionKind::Interval,
        Some(_) => SelectionKind::Point,
        None if package.entity(entity).is_none() => return Err(LinkError::UnknownEntity(entity.to_owned())),
        None => {
            return Err(LinkError::UnknownField {
                entity: entity.to_owned(),
                field: fields.first().cloned().unwrap_or_default(),
            })
        }
    };
    let payload = Selection::full_domain(package, entity, &fields, kind)?;
    let updated = Selection {
        name: name.to_owned(),
        entity: entity.to_owned(),
        fields,
        payload,
        mode: current.mode,
    };
    check_selection(package, &updated)?;
    let mut next = registry.clone();
    next.selections.insert(name.to_owned(), updated);
    Ok(next)
}

/// The link through which `selection` filters `entity`: `Some(None)` for
/// the same entity, `Some(Some(link))` across one direct foreign key, and
/// `None` when the selection does not apply.
pub fn applicability(package: &Package, selection: &Selection, entity: &str) -> Option<Option<CrossEntityLink>> {
    if selection.entity == entity {
        return Some(None);
    }
    match relation_between(package, entity, &selection.entity) {
        Ok(Some(m)) => Some(Some(CrossEntityLink {
            relationship: m.relationship.clone(),
            mode: selection.mode,
        })),
        _ => None,
    }
}

/// Rows of `entity` admitted by one selection.
pub fn selection_mask(
    package: &Package,
    selection: &Selection,
    entity: &str,
    link: Option<&CrossEntityLink>,
) -> Result<RowMask, LinkError> {
    let admitted = selection.admitted_rows(package)?;
    if selection.entity == entity {
        return Ok(admitted);
    }
    let resolved;
    let link = match link {
        Some(l) => l,
        None => {
            resolved = applicability(package, selection, entity)
                .flatten()
                .ok_or_else(|| LinkError::UnknownEntity(format!("{} is not directly related to {entity}", selection.entity)))?;
            &resolved
        }
    };
    Ok(cross_entity_membership(
        package,
        &link.relationship,
        link.mode,
        &selection.entity,
        &admitted,
    ))
}

/// Insert a `filter{selection}` for every registry selection that applies
/// to the spec's entity, and drop selection filters that no longer match
/// the registry.
///
/// A spec's own selections never filter the spec itself. Injection is
/// idempotent.
pub fn inject_filters(spec: &VizSpec, registry: &SelectionRegistry, package: &Package) -> VizSpec {
    let own: BTreeSet<&str> = spec.selections.iter().map(|s| s.name.as_str()).collect();
    let entity = spec.primary_entity();
    let desired: BTreeMap<&str, Option<CrossEntityLink>> = registry
        .iter()
        .filter(|s| !own.contains(s.name.as_str()))
        .filter_map(|s| applicability(package, s, entity).map(|link| (s.name.as_str(), link)))
        .collect();

    let mut out = spec.clone();
    out.transformation.retain(|t| match t {
        Transform::Filter(FilterTransform::Selection { selection, link }) => {
            desired.get(selection.as_str()).is_some_and(|want| want == link)
        }
        _ => true,
    });
    let present: BTreeSet<String> = out
        .transformation
        .iter()
        .filter_map(|t| match t {
            Transform::Filter(FilterTransform::Selection { selection, .. }) => Some(selection.clone()),
            _ => None,
        })
        .collect();
    let missing: Vec<Transform> = desired
        .into_iter()
        .filter(|(name, _)| !present.contains(*name))
        .map(|(name, link)| {
            Transform::Filter(FilterTransform::Selection {
                selection: name.to_owned(),
                link,
            })
        })
        .collect();
    out.transformation.splice(0..0, missing);
    out
}

/// Rows of `entity` surviving every applicable registry selection.
pub fn surviving_rows(package: &Package, registry: &SelectionRegistry, entity: &str) -> Result<RowMask, LinkError> {
    let table = package
        .entity(entity)
        .ok_or_else(|| LinkError::UnknownEntity(entity.to_owned()))?;
    let mut mask = vec![true; table.row_count()];
    for sel in registry.iter() {
        let Some(link) = applicability(package, sel, entity) else {
            continue;
        };
        let m = selection_mask(package, sel, entity, link.as_ref())?;
        for (keep, admitted) in mask.iter_mut().zip(m) {
            *keep &= admitted;
        }
    }
    Ok(mask)
}

/// Per-entity count of records surviving the registry.
pub fn entity_counts(package: &Package, registry: &SelectionRegistry) -> BTreeMap<String, usize> {
    package
        .entities
        .iter()
        .map(|e| {
            let n = surviving_rows(package, registry, &e.name)
                .map(|m| m.iter().filter(|&&b| b).count())
                .unwrap_or(0);
            (e.name.clone(), n)
        })
        .collect()
}
