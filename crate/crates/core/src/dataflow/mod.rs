//! Execution of validated specs.
//!
//! Transforms run in order over a working table whose rows remember which
//! primary-entity record they came from until the first aggregation. That
//! origin is what selection filters test and what tables report as
//! provenance.

mod membership;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datapackage::{EntityTable, FieldKind, Package};
use crate::grammar::{FilterTransform, Mark, Predicate, PredicateOp, RollupOp, SortDirection, Transform, VizSpec};
use crate::linking::{selection_mask, LinkError, SelectionRegistry};
use crate::value::Value;

pub use membership::{cross_entity_membership, RowMask};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataflowError {
    #[error("no selection named {0} is registered")]
    UnresolvedSelection(String),
    #[error("join keys do not line up: {0}")]
    JoinKeyMismatch(String),
    #[error("groupby needs at least one field")]
    EmptyGroupby,
    #[error("field {0} is not available at this step")]
    UnresolvedField(String),
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("{0}")]
    InvalidStep(String),
    #[error(transparent)]
    Selection(#[from] LinkError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: FieldKind,
}

/// Rows ready for rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
    /// Source primary key per row, for tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Vec<Vec<Value>>>,
}

impl ResultTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Values of one column, in row order.
    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }
}

enum Pending {
    None,
    Group { keys: Vec<usize>, aggs: Vec<Agg> },
    Whole { aggs: Vec<Agg> },
}

struct Agg {
    name: String,
    op: RollupOp,
    input: Option<usize>,
}

struct Work<'p> {
    primary: &'p EntityTable,
    cols: Vec<Column>,
    rows: Vec<Vec<Value>>,
    /// Primary-entity row per working row; gone after aggregation.
    origin: Option<Vec<usize>>,
    pending: Pending,
}

impl Work<'_> {
    fn col(&self, name: &str) -> Result<usize, DataflowError> {
        self.cols
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| DataflowError::UnresolvedField(name.to_owned()))
    }

    fn tiebreak(&self, a: usize, b: usize) -> Ordering {
        match &self.origin {
            Some(o) => self.primary.key_of(o[a]).cmp(&self.primary.key_of(o[b])).then(o[a].cmp(&o[b])),
            None => a.cmp(&b),
        }
    }

    fn retain(&mut self, keep: impl Fn(usize, &[Value]) -> bool) {
        let flags: Vec<bool> = self.rows.iter().enumerate().map(|(i, r)| keep(i, r)).collect();
        let mut it = flags.iter();
        self.rows.retain(|_| *it.next().expect("one flag per row"));
        if let Some(origin) = &mut self.origin {
            let mut it = flags.iter();
            origin.retain(|_| *it.next().expect("one flag per row"));
        }
    }

    fn reorder(&mut self, order: Vec<usize>) {
        let mut rows = std::mem::take(&mut self.rows);
        self.rows = order.iter().map(|&i| std::mem::take(&mut rows[i])).collect();
        if let Some(origin) = &mut self.origin {
            *origin = order.iter().map(|&i| origin[i]).collect();
        }
    }

    /// Groups of row indices keyed by `keys`, in key order.
    fn groups(&self, keys: &[usize]) -> BTreeMap<Vec<Value>, Vec<usize>> {
        let mut groups: BTreeMap<Vec<Value>, Vec<usize>> = BTreeMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            let key = keys.iter().map(|&k| row[k].clone()).collect();
            groups.entry(key).or_default().push(i);
        }
        groups
    }

    fn settle(&mut self) {
        let (keys, aggs) = match std::mem::replace(&mut self.pending, Pending::None) {
            Pending::None => return,
            Pending::Group { keys, aggs } => (keys, aggs),
            Pending::Whole { aggs } => (Vec::new(), aggs),
        };
        let groups = if keys.is_empty() {
            BTreeMap::from([(Vec::new(), (0..self.rows.len()).collect())])
        } else {
            self.groups(&keys)
        };
        let rows = groups
            .into_iter()
            .map(|(mut key, members)| {
                key.extend(aggs.iter().map(|a| aggregate(a, &members, &self.rows)));
                key
            })
            .collect();
        let mut cols: Vec<Column> = keys.iter().map(|&k| self.cols[k].clone()).collect();
        cols.extend(aggs.iter().map(|a| Column {
            name: a.name.clone(),
            kind: FieldKind::Quantitative,
        }));
        self.cols = cols;
        self.rows = rows;
        self.origin = None;
    }
}

/// Count counts rows; the other ops skip nulls and yield null when nothing
/// is left, except sum, which yields 0.
fn aggregate(agg: &Agg, members: &[usize], rows: &[Vec<Value>]) -> Value {
    let Some(input) = agg.input else {
        return Value::number(members.len() as f64);
    };
    let values = members.iter().filter_map(|&i| rows[i][input].as_f64());
    match agg.op {
        RollupOp::Count => Value::number(members.len() as f64),
        RollupOp::Sum => Value::number(values.sum()),
        RollupOp::Mean => {
            let (n, total) = values.fold((0usize, 0.0), |(n, t), v| (n + 1, t + v));
            if n == 0 {
                Value::Null
            } else {
                Value::number(total / n as f64)
            }
        }
        RollupOp::Min => values.min_by(f64::total_cmp).map_or(Value::Null, Value::number),
        RollupOp::Max => values.max_by(f64::total_cmp).map_or(Value::Null, Value::number),
    }
}

fn predicate_holds(p: &Predicate, v: &Value) -> bool {
    match p.op {
        PredicateOp::IsNull => v.is_null(),
        PredicateOp::NotNull => !v.is_null(),
        PredicateOp::In => p.values.as_ref().is_some_and(|vs| vs.contains(v)),
        PredicateOp::Range => v
            .as_f64()
            .is_some_and(|x| p.min.is_none_or(|m| x >= m) && p.max.is_none_or(|m| x <= m)),
    }
}

/// Run `spec` against `package`, resolving selection filters in `registry`.
///
/// Named filters are not injected here; callers that want dashboard
/// semantics run [`crate::linking::inject_filters`] first.
pub fn execute(spec: &VizSpec, package: &Package, registry: &SelectionRegistry) -> Result<ResultTable, DataflowError> {
    let entity = spec.primary_entity();
    let primary = package
        .entity(entity)
        .ok_or_else(|| DataflowError::UnknownEntity(entity.to_owned()))?;
    let mut w = Work {
        primary,
        cols: primary
            .fields
            .iter()
            .map(|f| Column {
                name: f.name.clone(),
                kind: f.kind,
            })
            .collect(),
        rows: primary.rows.clone(),
        origin: Some((0..primary.row_count()).collect()),
        pending: Pending::None,
    };

    for t in &spec.transformation {
        match t {
            Transform::Rollup { out_field, op, in_field } => {
                let input = in_field.as_deref().map(|f| w.col(f)).transpose()?;
                let agg = Agg {
                    name: out_field.clone(),
                    op: *op,
                    input,
                };
                match &mut w.pending {
                    Pending::Group { aggs, .. } | Pending::Whole { aggs } => aggs.push(agg),
                    Pending::None => w.pending = Pending::Whole { aggs: vec![agg] },
                }
                continue;
            }
            Transform::Cdf { .. } => {
                let partitions_only = matches!(&w.pending, Pending::Group { aggs, .. } if aggs.is_empty());
                if !partitions_only {
                    w.settle();
                }
            }
            _ => w.settle(),
        }

        match t {
            Transform::Filter(FilterTransform::Selection { selection, link }) => {
                let sel = registry
                    .get(selection)
                    .ok_or_else(|| DataflowError::UnresolvedSelection(selection.clone()))?;
                let mask = selection_mask(package, sel, entity, link.as_ref())?;
                let origin = w
                    .origin
                    .clone()
                    .ok_or_else(|| DataflowError::InvalidStep("selection filter after aggregation".into()))?;
                w.retain(|i, _| mask[origin[i]]);
            }
            Transform::Filter(FilterTransform::Predicate { predicate }) => {
                let c = w.col(&predicate.field)?;
                w.retain(|_, row| predicate_holds(predicate, &row[c]));
            }
            Transform::Groupby { fields } => {
                if fields.is_empty() {
                    return Err(DataflowError::EmptyGroupby);
                }
                let keys = fields.iter().map(|f| w.col(f)).collect::<Result<_, _>>()?;
                w.pending = Pending::Group { keys, aggs: Vec::new() };
            }
            Transform::Cdf { field, out_fraction } => {
                let c = w.col(field)?;
                let keys = match std::mem::replace(&mut w.pending, Pending::None) {
                    Pending::Group { keys, .. } => keys,
                    _ => Vec::new(),
                };
                w.retain(|_, row| !row[c].is_null());
                let mut order = Vec::with_capacity(w.rows.len());
                let mut fractions = Vec::with_capacity(w.rows.len());
                for (_, mut members) in w.groups(&keys) {
                    members.sort_by(|&a, &b| w.rows[a][c].cmp(&w.rows[b][c]).then_with(|| w.tiebreak(a, b)));
                    let n = members.len();
                    fractions.extend((1..=n).map(|i| if i == n { 1.0 } else { i as f64 / n as f64 }));
                    order.extend(members);
                }
                w.reorder(order);
                for (row, f) in w.rows.iter_mut().zip(fractions) {
                    row.push(Value::number(f));
                }
                w.cols.push(Column {
                    name: out_fraction.clone(),
                    kind: FieldKind::Quantitative,
                });
            }
            Transform::Join { right_alias, via, .. } => {
                let right_entity = spec
                    .source
                    .iter()
                    .find(|s| &s.alias == right_alias)
                    .map(|s| s.entity.as_str())
                    .ok_or_else(|| DataflowError::JoinKeyMismatch(format!("unknown alias {right_alias}")))?;
                let right = package
                    .entity(right_entity)
                    .ok_or_else(|| DataflowError::UnknownEntity(right_entity.to_owned()))?;
                let (Some(left_fields), Some(right_fields)) = (via.fields_on(entity), via.fields_on(right_entity)) else {
                    return Err(DataflowError::JoinKeyMismatch(format!(
                        "{}->{} does not link {entity} and {right_entity}",
                        via.from_entity, via.to_entity
                    )));
                };
                let left_cols = left_fields.iter().map(|f| w.col(f)).collect::<Result<Vec<_>, _>>()?;
                let right_cols = right
                    .field_indices(right_fields)
                    .ok_or_else(|| DataflowError::JoinKeyMismatch(format!("{right_entity} lacks join fields")))?;
                let mut index: HashMap<Vec<Value>, Vec<usize>> = HashMap::new();
                for (i, row) in right.rows.iter().enumerate() {
                    let key: Vec<Value> = right_cols.iter().map(|&c| row[c].clone()).collect();
                    if !key.iter().any(Value::is_null) {
                        index.entry(key).or_default().push(i);
                    }
                }
                let mut rows = Vec::new();
                let mut origin = Vec::new();
                for (i, row) in w.rows.iter().enumerate() {
                    let key: Vec<Value> = left_cols.iter().map(|&c| row[c].clone()).collect();
                    for &r in index.get(&key).map(Vec::as_slice).unwrap_or(&[]) {
                        let mut joined = row.clone();
                        joined.extend(right.rows[r].iter().cloned());
                        rows.push(joined);
                        if let Some(o) = &w.origin {
                            origin.push(o[i]);
                        }
                    }
                }
                for f in &right.fields {
                    let name = if w.cols.iter().any(|c| c.name == f.name) {
                        format!("{right_alias}.{}", f.name)
                    } else {
                        f.name.clone()
                    };
                    w.cols.push(Column { name, kind: f.kind });
                }
                w.rows = rows;
                if w.origin.is_some() {
                    w.origin = Some(origin);
                }
            }
            Transform::Orderby { field, direction } => {
                let c = w.col(field)?;
                let mut order: Vec<usize> = (0..w.rows.len()).collect();
                order.sort_by(|&a, &b| {
                    let (va, vb) = (&w.rows[a][c], &w.rows[b][c]);
                    let by_value = match (va.is_null(), vb.is_null()) {
                        (true, true) => Ordering::Equal,
                        (true, false) => Ordering::Greater,
                        (false, true) => Ordering::Less,
                        (false, false) => match direction {
                            SortDirection::Asc => va.cmp(vb),
                            SortDirection::Desc => vb.cmp(va),
                        },
                    };
                    by_value.then_with(|| w.tiebreak(a, b))
                });
                w.reorder(order);
            }
            Transform::Rollup { .. } => unreachable!("handled above"),
        }
    }
    w.settle();

    let provenance = match (spec.mark(), &w.origin) {
        (None | Some(Mark::Row), Some(origin)) if !primary.primary_key.is_empty() => {
            Some(origin.iter().map(|&o| primary.key_of(o)).collect())
        }
        _ => None,
    };
    Ok(ResultTable {
        columns: w.cols,
        rows: w.rows,
        provenance,
    })
}
