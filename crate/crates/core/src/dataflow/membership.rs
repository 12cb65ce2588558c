use std::collections::HashMap;

use crate::datapackage::{Package, Relationship};
use crate::grammar::LinkMode;
use crate::value::Value;

/// One flag per row of an entity, in table order.
pub type RowMask = Vec<bool>;

/// Carry a selection across one foreign key.
///
/// `selected` flags rows of `selection_entity`, which must be one end of
/// `relationship`; the result flags rows of the other end. Under `Any` a
/// record is kept when at least one related record is selected; under
/// `All` when every related record is, which holds vacuously for records
/// with no related records.
pub fn cross_entity_membership(
    package: &Package,
    relationship: &Relationship,
    mode: LinkMode,
    selection_entity: &str,
    selected: &[bool],
) -> RowMask {
    let (Some(child), Some(parent)) = (
        package.entity(&relationship.from_entity),
        package.entity(&relationship.to_entity),
    ) else {
        return Vec::new();
    };
    let parent_cols = parent.field_indices(&relationship.to_fields);
    let child_cols = child.field_indices(&relationship.from_fields);
    let (Some(parent_cols), Some(child_cols)) = (parent_cols, child_cols) else {
        return Vec::new();
    };

    let tuple = |row: &[Value], cols: &[usize]| -> Option<Vec<Value>> {
        let t: Vec<Value> = cols.iter().map(|&c| row[c].clone()).collect();
        (!t.iter().any(Value::is_null)).then_some(t)
    };
    let parent_of_key: HashMap<Vec<Value>, usize> = parent
        .rows
        .iter()
        .enumerate()
        .filter_map(|(i, row)| tuple(row, &parent_cols).map(|t| (t, i)))
        .collect();
    let parent_of: Vec<Option<usize>> = child
        .rows
        .iter()
        .map(|row| tuple(row, &child_cols).and_then(|t| parent_of_key.get(&t).copied()))
        .collect();

    if selection_entity == parent.name {
        parent_of
            .iter()
            .map(|p| match mode {
                LinkMode::Any => p.is_some_and(|p| selected[p]),
                LinkMode::All => p.is_none_or(|p| selected[p]),
            })
            .collect()
    } else {
        let mut out = vec![mode == LinkMode::All; parent.row_count()];
        for (c, p) in parent_of.iter().enumerate() {
            let Some(p) = *p else { continue };
            match mode {
                LinkMode::Any if selected[c] => out[p] = true,
                LinkMode::All if !selected[c] => out[p] = false,
                _ => {}
            }
        }
        out
    }
}
