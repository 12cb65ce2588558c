use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{DeclaredRange, FieldKind, Package, PackageError};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub value: Value,
    pub count: usize,
}

/// Observed summary of one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub entity: String,
    pub field: String,
    pub kind: FieldKind,
    pub observed_min: Option<f64>,
    pub observed_max: Option<f64>,
    /// Non-null categories with their counts, for nominal and ordinal fields.
    pub categories: Option<Vec<CategoryCount>>,
    pub null_count: usize,
    pub distinct_count: usize,
}

/// One [`FieldStats`] per non-identifier field of `entity`, in schema order.
///
/// Categories follow the declared category order when the descriptor has
/// one, then value order for anything undeclared.
pub fn field_profile(package: &Package, entity: &str) -> Result<Vec<FieldStats>, PackageError> {
    let table = package.require_entity(entity)?;
    let mut out = Vec::new();
    for (col, field) in table.fields.iter().enumerate() {
        if field.kind == FieldKind::Identifier {
            continue;
        }
        let mut null_count = 0;
        let mut stats = FieldStats {
            entity: entity.to_owned(),
            field: field.name.clone(),
            kind: field.kind,
            observed_min: None,
            observed_max: None,
            categories: None,
            null_count: 0,
            distinct_count: 0,
        };
        if field.kind == FieldKind::Quantitative {
            let mut distinct = BTreeSet::new();
            for row in &table.rows {
                match &row[col] {
                    Value::Number(n) => {
                        stats.observed_min = Some(stats.observed_min.map_or(*n, |m| m.min(*n)));
                        stats.observed_max = Some(stats.observed_max.map_or(*n, |m| m.max(*n)));
                        distinct.insert(Value::number(*n));
                    }
                    _ => null_count += 1,
                }
            }
            stats.distinct_count = distinct.len();
        } else {
            let mut counts: BTreeMap<&Value, usize> = BTreeMap::new();
            for row in &table.rows {
                match &row[col] {
                    Value::Null => null_count += 1,
                    v => *counts.entry(v).or_default() += 1,
                }
            }
            stats.distinct_count = counts.len();
            let mut categories = Vec::with_capacity(counts.len());
            if let Some(DeclaredRange::Categories(declared)) = &field.declared_range {
                for name in declared {
                    let key = Value::text(name.as_str());
                    if let Some(count) = counts.remove(&key) {
                        categories.push(CategoryCount { value: key, count });
                    }
                }
            }
            categories.extend(counts.into_iter().map(|(v, count)| CategoryCount {
                value: v.clone(),
                count,
            }));
            stats.categories = Some(categories);
        }
        stats.null_count = null_count;
        out.push(stats);
    }
    Ok(out)
}
