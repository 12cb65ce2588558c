use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use serde::Deserialize;

use super::{
    DataType, DeclaredRange, EntityTable, FieldKind, FieldSchema, Package, PackageError,
    Relationship,
};
use crate::value::Value;

type Extra = BTreeMap<String, serde_json::Value>;

#[derive(Deserialize)]
struct RawDescriptor {
    name: Option<String>,
    #[serde(default)]
    resources: Vec<RawResource>,
    #[serde(flatten)]
    extra: Extra,
}

#[derive(Deserialize)]
struct RawResource {
    name: String,
    path: Option<String>,
    description: Option<String>,
    schema: RawSchema,
    #[serde(flatten)]
    extra: Extra,
}

#[derive(Deserialize)]
struct RawSchema {
    fields: Vec<RawField>,
    #[serde(rename = "primaryKey")]
    primary_key: Option<OneOrMany>,
    #[serde(rename = "foreignKeys", default)]
    foreign_keys: Vec<RawForeignKey>,
    #[serde(flatten)]
    extra: Extra,
}

#[derive(Deserialize)]
struct RawField {
    name: String,
    #[serde(rename = "type", default = "default_type")]
    field_type: String,
    description: Option<String>,
    constraints: Option<RawConstraints>,
    #[serde(rename = "categoriesOrdered", default)]
    categories_ordered: bool,
    #[serde(flatten)]
    extra: Extra,
}

fn default_type() -> String {
    "string".to_owned()
}

#[derive(Deserialize)]
struct RawConstraints {
    #[serde(rename = "enum")]
    enumeration: Option<Vec<serde_json::Value>>,
    minimum: Option<f64>,
    maximum: Option<f64>,
    #[serde(flatten)]
    extra: Extra,
}

#[derive(Deserialize)]
struct RawForeignKey {
    fields: OneOrMany,
    reference: RawReference,
}

#[derive(Deserialize)]
struct RawReference {
    resource: String,
    fields: OneOrMany,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

fn note_extra(warnings: &mut Vec<String>, locus: &str, extra: &Extra) {
    for key in extra.keys() {
        let msg = format!("ignored descriptor key {locus}{key}");
        tracing::warn!("{msg}");
        warnings.push(msg);
    }
}

fn json_scalar_text(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub(super) fn build(
    descriptor: &str,
    read: &mut dyn FnMut(&str) -> Result<String, PackageError>,
) -> Result<Package, PackageError> {
    let raw: RawDescriptor =
        serde_json::from_str(descriptor).map_err(|e| PackageError::Descriptor(e.to_string()))?;
    if raw.resources.is_empty() {
        return Err(PackageError::MissingResource(
            "descriptor lists no resources".to_owned(),
        ));
    }

    let mut warnings = Vec::new();
    note_extra(&mut warnings, "", &raw.extra);

    let mut names = HashSet::new();
    for r in &raw.resources {
        if !names.insert(r.name.as_str()) {
            return Err(PackageError::Descriptor(format!(
                "duplicate resource name {}",
                r.name
            )));
        }
    }

    let mut entities = Vec::with_capacity(raw.resources.len());
    let mut pending_keys: Vec<(String, RawForeignKey)> = Vec::new();

    for (i, res) in raw.resources.into_iter().enumerate() {
        let locus = format!("resources[{i}].");
        note_extra(&mut warnings, &locus, &res.extra);
        note_extra(&mut warnings, &format!("{locus}schema."), &res.schema.extra);

        let path = res.path.ok_or_else(|| {
            PackageError::MissingResource(format!("resource {} has no path", res.name))
        })?;
        let primary_key = res.schema.primary_key.map(OneOrMany::into_vec).unwrap_or_default();
        let fk_fields: HashSet<String> = res
            .schema
            .foreign_keys
            .iter()
            .flat_map(|fk| match &fk.fields {
                OneOrMany::One(s) => vec![s.clone()],
                OneOrMany::Many(v) => v.clone(),
            })
            .collect();

        let mut fields = Vec::with_capacity(res.schema.fields.len());
        let mut seen = HashSet::new();
        for (j, f) in res.schema.fields.into_iter().enumerate() {
            if !seen.insert(f.name.clone()) {
                return Err(PackageError::Descriptor(format!(
                    "duplicate field {} in {}",
                    f.name, res.name
                )));
            }
            note_extra(&mut warnings, &format!("{locus}schema.fields[{j}]."), &f.extra);
            fields.push(field_schema(f, &primary_key, &fk_fields, &mut warnings, &locus, j));
        }
        for k in primary_key.iter().chain(fk_fields.iter()) {
            if !seen.contains(k) {
                return Err(PackageError::Descriptor(format!(
                    "key field {k} is not a field of {}",
                    res.name
                )));
            }
        }

        let text = read(&path)?;
        let (rows, raw_rows) = parse_rows(&res.name, &fields, &text)?;
        let entity = EntityTable {
            name: res.name.clone(),
            path: PathBuf::from(path),
            description: res.description,
            fields,
            primary_key,
            rows,
            raw_rows,
        };
        check_primary_key(&entity)?;
        for fk in res.schema.foreign_keys {
            pending_keys.push((res.name.clone(), fk));
        }
        entities.push(entity);
    }

    let mut relations = Vec::with_capacity(pending_keys.len());
    for (from, fk) in pending_keys {
        relations.push(resolve_foreign_key(&entities, &from, fk)?);
    }

    Ok(Package {
        name: raw.name.unwrap_or_else(|| "package".to_owned()),
        entities,
        relations,
        warnings,
    })
}

fn field_schema(
    f: RawField,
    primary_key: &[String],
    fk_fields: &HashSet<String>,
    warnings: &mut Vec<String>,
    locus: &str,
    j: usize,
) -> FieldSchema {
    let data_type = match f.field_type.as_str() {
        "integer" => DataType::Integer,
        "number" => DataType::Number,
        "boolean" => DataType::Boolean,
        "string" => DataType::String,
        other => {
            let msg = format!(
                "unsupported type {other} at {locus}schema.fields[{j}], read as string"
            );
            tracing::warn!("{msg}");
            warnings.push(msg);
            DataType::String
        }
    };
    let kind = if primary_key.contains(&f.name) || fk_fields.contains(&f.name) {
        FieldKind::Identifier
    } else {
        match data_type {
            DataType::Integer | DataType::Number => FieldKind::Quantitative,
            _ if f.categories_ordered => FieldKind::Ordinal,
            _ => FieldKind::Nominal,
        }
    };
    let declared_range = f.constraints.and_then(|c| {
        note_extra(
            warnings,
            &format!("{locus}schema.fields[{j}].constraints."),
            &c.extra,
        );
        if let Some(values) = c.enumeration {
            Some(DeclaredRange::Categories(
                values.iter().map(json_scalar_text).collect(),
            ))
        } else if c.minimum.is_some() || c.maximum.is_some() {
            Some(DeclaredRange::Numeric {
                min: c.minimum,
                max: c.maximum,
            })
        } else {
            None
        }
    });
    FieldSchema {
        name: f.name,
        kind,
        data_type,
        description: f.description,
        declared_range,
    }
}

fn is_null_cell(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

fn parse_cell(field: &FieldSchema, cell: &str) -> Result<Value, String> {
    if is_null_cell(cell) {
        return Ok(Value::Null);
    }
    let value = match field.data_type {
        DataType::Integer => {
            let n: i64 = cell
                .trim()
                .parse()
                .map_err(|_| format!("{cell:?} is not an integer"))?;
            if field.kind == FieldKind::Identifier {
                Value::text(cell)
            } else {
                Value::number(n as f64)
            }
        }
        DataType::Number => {
            let n: f64 = cell
                .trim()
                .parse()
                .map_err(|_| format!("{cell:?} is not a number"))?;
            if !n.is_finite() {
                return Err(format!("{cell:?} is not finite"));
            }
            if field.kind == FieldKind::Identifier {
                Value::text(cell)
            } else {
                Value::number(n)
            }
        }
        DataType::Boolean => match cell {
            "true" | "True" | "TRUE" | "1" => Value::text("true"),
            "false" | "False" | "FALSE" | "0" => Value::text("false"),
            _ => return Err(format!("{cell:?} is not a boolean")),
        },
        DataType::String => Value::text(cell),
    };
    match (&field.declared_range, &value) {
        (Some(DeclaredRange::Categories(allowed)), v) => {
            let text = match v {
                Value::Number(n) => n.to_string(),
                other => other.to_string(),
            };
            if !allowed.iter().any(|a| *a == text || a == cell) {
                return Err(format!("{cell:?} is not one of the declared categories"));
            }
        }
        (Some(DeclaredRange::Numeric { min, max }), Value::Number(n))
            if min.is_some_and(|m| *n < m) || max.is_some_and(|m| *n > m) =>
        {
            return Err(format!("{cell} is outside the declared range"));
        }
        _ => {}
    }
    Ok(value)
}

type Rows = (Vec<Vec<Value>>, Vec<Vec<String>>);

fn parse_rows(entity: &str, fields: &[FieldSchema], text: &str) -> Result<Rows, PackageError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let violation = |row: usize, field: &str, reason: String| PackageError::SchemaViolation {
        entity: entity.to_owned(),
        row,
        field: field.to_owned(),
        reason,
    };
    let headers = reader
        .headers()
        .map_err(|e| violation(0, "", e.to_string()))?
        .clone();
    let names: Vec<&str> = fields.iter().map(|f| f.name.as_str()).collect();
    if headers.iter().collect::<Vec<_>>() != names {
        return Err(violation(
            0,
            "",
            format!(
                "header {:?} does not match schema fields {:?}",
                headers.iter().collect::<Vec<_>>(),
                names
            ),
        ));
    }

    let mut rows = Vec::new();
    let mut raw_rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| violation(row_no, "", e.to_string()))?;
        if record.len() != fields.len() {
            return Err(violation(
                row_no,
                "",
                format!("expected {} cells, found {}", fields.len(), record.len()),
            ));
        }
        let mut typed = Vec::with_capacity(fields.len());
        for (field, cell) in fields.iter().zip(record.iter()) {
            typed.push(parse_cell(field, cell).map_err(|r| violation(row_no, &field.name, r))?);
        }
        rows.push(typed);
        raw_rows.push(record.iter().map(str::to_owned).collect());
    }
    Ok((rows, raw_rows))
}

fn check_primary_key(entity: &EntityTable) -> Result<(), PackageError> {
    if entity.primary_key.is_empty() {
        return Ok(());
    }
    let idx = entity
        .field_indices(&entity.primary_key)
        .expect("key fields checked");
    let mut seen = HashSet::with_capacity(entity.rows.len());
    for (r, row) in entity.rows.iter().enumerate() {
        let key: Vec<&Value> = idx.iter().map(|&i| &row[i]).collect();
        if let Some(pos) = key.iter().position(|v| v.is_null()) {
            return Err(PackageError::SchemaViolation {
                entity: entity.name.clone(),
                row: r + 1,
                field: entity.primary_key[pos].clone(),
                reason: "primary key cell is null".to_owned(),
            });
        }
        if !seen.insert(key.clone()) {
            return Err(PackageError::DuplicatePrimaryKey {
                entity: entity.name.clone(),
                row: r + 1,
                key: key.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
            });
        }
    }
    Ok(())
}

fn resolve_foreign_key(
    entities: &[EntityTable],
    from: &str,
    fk: RawForeignKey,
) -> Result<Relationship, PackageError> {
    let dangling = |reason: String| PackageError::DanglingForeignKey {
        entity: from.to_owned(),
        reason,
    };
    let from_fields = fk.fields.into_vec();
    let to_entity = if fk.reference.resource.is_empty() {
        from.to_owned()
    } else {
        fk.reference.resource
    };
    let to_fields = fk.reference.fields.into_vec();
    let target = entities
        .iter()
        .find(|e| e.name == to_entity)
        .ok_or_else(|| dangling(format!("references unknown entity {to_entity}")))?;
    if from_fields.len() != to_fields.len() || from_fields.is_empty() {
        return Err(dangling(format!(
            "field lists {from_fields:?} and {to_fields:?} differ in length"
        )));
    }
    for f in &to_fields {
        if target.field(f).is_none() {
            return Err(dangling(format!("{to_entity} has no field {f}")));
        }
        if !target.primary_key.contains(f) {
            return Err(dangling(format!(
                "{to_entity}.{f} is not part of its primary key"
            )));
        }
    }
    Ok(Relationship {
        from_entity: from.to_owned(),
        from_fields,
        to_entity,
        to_fields,
    })
}
