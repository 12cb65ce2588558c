//! Data package loading.
//!
//! A package is a JSON descriptor listing tabular CSV resources, each with a
//! typed field schema, a primary key, and optional foreign keys. Loading
//! type-checks every cell and resolves the foreign keys into
//! [`Relationship`]s between entities.

mod descriptor;
mod profile;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::Value;

pub use profile::{field_profile, CategoryCount, FieldStats};

#[derive(Debug, Error)]
pub enum PackageError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid descriptor: {0}")]
    Descriptor(String),
    #[error("missing resource: {0}")]
    MissingResource(String),
    #[error("schema violation in {entity} row {row}, field {field}: {reason}")]
    SchemaViolation {
        entity: String,
        /// 1-based data row; 0 refers to the header.
        row: usize,
        field: String,
        reason: String,
    },
    #[error("dangling foreign key on {entity}: {reason}")]
    DanglingForeignKey { entity: String, reason: String },
    #[error("duplicate primary key {key} in {entity} row {row}")]
    DuplicatePrimaryKey { entity: String, row: usize, key: String },
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("more than one direct relationship between {0} and {1}")]
    AmbiguousRelation(String, String),
}

/// How a field participates in analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Quantitative,
    Nominal,
    Ordinal,
    Identifier,
}

impl FieldKind {
    pub fn is_categorical(self) -> bool {
        matches!(self, FieldKind::Nominal | FieldKind::Ordinal)
    }
}

/// Storage type declared in the descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Integer,
    Number,
    String,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclaredRange {
    Numeric { min: Option<f64>, max: Option<f64> },
    Categories(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSchema {
    pub name: String,
    pub kind: FieldKind,
    pub data_type: DataType,
    pub description: Option<String>,
    pub declared_range: Option<DeclaredRange>,
}

/// A directed foreign key: `from_entity.from_fields` references
/// `to_entity.to_fields`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relationship {
    pub from_entity: String,
    pub from_fields: Vec<String>,
    pub to_entity: String,
    pub to_fields: Vec<String>,
}

impl Relationship {
    /// The entity at the other end, if `entity` is one of the endpoints.
    pub fn other_end(&self, entity: &str) -> Option<&str> {
        if self.from_entity == entity {
            Some(&self.to_entity)
        } else if self.to_entity == entity {
            Some(&self.from_entity)
        } else {
            None
        }
    }

    /// Key fields of the relationship on `entity`'s side.
    pub fn fields_on(&self, entity: &str) -> Option<&[String]> {
        if self.from_entity == entity {
            Some(&self.from_fields)
        } else if self.to_entity == entity {
            Some(&self.to_fields)
        } else {
            None
        }
    }
}

/// Which way a relationship points, seen from the first entity of a
/// [`relation_between`] query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// The first entity holds the foreign key.
    Outgoing,
    /// The second entity holds the foreign key.
    Incoming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelationMatch<'a> {
    pub relationship: &'a Relationship,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityTable {
    pub name: String,
    pub path: PathBuf,
    pub description: Option<String>,
    pub fields: Vec<FieldSchema>,
    pub primary_key: Vec<String>,
    /// Typed cells, one inner vector per row in field order.
    pub rows: Vec<Vec<Value>>,
    /// Cells exactly as they appeared in the CSV.
    pub raw_rows: Vec<Vec<String>>,
}

impl EntityTable {
    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&FieldSchema> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Column positions for a list of field names; `None` if any is missing.
    pub fn field_indices(&self, names: &[String]) -> Option<Vec<usize>> {
        names.iter().map(|n| self.field_index(n)).collect()
    }

    /// Primary-key tuple of a row.
    pub fn key_of(&self, row: usize) -> Vec<Value> {
        self.primary_key
            .iter()
            .map(|k| {
                let i = self.field_index(k).expect("primary key field exists");
                self.rows[row][i].clone()
            })
            .collect()
    }
}

/// A loaded, validated data package. Immutable after load.
#[derive(Debug, Clone, PartialEq)]
pub struct Package {
    pub name: String,
    pub entities: Vec<EntityTable>,
    pub relations: Vec<Relationship>,
    /// Descriptor keys that were ignored during load.
    pub warnings: Vec<String>,
}

impl Package {
    pub fn entity(&self, name: &str) -> Option<&EntityTable> {
        self.entities.iter().find(|e| e.name == name)
    }

    pub fn require_entity(&self, name: &str) -> Result<&EntityTable, PackageError> {
        self.entity(name)
            .ok_or_else(|| PackageError::UnknownEntity(name.to_owned()))
    }

    pub fn field(&self, entity: &str, field: &str) -> Option<&FieldSchema> {
        self.entity(entity).and_then(|e| e.field(field))
    }

    /// Build a package from descriptor JSON, reading each resource path
    /// through `read`.
    pub fn from_descriptor<F>(descriptor: &str, mut read: F) -> Result<Package, PackageError>
    where
        F: FnMut(&str) -> Result<String, PackageError>,
    {
        descriptor::build(descriptor, &mut read)
    }
}

/// Load a package from a `datapackage.json` file. Resource paths are
/// resolved relative to the descriptor's directory.
pub fn load_package(descriptor_path: impl AsRef<Path>) -> Result<Package, PackageError> {
    let descriptor_path = descriptor_path.as_ref();
    let text = fs::read_to_string(descriptor_path).map_err(|source| PackageError::Io {
        path: descriptor_path.to_owned(),
        source,
    })?;
    let base = descriptor_path.parent().unwrap_or(Path::new(".")).to_owned();
    Package::from_descriptor(&text, |rel| {
        let full = base.join(rel);
        fs::read_to_string(&full).map_err(|source| match source.kind() {
            std::io::ErrorKind::NotFound => {
                PackageError::MissingResource(format!("{} (looked for {})", rel, full.display()))
            }
            _ => PackageError::Io { path: full, source },
        })
    })
}

/// The direct foreign-key relationship between `a` and `b`, in either
/// direction. Paths through intermediate entities are never considered.
pub fn relation_between<'p>(
    package: &'p Package,
    a: &str,
    b: &str,
) -> Result<Option<RelationMatch<'p>>, PackageError> {
    package.require_entity(a)?;
    package.require_entity(b)?;
    if a == b {
        return Ok(None);
    }
    let mut found: Vec<RelationMatch<'p>> = Vec::new();
    let mut seen = HashSet::new();
    for rel in &package.relations {
        let direction = if rel.from_entity == a && rel.to_entity == b {
            Direction::Outgoing
        } else if rel.from_entity == b && rel.to_entity == a {
            Direction::Incoming
        } else {
            continue;
        };
        if seen.insert(rel) {
            found.push(RelationMatch {
                relationship: rel,
                direction,
            });
        }
    }
    match found.len() {
        0 => Ok(None),
        1 => Ok(found.pop()),
        _ => Err(PackageError::AmbiguousRelation(a.to_owned(), b.to_owned())),
    }
}
