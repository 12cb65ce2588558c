use serde::{Deserialize, Serialize};

use crate::datapackage::{field_profile, FieldKind, Package, Relationship};
use crate::grammar::SelectionKind;
use crate::linking::SelectionRegistry;
use crate::value::Value;

use super::AgentError;

/// Limits applied when describing data to the agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Categorical fields with more distinct values than this are left out.
    pub cardinality_threshold: usize,
    /// Upper bound on the serialized context, in bytes.
    pub context_budget: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            cardinality_threshold: 50,
            context_budget: 64 * 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldContext {
    pub name: String,
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<Value>>,
    pub has_nulls: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityContext {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub fields: Vec<FieldContext>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionContext {
    pub name: String,
    pub entity: String,
    pub fields: Vec<String>,
    pub kind: SelectionKind,
}

/// What the agents are told about the data. Domains describe the whole
/// dataset, not the current filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentContext {
    pub entities: Vec<EntityContext>,
    pub relationships: Vec<Relationship>,
    pub selections: Vec<SelectionContext>,
}

impl AgentContext {
    pub fn field(&self, entity: &str, field: &str) -> Option<&FieldContext> {
        self.entities
            .iter()
            .find(|e| e.name == entity)
            .and_then(|e| e.fields.iter().find(|f| f.name == field))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("context serializes")
    }
}

/// Describe `package` for the agents, leaving out identifiers and
/// high-cardinality categorical fields.
pub fn build_context(
    package: &Package,
    registry: &SelectionRegistry,
    config: &AgentConfig,
) -> Result<AgentContext, AgentError> {
    let mut entities = Vec::new();
    for table in &package.entities {
        let stats = field_profile(package, &table.name).map_err(|e| AgentError::Backend(e.to_string()))?;
        let fields = table
            .fields
            .iter()
            .filter_map(|schema| {
                let s = stats.iter().find(|s| s.field == schema.name)?;
                if s.kind.is_categorical() && s.distinct_count > config.cardinality_threshold {
                    return None;
                }
                Some(FieldContext {
                    name: schema.name.clone(),
                    kind: schema.kind,
                    description: schema.description.clone(),
                    min: s.observed_min,
                    max: s.observed_max,
                    categories: s
                        .categories
                        .as_ref()
                        .map(|cats| cats.iter().map(|c| c.value.clone()).collect()),
                    has_nulls: s.null_count > 0,
                })
            })
            .collect();
        entities.push(EntityContext {
            name: table.name.clone(),
            description: table.description.clone(),
            fields,
        });
    }
    let context = AgentContext {
        entities,
        relationships: package.relations.clone(),
        selections: registry
            .iter()
            .map(|s| SelectionContext {
                name: s.name.clone(),
                entity: s.entity.clone(),
                fields: s.fields.clone(),
                kind: s.kind(),
            })
            .collect(),
    };
    let size = context.to_json().len();
    if size > config.context_budget {
        return Err(AgentError::ContextTooLarge {
            size,
            budget: config.context_budget,
        });
    }
    Ok(context)
}
