//! Load a data package and profile each entity's fields.
//!
//! cargo run --example load_package [path/to/datapackage.json]

use linkdash::datapackage::{field_profile, load_package};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/portal/datapackage.json").to_owned());
    let package = load_package(&path)?;
    println!("{}: {} entities", package.name, package.entities.len());
    for rel in &package.relations {
        println!("  {}.{:?} -> {}.{:?}", rel.from_entity, rel.from_fields, rel.to_entity, rel.to_fields);
    }
    for entity in &package.entities {
        println!("\n{} ({} rows, key {:?})", entity.name, entity.row_count(), entity.primary_key);
        for stats in field_profile(&package, &entity.name)? {
            let range = match (stats.observed_min, stats.observed_max) {
                (Some(lo), Some(hi)) => format!("{lo} to {hi}"),
                _ => format!("{} categories", stats.distinct_count),
            };
            println!("  {:<14} {:<12?} {range}, {} null", stats.field, stats.kind, stats.null_count);
        }
    }
    Ok(())
}
