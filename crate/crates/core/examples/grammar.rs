//! Parse a visualization spec and check it against a package.

use linkdash::datapackage::load_package;
use linkdash::grammar::{parse_spec, validate_spec};

const ORGANS_BY_CONDITION: &str = r#"{
  "source": [{"alias": "s", "entity": "samples"}],
  "transformation": [
    {"groupby": {"fields": ["organ", "condition"]}},
    {"rollup": {"out_field": "count", "op": "count"}}
  ],
  "representation": {"mark": "bar", "mapping": [
    {"channel": "y", "field": "organ", "field_kind": "nominal"},
    {"channel": "x", "field": "count", "field_kind": "quantitative"},
    {"channel": "color", "field": "condition", "field_kind": "nominal"}
  ]}
}"#;

const BROKEN: &str = r#"{
  "source": [{"alias": "d", "entity": "donors"}],
  "transformation": [{"cdf": {"field": "sex", "out_fraction": "f"}}]
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let package = load_package(concat!(env!("CARGO_MANIFEST_DIR"), "/data/portal/datapackage.json"))?;

    let spec = parse_spec(ORGANS_BY_CONDITION)?;
    println!(
        "parsed: {} transforms, {} encodings, violations {:?}",
        spec.transformation.len(),
        spec.representation.as_ref().map_or(0, |r| r.mapping.len()),
        validate_spec(&spec, &package)
    );

    for v in validate_spec(&parse_spec(BROKEN)?, &package) {
        println!("violation at {}: {:?}, {}", v.locus, v.kind, v.reason);
    }

    match parse_spec(r#"{"source": [{"alias": "d", "entity": "donors"}], "representation": {"mark": "heatmap"}}"#) {
        Ok(_) => unreachable!("heatmap is not a mark"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
