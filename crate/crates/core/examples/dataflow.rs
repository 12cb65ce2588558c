//! Execute specs: grouping, rollups, a CDF, and a join.

use linkdash::dataflow::{execute, ResultTable};
use linkdash::datapackage::load_package;
use linkdash::grammar::parse_spec;
use linkdash::linking::SelectionRegistry;

fn show(title: &str, table: &ResultTable, limit: usize) {
    println!("\n{title}");
    let names: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    println!("  {}", names.join(" | "));
    for row in table.rows.iter().take(limit) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        println!("  {}", cells.join(" | "));
    }
    if table.row_count() > limit {
        println!("  ... {} rows", table.row_count());
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let package = load_package(concat!(env!("CARGO_MANIFEST_DIR"), "/data/penguins/datapackage.json"))?;
    let none = SelectionRegistry::default();

    let by_sex = parse_spec(
        r#"{"source": [{"alias": "p", "entity": "penguins"}],
            "transformation": [{"groupby": {"fields": ["sex"]}},
                               {"rollup": {"out_field": "count", "op": "count"}},
                               {"rollup": {"out_field": "mean_mass", "op": "mean", "in_field": "body_mass_g"}}]}"#,
    )?;
    show("penguins by sex", &execute(&by_sex, &package, &none)?, 10);

    let cdf = parse_spec(
        r#"{"source": [{"alias": "p", "entity": "penguins"}],
            "transformation": [{"groupby": {"fields": ["species"]}},
                               {"cdf": {"field": "body_mass_g", "out_fraction": "fraction"}}]}"#,
    )?;
    show("body mass CDF by species", &execute(&cdf, &package, &none)?, 5);

    let portal = load_package(concat!(env!("CARGO_MANIFEST_DIR"), "/data/portal/datapackage.json"))?;
    let joined = parse_spec(
        r#"{"source": [{"alias": "s", "entity": "samples"}, {"alias": "d", "entity": "donors"}],
            "transformation": [
              {"join": {"left_alias": "s", "right_alias": "d",
                        "via": {"from_entity": "samples", "from_fields": ["donor_id"],
                                "to_entity": "donors", "to_fields": ["donor_id"]}}},
              {"groupby": {"fields": ["organ"]}},
              {"rollup": {"out_field": "mean_age", "op": "mean", "in_field": "age"}},
              {"orderby": {"field": "mean_age", "direction": "desc"}}]}"#,
    )?;
    show("mean donor age per organ", &execute(&joined, &portal, &none)?, 10);
    Ok(())
}
