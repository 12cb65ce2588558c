//! One filter on donors narrows samples directly and leaves datasets,
//! two hops away, alone. `any` and `all` differ when a filter sits on the
//! "many" side of a relationship.

use linkdash::datapackage::load_package;
use linkdash::grammar::{Bounds, LinkMode};
use linkdash::linking::{entity_counts, Selection, SelectionPayload, SelectionRegistry};
use linkdash::value::Value;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let package = load_package(concat!(env!("CARGO_MANIFEST_DIR"), "/data/portal/datapackage.json"))?;
    println!("unfiltered         {:?}", entity_counts(&package, &SelectionRegistry::default()));

    let adults = Selection {
        name: "adults".into(),
        entity: "donors".into(),
        fields: vec!["age".into()],
        payload: SelectionPayload::interval([Bounds::new(Some(21.0), Some(90.0))]),
        mode: LinkMode::Any,
    };
    let registry = SelectionRegistry::default().create(&package, adults)?;
    println!("donors aged 21-90  {:?}", entity_counts(&package, &registry));

    for mode in [LinkMode::Any, LinkMode::All] {
        let heart = Selection {
            name: "heart".into(),
            entity: "samples".into(),
            fields: vec!["organ".into()],
            payload: SelectionPayload::point([[Value::text("Heart")]]),
            mode,
        };
        let registry = SelectionRegistry::default().create(&package, heart)?;
        println!("heart samples, {mode:?}: {:?}", entity_counts(&package, &registry));
    }
    Ok(())
}
