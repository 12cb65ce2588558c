//! Sessions are values: every action yields a new state, and a state
//! round-trips through a versioned snapshot with a stable digest.

use linkdash::datapackage::load_package;
use linkdash::grammar::{LinkMode, VizSpec};
use linkdash::linking::{Selection, SelectionPayload};
use linkdash::session::{apply_action, digest, restore, snapshot, Action, SessionState};
use linkdash::value::Value;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let package = load_package(concat!(env!("CARGO_MANIFEST_DIR"), "/data/penguins/datapackage.json"))?;
    let mut state = SessionState::new("demo", &package);
    let actions = [
        Action::CreateViz {
            spec: VizSpec::table("p", "penguins"),
        },
        Action::CreateFilter {
            selection: Selection {
                name: "f1".into(),
                entity: "penguins".into(),
                fields: vec!["sex".into()],
                payload: SelectionPayload::point([[Value::text("female")], [Value::text("male")]]),
                mode: LinkMode::Any,
            },
        },
        Action::Download {
            entity: "penguins".into(),
        },
    ];
    for action in actions {
        let (next, events) = apply_action(&state, &package, action, Some(state.version))?;
        println!("v{} -> v{}: {events:?}", state.version, next.version);
        state = next;
    }

    let doc = snapshot(&state).to_json();
    println!("snapshot: {} bytes, digest {}", doc.len(), digest(&state));
    let back = restore(&doc, &package)?;
    println!("restored equal: {}, counts {:?}", back == state, back.counts(&package));

    let stale = apply_action(&state, &package, Action::DismissViz { viz_id: "v1".into() }, Some(1));
    println!("stale write: {}", stale.unwrap_err());
    Ok(())
}
