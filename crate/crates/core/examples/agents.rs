//! The agent pipeline with a scripted backend: routing, a filter agent
//! whose first answer is rejected and retried, and a visualization agent.

use linkdash::agents::{respond, AgentConfig, ScriptedBackend, ScriptedTurn};
use linkdash::datapackage::load_package;
use linkdash::linking::SelectionRegistry;
use linkdash::session::{apply_chat, SessionState};
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let package = load_package(concat!(env!("CARGO_MANIFEST_DIR"), "/data/penguins/datapackage.json"))?;
    let message = "Show heavy penguins by island";
    let turn: ScriptedTurn = serde_json::from_value(json!({
        "orchestrator": {"wants_filter": true, "wants_viz": true},
        "filter": [
            {"filters": [{"entity": "penguins", "field": "weight", "kind": "interval", "min": 5000}]},
            {"filters": [{"entity": "penguins", "field": "body_mass_g", "kind": "interval", "min": 5000}]}
        ],
        "viz": {"source": [{"alias": "p", "entity": "penguins"}],
                "transformation": [{"groupby": {"fields": ["island"]}}, {"rollup": {"out_field": "count", "op": "count"}}],
                "representation": {"mark": "bar", "mapping": [
                    {"channel": "x", "field": "island", "field_kind": "nominal"},
                    {"channel": "y", "field": "count", "field_kind": "quantitative"}]}}
    }))?;
    let backend = ScriptedBackend::new([(message.to_owned(), turn)]);

    let output = respond(message, &package, &SelectionRegistry::default(), &backend, &AgentConfig::default())?;
    for trace in &output.traces {
        println!(
            "{:?} attempt {}: {}",
            trace.stage,
            trace.attempt,
            trace.rejected.as_deref().unwrap_or("accepted")
        );
    }
    println!("filter: {:?}", output.filter_commands);

    let state = SessionState::new("demo", &package);
    let (state, events) = apply_chat(&state, &package, output.into_turn(message), Some(0))?;
    println!("events: {events:?}");
    println!("heavy penguins by island: {:?}", state.table(&package, "v1")?.rows);
    Ok(())
}
