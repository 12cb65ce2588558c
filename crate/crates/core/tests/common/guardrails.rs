//! The malformed agent-output corpus and a driver that feeds each entry
//! through the real pipeline against a live session.

use std::path::PathBuf;

use linkdash::agents::{respond, AgentConfig, AgentError, ScriptedBackend, ScriptedTurn};
use linkdash::grammar::parse_spec;
use linkdash::session::{apply_action, apply_chat, digest, Action, SessionState};
use serde::Deserialize;
use serde_json::{json, Value as Json};

#[derive(Debug, Deserialize)]
pub struct BadOutput {
    pub stage: String,
    pub output: Json,
}

pub fn corpus() -> Vec<(String, BadOutput)> {
    let dir = super::fixture("agent_outputs");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .expect("corpus directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let text = std::fs::read_to_string(&p).unwrap();
            (name, serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display())))
        })
        .collect()
}

/// The scripted turn that routes a message to the stage under test and
/// answers it with the bad output on every attempt.
pub fn scripted(bad: &BadOutput) -> ScriptedTurn {
    let value = match bad.stage.as_str() {
        "orchestrator" => json!({"orchestrator": bad.output}),
        "filter" => json!({"orchestrator": {"wants_filter": true, "wants_viz": false}, "filter": [bad.output]}),
        "viz" => json!({"orchestrator": {"wants_filter": false, "wants_viz": true}, "viz": [bad.output]}),
        other => panic!("unknown stage {other}"),
    };
    serde_json::from_value(value).expect("scripted turn")
}

/// A session with a chart and a brush already in place.
pub fn busy_session() -> (linkdash::datapackage::Package, SessionState) {
    let pkg = super::penguins_package();
    let spec = parse_spec(
        r#"{"source": [{"alias": "p", "entity": "penguins"}],
            "representation": {"mark": "point", "mapping": [
              {"channel": "x", "field": "bill_length_mm", "field_kind": "quantitative"},
              {"channel": "y", "field": "bill_depth_mm", "field_kind": "quantitative"}]}}"#,
    )
    .unwrap();
    let s = apply_action(&SessionState::new("guard", &pkg), &pkg, Action::CreateViz { spec }, None)
        .unwrap()
        .0;
    (pkg, s)
}

/// Feed one bad output through the pipeline. `Ok` carries the rejection;
/// `Err` says how the guard failed.
pub fn check(bad: &BadOutput) -> Result<AgentError, String> {
    let (pkg, state) = busy_session();
    let before = digest(&state);
    let message = "please do the thing";
    let backend = ScriptedBackend::new([(message.to_owned(), scripted(bad))]);
    let outcome = respond(message, &pkg, &state.registry, &backend, &AgentConfig::default());
    let after = match outcome {
        Ok(output) => {
            // an accepted output must still not get past the session
            return match apply_chat(&state, &pkg, output.into_turn(message), None) {
                Ok(_) => Err("accepted and applied".into()),
                Err(e) => Err(format!("accepted by the agent, rejected only by the session: {e}")),
            };
        }
        Err(e) => (e, digest(&state)),
    };
    if after.1 != before {
        return Err("session changed".into());
    }
    Ok(after.0)
}
