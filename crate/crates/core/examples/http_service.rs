//! Run the HTTP API on a local port and drive it like a client would.

use std::sync::Arc;

use linkdash::agents::{AgentConfig, CompletionBackend};
use linkdash::service::{load_transcript, router, AppState};
use serde_json::{json, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let loaded = load_transcript(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/transcripts/penguins.json"))?;
    let backend: Arc<dyn CompletionBackend> = Arc::new(loaded.backend());
    let app = AppState::new(vec![loaded.package], backend, AgentConfig::default(), None)?;

    let runtime = tokio::runtime::Runtime::new()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    runtime.spawn(async move { axum::serve(listener, router(app)).await });

    let client = reqwest::blocking::Client::new();
    let created: Value = client.post(format!("{base}/sessions")).json(&json!({})).send()?.json()?;
    let id = created["id"].as_str().unwrap_or_default();
    println!("session {id}: {}", created["counts"]);

    for text in ["Can you remove Gentoo?", "Can you show the distribution of bill length and depth?"] {
        let reply: Value = client
            .post(format!("{base}/sessions/{id}/chat"))
            .json(&json!({ "text": text }))
            .send()?
            .json()?;
        println!("{text:?} -> v{} {}", reply["version"], reply["state"]["counts"]);
    }

    let brushed: Value = client
        .post(format!("{base}/sessions/{id}/viz/v1/brush"))
        .json(&json!({"version": 2, "payload": {"kind": "interval", "ranges": [{"min": 40, "max": 48}, {"min": 16, "max": 19}]}}))
        .send()?
        .json()?;
    println!("brushed -> {}", brushed["state"]["counts"]);

    let stale = client
        .post(format!("{base}/sessions/{id}/viz/v1/brush"))
        .json(&json!({"version": 2}))
        .send()?;
    println!("stale brush -> {} {}", stale.status(), stale.text()?);

    let csv = client.get(format!("{base}/sessions/{id}/download?entity=penguins")).send()?.text()?;
    println!("download: {} rows", csv.lines().count() - 1);
    Ok(())
}
