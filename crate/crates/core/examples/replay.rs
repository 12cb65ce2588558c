//! Replay a transcript of chat messages and UI actions.
//!
//! cargo run --example replay [transcript.json]

use linkdash::agents::AgentConfig;
use linkdash::service::{load_transcript, replay};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/transcripts/penguins.json").to_owned()
    });
    let loaded = load_transcript(&path)?;
    let report = replay(&loaded, &AgentConfig::default())?;
    for step in &report.steps {
        println!("{:>2} v{:<2} {:<64} {:?}", step.index, step.version, step.label, step.counts);
    }
    println!("{} charts, digest {}", report.state.dashboard.len(), report.digest);
    println!(
        "matches pinned digest: {}",
        report.digest_matches(loaded.transcript.expected_digest.as_deref())
    );
    Ok(())
}
