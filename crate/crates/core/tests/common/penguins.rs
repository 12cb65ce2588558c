//! Checks for the penguins transcript against a plain CSV tally.

use std::time::Duration;

use linkdash::agents::AgentConfig;
use linkdash::service::{load_transcript, replay, ReplayReport, Step};
use linkdash::session::download;

/// The user prompts of the penguins scenario, in order.
pub const PROMPTS: [&str; 8] = [
    "Can you show me a table of all the penguin metadata?",
    "How many are there for each sex?",
    "Can you show me CDF of body mass?",
    "Can you split that cdf by species?",
    "Can you remove Gentoo?",
    "Can you show the distribution of bill length and depth?",
    "Color that by species.",
    "How many penguins are on each island, for each species?",
];

pub fn transcript_path() -> std::path::PathBuf {
    super::fixture("transcripts/penguins.json")
}

/// Column `name` of the penguins CSV, split by hand.
pub fn csv_column(name: &str) -> Vec<String> {
    let text = std::fs::read_to_string(super::manifest_dir().join("data/penguins/penguins.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().to_owned()).collect()
}

pub fn tally(column: &str, value: &str) -> usize {
    csv_column(column).iter().filter(|v| *v == value).count()
}

pub struct PenguinRun {
    pub report: ReplayReport,
    pub chat_texts: Vec<String>,
    pub download_rows: usize,
}

pub fn run() -> PenguinRun {
    let loaded = load_transcript(transcript_path()).expect("transcript loads");
    let report = replay(&loaded, &AgentConfig::default()).expect("transcript replays");
    let chat_texts = loaded
        .transcript
        .steps
        .iter()
        .filter_map(|s| match s {
            Step::Chat { chat } => Some(chat.text.clone()),
            Step::Action { .. } => None,
        })
        .collect();
    let csv = download(&report.state, &loaded.package, "penguins").unwrap();
    let download_rows = String::from_utf8(csv).unwrap().lines().count() - 1;
    PenguinRun {
        report,
        chat_texts,
        download_rows,
    }
}

/// Each failed condition, or nothing.
pub fn problems() -> Vec<String> {
    let mut out = Vec::new();
    let first = run();
    let second = run();
    if first.chat_texts != PROMPTS {
        out.push(format!("scripted prompts differ from the scenario: {:?}", first.chat_texts));
    }
    let total = csv_column("species").len();
    let gentoo = tally("species", "Gentoo");
    let after_gentoo = first
        .report
        .steps
        .iter()
        .find(|s| s.label.contains("remove Gentoo"))
        .map(|s| s.counts["penguins"]);
    if after_gentoo != Some(total - gentoo) {
        out.push(format!("after removing Gentoo: {after_gentoo:?}, tally says {}", total - gentoo));
    }
    let status = first.report.state.counts(&super::penguins_package())["penguins"];
    if first.download_rows != status {
        out.push(format!("download has {} rows, status shows {status}", first.download_rows));
    }
    let slowest = first.report.elapsed.max(second.report.elapsed);
    if slowest >= Duration::from_secs(5) {
        out.push(format!("replay took {slowest:?}"));
    }
    if first.report.snapshot.to_json() != second.report.snapshot.to_json() {
        out.push("two replays produced different snapshots".into());
    }
    out
}
