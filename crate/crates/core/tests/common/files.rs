//! A large file table with heavy-tailed sizes, and the "largest files"
//! workflow: filter to the single largest file, then widen the interval
//! down to the k-th largest.

use std::collections::HashSet;
use std::path::Path;

use linkdash::agents::AgentConfig;
use linkdash::service::{load_transcript, replay};
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Pareto;
use serde_json::json;

pub const ROWS: usize = 10_000;
/// Keeps every partial sum below 2^53 so float sums are exact.
const MAX_SIZE: u64 = 500_000_000_000;
const FILE_TYPES: [&str; 5] = ["fastq", "bam", "pairs", "hic", "mcool"];

/// Distinct Pareto-distributed integer sizes.
pub fn sizes(seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pareto = Pareto::new(100_000.0, 1.1).unwrap();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(ROWS);
    while out.len() < ROWS {
        let size = (pareto.sample(&mut rng) as u64).min(MAX_SIZE);
        if seen.insert(size) {
            out.push(size);
        }
    }
    out
}

/// Writes the package and a transcript for `k` into `dir`; returns the
/// transcript path.
pub fn write_workflow(dir: &Path, seed: u64, k: usize) -> std::path::PathBuf {
    let sizes = sizes(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut csv = String::from("file_id,file_type,size\n");
    for (i, s) in sizes.iter().enumerate() {
        csv.push_str(&format!("F{i:05},{},{s}\n", FILE_TYPES.choose(&mut rng).unwrap()));
    }
    std::fs::write(dir.join("files.csv"), csv).unwrap();
    let descriptor = json!({
        "name": "file-portal",
        "resources": [{"name": "files", "path": "files.csv", "schema": {
            "fields": [
                {"name": "file_id", "type": "string"},
                {"name": "file_type", "type": "string", "description": "File format."},
                {"name": "size", "type": "integer", "description": "File size in bytes."}
            ],
            "primaryKey": "file_id"}}]
    });
    std::fs::write(dir.join("datapackage.json"), descriptor.to_string()).unwrap();

    let largest = *sizes.iter().max().unwrap();
    let kth = kth_largest(&sizes, k);
    let transcript = json!({
        "version": 1,
        "package": "datapackage.json",
        "steps": [
            {"chat": {"text": "What is the total size of the files?", "scripted": {
                "orchestrator": {"wants_filter": false, "wants_viz": true},
                "viz": {"source": [{"alias": "f", "entity": "files"}],
                        "transformation": [{"rollup": {"out_field": "total_size", "op": "sum", "in_field": "size"}}],
                        "representation": {"mark": "bar", "mapping": [
                            {"channel": "y", "field": "total_size", "field_kind": "quantitative"}]}}}}},
            {"chat": {"text": "Filter to the largest file", "scripted": {
                "orchestrator": {"wants_filter": true, "wants_viz": false},
                "filter": {"filters": [{"entity": "files", "field": "size", "kind": "interval", "min": largest}]}}}},
            {"action": {"type": "adjust_filter", "name": "f1",
                        "payload": {"kind": "interval", "ranges": [{"min": kth, "max": null}]}}}
        ]
    });
    let path = dir.join("transcript.json");
    std::fs::write(&path, serde_json::to_string_pretty(&transcript).unwrap()).unwrap();
    path
}

pub fn kth_largest(sizes: &[u64], k: usize) -> u64 {
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    sorted[k - 1]
}

pub fn top_k_sum(sizes: &[u64], k: usize) -> u64 {
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    sorted[..k].iter().sum()
}

#[derive(Debug)]
pub struct TopK {
    pub k: usize,
    pub count_after_largest: usize,
    pub count: usize,
    pub chart_sum: f64,
    pub oracle_sum: u64,
    pub oracle_total: u64,
    pub deterministic: bool,
}

impl TopK {
    pub fn share(&self) -> f64 {
        self.chart_sum / self.oracle_total as f64
    }

    pub fn passed(&self) -> bool {
        self.count_after_largest == 1
            && self.count == self.k
            && self.chart_sum == self.oracle_sum as f64
            && self.share() == self.oracle_sum as f64 / self.oracle_total as f64
            && self.deterministic
    }
}

pub fn run(seed: u64, k: usize) -> TopK {
    let dir = tempfile::tempdir().unwrap();
    let path = write_workflow(dir.path(), seed, k);
    let loaded = load_transcript(&path).expect("workflow loads");
    let first = replay(&loaded, &AgentConfig::default()).expect("workflow replays");
    let second = replay(&loaded, &AgentConfig::default()).expect("workflow replays");
    let table = first.state.table(&loaded.package, "v1").unwrap();
    let chart_sum = table.column("total_size").unwrap()[0].as_f64().unwrap();
    let sizes = sizes(seed);
    TopK {
        k,
        count_after_largest: first.steps[1].counts["files"],
        count: first.steps[2].counts["files"],
        chart_sum,
        oracle_sum: top_k_sum(&sizes, k),
        oracle_total: sizes.iter().sum(),
        deterministic: first.digest == second.digest,
    }
}
