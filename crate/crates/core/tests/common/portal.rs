//! Synthetic donors/samples/datasets packages and a brute-force oracle
//! for linked filtering over them.

use std::collections::{BTreeMap, BTreeSet};

use linkdash::dataflow::execute;
use linkdash::datapackage::Package;
use linkdash::grammar::{Bounds, LinkMode, VizSpec};
use linkdash::linking::{entity_counts, inject_filters, Selection, SelectionPayload, SelectionRegistry};
use linkdash::value::Value;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ORGANS: [&str; 5] = ["Heart", "Lung", "Liver", "Kidney", "Spleen"];
pub const CONDITIONS: [&str; 2] = ["healthy", "disease"];
pub const SEXES: [&str; 2] = ["Female", "Male"];
pub const ASSAYS: [&str; 3] = ["bulk RNA-seq", "scRNA-seq", "ATAC-seq"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Number,
    Category,
}

/// One entity as raw CSV cells; `None` is an empty cell.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub name: &'static str,
    pub key: &'static str,
    pub fields: Vec<(&'static str, Kind)>,
    pub rows: Vec<Vec<Option<String>>>,
}

impl RawTable {
    pub fn col(&self, field: &str) -> usize {
        self.fields.iter().position(|(f, _)| *f == field).expect("field exists")
    }

    fn to_csv(&self) -> String {
        let mut out = self.fields.iter().map(|(f, _)| *f).collect::<Vec<_>>().join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<&str> = row.iter().map(|c| c.as_deref().unwrap_or("")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Fields a random selection may target: everything except keys.
    pub fn filterable(&self) -> Vec<(&'static str, Kind)> {
        self.fields
            .iter()
            .copied()
            .filter(|(f, _)| !f.ends_with("_id"))
            .collect()
    }
}

/// A foreign key `child.fk` referencing `parent.key`.
#[derive(Debug, Clone, Copy)]
pub struct Link {
    pub child: &'static str,
    pub fk: &'static str,
    pub parent: &'static str,
    pub key: &'static str,
}

#[derive(Debug, Clone)]
pub struct RawPortal {
    pub tables: Vec<RawTable>,
    pub links: Vec<Link>,
}

impl RawPortal {
    pub fn table(&self, name: &str) -> &RawTable {
        self.tables.iter().find(|t| t.name == name).expect("table exists")
    }

    pub fn to_package(&self) -> Package {
        let descriptor = serde_json::json!({
            "name": "synthetic-portal",
            "resources": [
                {"name": "donors", "path": "donors.csv", "schema": {
                    "fields": [
                        {"name": "donor_id", "type": "string"},
                        {"name": "age", "type": "integer"},
                        {"name": "sex", "type": "string"},
                        {"name": "weight_kg", "type": "number"}
                    ],
                    "primaryKey": "donor_id"}},
                {"name": "samples", "path": "samples.csv", "schema": {
                    "fields": [
                        {"name": "sample_id", "type": "string"},
                        {"name": "donor_id", "type": "string"},
                        {"name": "organ", "type": "string"},
                        {"name": "condition", "type": "string"}
                    ],
                    "primaryKey": "sample_id",
                    "foreignKeys": [{"fields": "donor_id", "reference": {"resource": "donors", "fields": "donor_id"}}]}},
                {"name": "datasets", "path": "datasets.csv", "schema": {
                    "fields": [
                        {"name": "dataset_id", "type": "string"},
                        {"name": "sample_id", "type": "string"},
                        {"name": "assay_type", "type": "string"},
                        {"name": "size_gb", "type": "number"}
                    ],
                    "primaryKey": "dataset_id",
                    "foreignKeys": [{"fields": "sample_id", "reference": {"resource": "samples", "fields": "sample_id"}}]}}
            ]
        });
        Package::from_descriptor(&descriptor.to_string(), |path| {
            let name = path.trim_end_matches(".csv");
            Ok(self.table(name).to_csv())
        })
        .expect("synthetic package loads")
    }
}

fn maybe<T>(rng: &mut ChaCha8Rng, p_null: f64, v: T) -> Option<T> {
    (!rng.random_bool(p_null)).then_some(v)
}

/// Donors with 0..=4 samples each and samples with 0..=3 datasets each,
/// capped at 500 rows per entity.
pub fn generate(seed: u64) -> RawPortal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_donors = rng.random_range(20..=80);
    let mut donors = Vec::new();
    let mut samples = Vec::new();
    let mut datasets = Vec::new();
    for d in 0..n_donors {
        let donor_id = format!("D{d:03}");
        let age = rng.random_range(0..=90);
        let sex = *SEXES.choose(&mut rng).unwrap();
        let weight = (rng.random_range(300..=1300) as f64) / 10.0;
        donors.push(vec![
            Some(donor_id.clone()),
            maybe(&mut rng, 0.1, age.to_string()),
            maybe(&mut rng, 0.15, sex.to_owned()),
            maybe(&mut rng, 0.1, weight.to_string()),
        ]);
        for _ in 0..rng.random_range(0..=4) {
            if samples.len() >= 500 {
                break;
            }
            let sample_id = format!("S{:04}", samples.len());
            samples.push(vec![
                Some(sample_id.clone()),
                Some(donor_id.clone()),
                Some(ORGANS.choose(&mut rng).unwrap().to_string()),
                Some(CONDITIONS.choose(&mut rng).unwrap().to_string()),
            ]);
            for _ in 0..rng.random_range(0..=3) {
                if datasets.len() >= 500 {
                    break;
                }
                let size = (rng.random_range(1..=50_000) as f64) / 100.0;
                datasets.push(vec![
                    Some(format!("F{:04}", datasets.len())),
                    Some(sample_id.clone()),
                    Some(ASSAYS.choose(&mut rng).unwrap().to_string()),
                    maybe(&mut rng, 0.05, size.to_string()),
                ]);
            }
        }
    }
    RawPortal {
        tables: vec![
            RawTable {
                name: "donors",
                key: "donor_id",
                fields: vec![
                    ("donor_id", Kind::Category),
                    ("age", Kind::Number),
                    ("sex", Kind::Category),
                    ("weight_kg", Kind::Number),
                ],
                rows: donors,
            },
            RawTable {
                name: "samples",
                key: "sample_id",
                fields: vec![
                    ("sample_id", Kind::Category),
                    ("donor_id", Kind::Category),
                    ("organ", Kind::Category),
                    ("condition", Kind::Category),
                ],
                rows: samples,
            },
            RawTable {
                name: "datasets",
                key: "dataset_id",
                fields: vec![
                    ("dataset_id", Kind::Category),
                    ("sample_id", Kind::Category),
                    ("assay_type", Kind::Category),
                    ("size_gb", Kind::Number),
                ],
                rows: datasets,
            },
        ],
        links: vec![
            Link {
                child: "samples",
                fk: "donor_id",
                parent: "donors",
                key: "donor_id",
            },
            Link {
                child: "datasets",
                fk: "sample_id",
                parent: "samples",
                key: "sample_id",
            },
        ],
    }
}

/// A selection in oracle terms.
#[derive(Debug, Clone)]
pub enum OraclePayload {
    Interval(Vec<(Option<f64>, Option<f64>)>),
    Point(BTreeSet<Vec<Option<String>>>),
}

#[derive(Debug, Clone)]
pub struct OracleSelection {
    pub name: String,
    pub entity: &'static str,
    pub fields: Vec<&'static str>,
    pub payload: OraclePayload,
    pub mode: LinkMode,
}

impl OracleSelection {
    pub fn to_selection(&self) -> Selection {
        let payload = match &self.payload {
            OraclePayload::Interval(ranges) => {
                SelectionPayload::interval(ranges.iter().map(|&(lo, hi)| Bounds::new(lo, hi)))
            }
            OraclePayload::Point(tuples) => SelectionPayload::point(tuples.iter().map(|t| {
                t.iter()
                    .map(|c| c.as_ref().map_or(Value::Null, Value::text))
                    .collect::<Vec<_>>()
            })),
        };
        Selection {
            name: self.name.clone(),
            entity: self.entity.to_owned(),
            fields: self.fields.iter().map(|f| f.to_string()).collect(),
            payload,
            mode: self.mode,
        }
    }

    fn admits(&self, table: &RawTable, row: &[Option<String>]) -> bool {
        let cells: Vec<&Option<String>> = self.fields.iter().map(|f| &row[table.col(f)]).collect();
        match &self.payload {
            OraclePayload::Interval(ranges) => cells.iter().zip(ranges).all(|(cell, &(lo, hi))| {
                if lo.is_none() && hi.is_none() {
                    return true;
                }
                match cell.as_deref() {
                    None => false,
                    Some(s) => {
                        let v: f64 = s.parse().expect("numeric cell");
                        lo.is_none_or(|lo| v >= lo) && hi.is_none_or(|hi| v <= hi)
                    }
                }
            }),
            OraclePayload::Point(tuples) => {
                let tuple: Vec<Option<String>> = cells.into_iter().cloned().collect();
                tuples.contains(&tuple)
            }
        }
    }
}

fn random_bound(rng: &mut ChaCha8Rng, observed: &[f64]) -> Option<f64> {
    if observed.is_empty() || rng.random_bool(0.15) {
        return None;
    }
    if rng.random_bool(0.5) {
        Some(*observed.choose(rng).unwrap())
    } else {
        let lo = observed.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((rng.random_range(lo..=hi) * 10.0).round() / 10.0)
    }
}

/// A random valid selection on a random entity.
pub fn random_selection(rng: &mut ChaCha8Rng, raw: &RawPortal, name: String) -> OracleSelection {
    let table = raw.tables.choose(rng).unwrap();
    let candidates = table.filterable();
    let (first, kind) = *candidates.choose(rng).unwrap();
    let mut fields = vec![first];
    let same_kind: Vec<_> = candidates.iter().filter(|(f, k)| *k == kind && *f != first).collect();
    if !same_kind.is_empty() && rng.random_bool(0.25) {
        fields.push(same_kind.choose(rng).unwrap().0);
    }
    let payload = match kind {
        Kind::Number => OraclePayload::Interval(
            fields
                .iter()
                .map(|f| {
                    let col = table.col(f);
                    let observed: Vec<f64> = table
                        .rows
                        .iter()
                        .filter_map(|r| r[col].as_deref().map(|s| s.parse().unwrap()))
                        .collect();
                    let (a, b) = (random_bound(rng, &observed), random_bound(rng, &observed));
                    match (a, b) {
                        (Some(a), Some(b)) if a > b => (Some(b), Some(a)),
                        other => other,
                    }
                })
                .collect(),
        ),
        Kind::Category => {
            let cols: Vec<usize> = fields.iter().map(|f| table.col(f)).collect();
            let mut observed: Vec<Vec<Option<String>>> = table
                .rows
                .iter()
                .map(|r| cols.iter().map(|&c| r[c].clone()).collect())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            observed.shuffle(rng);
            let keep = rng.random_range(0..=observed.len());
            OraclePayload::Point(observed.into_iter().take(keep).collect())
        }
    };
    OracleSelection {
        name,
        entity: table.name,
        fields,
        payload,
        mode: LinkMode::Any,
    }
}

/// Primary keys of `entity` rows surviving every applicable selection,
/// by nested loops over the raw rows.
pub fn oracle_survivors(raw: &RawPortal, selections: &[OracleSelection], entity: &str) -> BTreeSet<String> {
    let table = raw.table(entity);
    let key_col = table.col(table.key);
    let mut out = BTreeSet::new();
    'rows: for row in &table.rows {
        for sel in selections {
            let ok = if sel.entity == entity {
                sel.admits(table, row)
            } else if let Some(link) = raw.links.iter().find(|l| {
                (l.child == entity && l.parent == sel.entity) || (l.parent == entity && l.child == sel.entity)
            }) {
                let other = raw.table(sel.entity);
                let (mine, theirs) = if link.child == entity {
                    (table.col(link.fk), other.col(link.key))
                } else {
                    (table.col(link.key), other.col(link.fk))
                };
                let related: Vec<&Vec<Option<String>>> = other
                    .rows
                    .iter()
                    .filter(|o| o[theirs].is_some() && o[theirs] == row[mine])
                    .collect();
                match sel.mode {
                    LinkMode::Any => related.iter().any(|o| sel.admits(other, o)),
                    LinkMode::All => related.iter().all(|o| sel.admits(other, o)),
                }
            } else {
                true
            };
            if !ok {
                continue 'rows;
            }
        }
        out.insert(row[key_col].clone().expect("key present"));
    }
    out
}

/// Run one randomized case in `mode`; `Err` explains the first mismatch.
pub fn check_case(
    raw: &RawPortal,
    package: &Package,
    selections: &[OracleSelection],
    mode: LinkMode,
) -> Result<(), String> {
    let selections: Vec<OracleSelection> = selections
        .iter()
        .cloned()
        .map(|mut s| {
            s.mode = mode;
            s
        })
        .collect();
    let mut registry = SelectionRegistry::default();
    for s in &selections {
        registry = registry
            .create(package, s.to_selection())
            .map_err(|e| format!("{}: {e}", s.name))?;
    }
    let counts = entity_counts(package, &registry);
    for table in &raw.tables {
        let expected = oracle_survivors(raw, &selections, table.name);
        let spec = inject_filters(&VizSpec::table("t", table.name), &registry, package);
        let result = execute(&spec, package, &registry).map_err(|e| e.to_string())?;
        let keys: BTreeSet<String> = result
            .provenance
            .as_ref()
            .ok_or("row table without provenance")?
            .iter()
            .map(|k| k[0].as_str().expect("text key").to_owned())
            .collect();
        if keys != expected {
            return Err(format!(
                "{mode:?} {}: execute kept {} rows, oracle {} ({selections:?})",
                table.name,
                keys.len(),
                expected.len()
            ));
        }
        if counts[table.name] != expected.len() {
            return Err(format!(
                "{mode:?} {}: entity_counts {} vs oracle {}",
                table.name,
                counts[table.name],
                expected.len()
            ));
        }
    }
    Ok(())
}

/// Summary of a randomized oracle run.
#[derive(Debug, Default)]
pub struct SuiteReport {
    pub cases: usize,
    pub checks: usize,
    pub failures: Vec<String>,
    pub by_entity: BTreeMap<&'static str, usize>,
}

/// `cases` randomized registries of 1..=3 selections, each checked in
/// both link modes. Packages are regenerated every 20 cases.
pub fn cross_entity_suite(seed: u64, cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::default();
    let mut current: Option<(RawPortal, Package)> = None;
    for case in 0..cases {
        if case % 20 == 0 {
            let raw = generate(rng.random());
            let package = raw.to_package();
            current = Some((raw, package));
        }
        let (raw, package) = current.as_ref().expect("package generated");
        let n = rng.random_range(1..=3);
        let selections: Vec<OracleSelection> = (0..n)
            .map(|i| random_selection(&mut rng, raw, format!("s{i}")))
            .collect();
        for s in &selections {
            *report.by_entity.entry(s.entity).or_default() += 1;
        }
        report.cases += 1;
        for mode in [LinkMode::Any, LinkMode::All] {
            report.checks += 1;
            if let Err(e) = check_case(raw, package, &selections, mode) {
                report.failures.push(format!("case {case}: {e}"));
            }
        }
    }
    report
}
