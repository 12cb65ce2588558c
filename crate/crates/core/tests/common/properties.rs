//! Filter-algebra properties, written against `proptest`'s runner so the
//! same checks serve both the test suite and the acceptance runner.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use linkdash::dataflow::{execute, ResultTable};
use linkdash::datapackage::Package;
use linkdash::grammar::{parse_spec, Bounds, LinkMode, VizSpec};
use linkdash::linking::{entity_counts, inject_filters, SelectionPayload, SelectionRegistry};
use linkdash::session::{apply_action, digest, snapshot, Action, FilterChange, SessionState};
use linkdash::value::Value;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::portal::{generate, random_selection, OracleSelection, RawPortal};

pub const CASES: u32 = 1000;

/// Run `test` over `cases` inputs from a fixed-seed runner.
pub fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<u32, String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map(|()| cases).map_err(|e| e.to_string())
}

struct World {
    raw: RawPortal,
    package: Package,
}

fn worlds() -> &'static [World] {
    static WORLDS: OnceLock<Vec<World>> = OnceLock::new();
    WORLDS.get_or_init(|| {
        (0..4)
            .map(|seed| {
                let raw = generate(1000 + seed);
                let package = raw.to_package();
                World { raw, package }
            })
            .collect()
    })
}

fn selections(world: &World, seed: u64, n: usize) -> Vec<OracleSelection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut s = random_selection(&mut rng, &world.raw, format!("s{i}"));
            s.mode = if rng.random_bool(0.5) { LinkMode::All } else { LinkMode::Any };
            s
        })
        .collect()
}

fn registry(package: &Package, selections: &[OracleSelection]) -> SelectionRegistry {
    selections.iter().fold(SelectionRegistry::default(), |r, s| {
        r.create(package, s.to_selection()).expect("generated selection is valid")
    })
}

/// A row table and a grouped count per entity.
fn probe_specs(package: &Package) -> Vec<VizSpec> {
    let grouped = [("donors", "sex"), ("samples", "organ"), ("datasets", "assay_type")];
    let mut specs: Vec<VizSpec> = package.entities.iter().map(|e| VizSpec::table("t", &e.name)).collect();
    for (entity, field) in grouped {
        specs.push(
            parse_spec(&format!(
                r#"{{"source": [{{"alias": "t", "entity": "{entity}"}}],
                    "transformation": [{{"groupby": {{"fields": ["{field}"]}}}}, {{"rollup": {{"out_field": "n", "op": "count"}}}}]}}"#
            ))
            .expect("probe spec parses"),
        );
    }
    specs
}

fn tables(package: &Package, registry: &SelectionRegistry) -> Vec<ResultTable> {
    probe_specs(package)
        .iter()
        .map(|s| execute(&inject_filters(s, registry, package), package, registry).expect("probe executes"))
        .collect()
}

fn world_case() -> impl Strategy<Value = (usize, u64, usize)> {
    (0..4usize, any::<u64>(), 0..=4usize)
}

/// Adding a selection never raises any entity count.
pub fn monotonicity(cases: u32) -> Result<u32, String> {
    run(cases, world_case(), |(w, seed, n)| {
        let world = &worlds()[w];
        let all = selections(world, seed, n + 1);
        let before = entity_counts(&world.package, &registry(&world.package, &all[..n]));
        let after = entity_counts(&world.package, &registry(&world.package, &all));
        for (entity, count) in &after {
            prop_assert!(*count <= before[entity], "{entity}: {} -> {count}", before[entity]);
        }
        Ok(())
    })
}

/// Renaming selections, which reorders the injected filters, never
/// changes a result.
pub fn order_independence(cases: u32) -> Result<u32, String> {
    let strategy = world_case().prop_flat_map(|(w, seed, n)| {
        let perm = Just((0..n).collect::<Vec<_>>()).prop_shuffle();
        (Just(w), Just(seed), perm)
    });
    run(cases, strategy, |(w, seed, perm)| {
        let world = &worlds()[w];
        let original = selections(world, seed, perm.len());
        let renamed: Vec<OracleSelection> = original
            .iter()
            .zip(&perm)
            .map(|(s, &p)| OracleSelection {
                name: format!("s{p}"),
                ..s.clone()
            })
            .collect();
        let a = registry(&world.package, &original);
        let b = registry(&world.package, &renamed);
        prop_assert_eq!(entity_counts(&world.package, &a), entity_counts(&world.package, &b));
        prop_assert_eq!(tables(&world.package, &a), tables(&world.package, &b));
        Ok(())
    })
}

/// Injecting twice is injecting once, and re-injecting against another
/// registry gives the same data as injecting into the clean spec.
pub fn injection_idempotence(cases: u32) -> Result<u32, String> {
    run(cases, (world_case(), any::<u64>(), 0..=4usize), |((w, seed, n), seed2, m)| {
        let world = &worlds()[w];
        let pkg = &world.package;
        let r1 = registry(pkg, &selections(world, seed, n));
        let r2 = registry(pkg, &selections(world, seed2, m));
        for spec in probe_specs(pkg) {
            let once = inject_filters(&spec, &r1, pkg);
            prop_assert_eq!(&inject_filters(&once, &r1, pkg), &once);
            let rebased = inject_filters(&once, &r2, pkg);
            prop_assert_eq!(&inject_filters(&rebased, &r2, pkg), &rebased);
            let clean = inject_filters(&spec, &r2, pkg);
            prop_assert_eq!(execute(&rebased, pkg, &r2).unwrap(), execute(&clean, pkg, &r2).unwrap());
        }
        Ok(())
    })
}

fn penguins() -> &'static Package {
    static PKG: OnceLock<Package> = OnceLock::new();
    PKG.get_or_init(super::penguins_package)
}

const SCATTER: &str = r#"{"source": [{"alias": "p", "entity": "penguins"}],
    "representation": {"mark": "point", "mapping": [
      {"channel": "x", "field": "bill_length_mm", "field_kind": "quantitative"},
      {"channel": "y", "field": "bill_depth_mm", "field_kind": "quantitative"}]}}"#;
const SEX_BAR: &str = r#"{"source": [{"alias": "p", "entity": "penguins"}],
    "transformation": [{"groupby": {"fields": ["sex"]}}, {"rollup": {"out_field": "n", "op": "count"}}],
    "representation": {"mark": "bar", "mapping": [
      {"channel": "x", "field": "sex", "field_kind": "nominal"},
      {"channel": "y", "field": "n", "field_kind": "quantitative"}]}}"#;
const ISLAND_BAR: &str = r#"{"source": [{"alias": "p", "entity": "penguins"}],
    "transformation": [{"groupby": {"fields": ["island", "species"]}}, {"rollup": {"out_field": "n", "op": "count"}}],
    "representation": {"mark": "bar", "mapping": [
      {"channel": "x", "field": "island", "field_kind": "nominal"},
      {"channel": "y", "field": "n", "field_kind": "quantitative"},
      {"channel": "color", "field": "species", "field_kind": "nominal"}]}}"#;

/// A dashboard of a scatter (v1, 2D brush), a sex bar (v2, point brush)
/// and an island-by-species bar (v3, point brush over two fields).
fn dashboard() -> &'static SessionState {
    static STATE: OnceLock<SessionState> = OnceLock::new();
    STATE.get_or_init(|| {
        let pkg = penguins();
        [SCATTER, SEX_BAR, ISLAND_BAR]
            .iter()
            .fold(SessionState::new("prop", pkg), |s, spec| {
                let spec = parse_spec(spec).unwrap();
                apply_action(&s, pkg, Action::CreateViz { spec }, None).unwrap().0
            })
    })
}

fn bound() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![1 => Just(None), 6 => (10.0..70.0f64).prop_map(|v| Some((v * 10.0).round() / 10.0))]
}

fn interval() -> impl Strategy<Value = SelectionPayload> {
    (bound(), bound(), bound(), bound()).prop_map(|(a, b, c, d)| {
        let order = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
            (Some(l), Some(h)) if l > h => Bounds::new(Some(h), Some(l)),
            _ => Bounds::new(lo, hi),
        };
        SelectionPayload::interval([order(a, b), order(c, d)])
    })
}

fn sex_points() -> impl Strategy<Value = SelectionPayload> {
    proptest::sample::subsequence(vec![Value::text("female"), Value::text("male"), Value::Null], 0..=3)
        .prop_map(|vs| SelectionPayload::point(vs.into_iter().map(|v| [v])))
}

fn island_species_points() -> impl Strategy<Value = SelectionPayload> {
    let pairs: Vec<[Value; 2]> = [
        ("Biscoe", "Adelie"),
        ("Biscoe", "Gentoo"),
        ("Dream", "Adelie"),
        ("Dream", "Chinstrap"),
        ("Torgersen", "Adelie"),
    ]
    .iter()
    .map(|(i, s)| [Value::text(*i), Value::text(*s)])
    .collect();
    proptest::sample::subsequence(pairs, 0..=5).prop_map(SelectionPayload::point)
}

/// (viz id, payload) for any of the three brushes.
fn brush() -> impl Strategy<Value = (String, SelectionPayload)> {
    prop_oneof![
        interval().prop_map(|p| ("v1".to_owned(), p)),
        sex_points().prop_map(|p| ("v2".to_owned(), p)),
        island_species_points().prop_map(|p| ("v3".to_owned(), p)),
    ]
}

/// Brushing and editing the mirrored widget leave identical snapshots.
pub fn mirror_invariance(cases: u32) -> Result<u32, String> {
    run(cases, (brush(), proptest::option::of(brush())), |((viz, payload), earlier)| {
        let pkg = penguins();
        let mut start = dashboard().clone();
        if let Some((v, p)) = earlier {
            let action = Action::Brush {
                viz_id: v,
                payload: Some(p),
            };
            start = apply_action(&start, pkg, action, None).unwrap().0;
        }
        let by_brush = apply_action(
            &start,
            pkg,
            Action::Brush {
                viz_id: viz.clone(),
                payload: Some(payload.clone()),
            },
            None,
        )
        .unwrap()
        .0;
        let by_widget = apply_action(
            &start,
            pkg,
            Action::AdjustFilter {
                name: format!("brush_{viz}"),
                change: FilterChange::Payload { payload },
            },
            None,
        )
        .unwrap()
        .0;
        prop_assert_eq!(snapshot(&by_brush).to_json(), snapshot(&by_widget).to_json());
        prop_assert_eq!(digest(&by_brush), digest(&by_widget));
        Ok(())
    })
}

/// A chart's own table ignores its own brush.
pub fn self_exclusion(cases: u32) -> Result<u32, String> {
    run(cases, (brush(), proptest::option::of(brush())), |((viz, payload), other)| {
        let pkg = penguins();
        let mut start = dashboard().clone();
        if let Some((v, p)) = other.filter(|(v, _)| *v != viz) {
            start = apply_action(&start, pkg, Action::Brush { viz_id: v, payload: Some(p) }, None).unwrap().0;
        }
        let before = start.table(pkg, &viz).unwrap();
        let after = apply_action(
            &start,
            pkg,
            Action::Brush {
                viz_id: viz.clone(),
                payload: Some(payload),
            },
            None,
        )
        .unwrap()
        .0;
        prop_assert_eq!(after.table(pkg, &viz).unwrap(), before);
        Ok(())
    })
}

/// Every property, by name.
pub fn all(cases: u32) -> BTreeMap<&'static str, Result<u32, String>> {
    BTreeMap::from([
        ("monotonicity", monotonicity(cases)),
        ("order independence", order_independence(cases)),
        ("injection idempotence", injection_idempotence(cases)),
        ("mirror invariance", mirror_invariance(cases)),
        ("self-exclusion", self_exclusion(cases)),
    ])
}
