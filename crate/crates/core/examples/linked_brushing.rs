//! Brushing a scatterplot filters every other chart, adds a filter widget
//! that mirrors the brush, and leaves the brushed chart itself intact.

use linkdash::datapackage::load_package;
use linkdash::grammar::{parse_spec, Bounds};
use linkdash::linking::SelectionPayload;
use linkdash::session::{apply_action, render, Action, FilterChange, SessionState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let package = load_package(concat!(env!("CARGO_MANIFEST_DIR"), "/data/penguins/datapackage.json"))?;
    let scatter = parse_spec(
        r#"{"source": [{"alias": "p", "entity": "penguins"}],
            "representation": {"mark": "point", "mapping": [
              {"channel": "x", "field": "bill_length_mm", "field_kind": "quantitative"},
              {"channel": "y", "field": "bill_depth_mm", "field_kind": "quantitative"}]}}"#,
    )?;
    let sex_bar = parse_spec(
        r#"{"source": [{"alias": "p", "entity": "penguins"}],
            "transformation": [{"groupby": {"fields": ["sex"]}}, {"rollup": {"out_field": "count", "op": "count"}}],
            "representation": {"mark": "bar", "mapping": [
              {"channel": "x", "field": "sex", "field_kind": "nominal"},
              {"channel": "y", "field": "count", "field_kind": "quantitative"}]}}"#,
    )?;

    let mut state = SessionState::new("demo", &package);
    for spec in [scatter, sex_bar] {
        state = apply_action(&state, &package, Action::CreateViz { spec }, Some(state.version))?.0;
    }
    let brush = state.dashboard[0].brush.clone().expect("scatter is brushable");
    println!("v1 brush: {:?} on selection {}", brush.geometry, brush.selection);

    let bars = |s: &SessionState| s.table(&package, "v2").map(|t| t.rows);
    println!("sex bar before: {:?}", bars(&state)?);

    let payload = SelectionPayload::interval([
        Bounds::new(Some(40.0), Some(48.0)),
        Bounds::new(Some(16.0), Some(19.0)),
    ]);
    let (brushed, events) = apply_action(
        &state,
        &package,
        Action::Brush {
            viz_id: "v1".into(),
            payload: Some(payload.clone()),
        },
        Some(state.version),
    )?;
    println!("events: {events:?}");
    println!("sex bar after:  {:?}", bars(&brushed)?);
    println!("scatter rows unchanged: {}", brushed.table(&package, "v1")? == state.table(&package, "v1")?);

    // editing the widget is the same operation as dragging the brush
    let (widget_edit, _) = apply_action(
        &state,
        &package,
        Action::AdjustFilter {
            name: brush.selection.clone(),
            change: FilterChange::Payload { payload },
        },
        Some(state.version),
    )?;
    println!("widget edit == brush: {}", widget_edit == brushed);

    let view = render(&brushed, &package)?;
    for chip in &view.filters {
        println!("filter chip {}: {}", chip.name, chip.summary);
    }
    println!("counts {:?}", view.counts);
    Ok(())
}
