//! Hand-built specs and the brush each must get. The rule being encoded:
//! only source fields count; quantitative fields on x or y give a 1D or
//! 2D interval; failing that, categorical fields on x, y and color
//! together give a point selection.

use linkdash::grammar::parse_spec;
use linkdash::linking::{derive_brush, BrushGeometry};

pub struct Case {
    pub name: &'static str,
    pub spec: &'static str,
    pub expected: Option<BrushGeometry>,
}

fn x(field: &str) -> Option<BrushGeometry> {
    Some(BrushGeometry::XInterval { field: field.into() })
}

fn y(field: &str) -> Option<BrushGeometry> {
    Some(BrushGeometry::YInterval { field: field.into() })
}

fn xy(x_field: &str, y_field: &str) -> Option<BrushGeometry> {
    Some(BrushGeometry::XyInterval {
        x_field: x_field.into(),
        y_field: y_field.into(),
    })
}

fn point(fields: &[&str]) -> Option<BrushGeometry> {
    Some(BrushGeometry::Point {
        fields: fields.iter().map(|f| f.to_string()).collect(),
    })
}

pub fn cases() -> Vec<Case> {
    vec![
        Case {
            name: "quantitative x",
            spec: r#"{"source": [{"alias": "p", "entity": "penguins"}],
                "representation": {"mark": "point", "mapping": [
                  {"channel": "x", "field": "body_mass_g", "field_kind": "quantitative"}]}}"#,
            expected: x("body_mass_g"),
        },
        Case {
            name: "quantitative y",
            spec: r#"{"source": [{"alias": "p", "entity": "penguins"}],
                "representation": {"mark": "point", "mapping": [
                  {"channel": "y", "field": "flipper_length_mm", "field_kind": "quantitative"}]}}"#,
            expected: y("flipper_length_mm"),
        },
        Case {
            name: "quantitative x and y",
            spec: r#"{"source": [{"alias": "p", "entity": "penguins"}],
                "representation": {"mark": "point", "mapping": [
                  {"channel": "x", "field": "bill_length_mm", "field_kind": "quantitative"},
                  {"channel": "y", "field": "bill_depth_mm", "field_kind": "quantitative"}]}}"#,
            expected: xy("bill_length_mm", "bill_depth_mm"),
        },
        Case {
            name: "quantitative x and y win over categorical color",
            spec: r#"{"source": [{"alias": "p", "entity": "penguins"}],
                "representation": {"mark": "point", "mapping": [
                  {"channel": "x", "field": "bill_length_mm", "field_kind": "quantitative"},
                  {"channel": "y", "field": "bill_depth_mm", "field_kind": "quantitative"},
                  {"channel": "color", "field": "species", "field_kind": "nominal"}]}}"#,
            expected: xy("bill_length_mm", "bill_depth_mm"),
        },
        Case {
            name: "cdf line brushes its source axis only",
            spec: r#"{"source": [{"alias": "p", "entity": "penguins"}],
                "transformation": [{"cdf": {"field": "body_mass_g", "out_fraction": "fraction"}}],
                "representation": {"mark": "line", "mapping": [
                  {"channel": "x", "field": "body_mass_g", "field_kind": "quantitative"},
                  {"channel": "y", "field": "fraction", "field_kind": "quantitative"}]}}"#,
            expected: x("body_mass_g"),
        },
        Case {
            name: "categorical x",
            spec: r#"{"source": [{"alias": "p", "entity": "penguins"}],
                "transformation": [{"groupby": {"fields": ["sex"]}}, {"rollup": {"out_field": "count", "op": "count"}}],
                "representation": {"mark": "bar", "mapping": [
                  {"channel": "x", "field": "sex", "field_kind": "nominal"},
                  {"channel": "y", "field": "count", "field_kind": "quantitative"}]}}"#,
            expected: point(&["sex"]),
        },
        Case {
            name: "categorical y",
            spec: r#"{"source": [{"alias": "s", "entity": "samples"}],
                "transformation": [{"groupby": {"fields": ["organ"]}}, {"rollup": {"out_field": "count", "op": "count"}}],
                "representation": {"mark": "bar", "mapping": [
                  {"channel": "y", "field": "organ", "field_kind": "nominal"},
                  {"channel": "x", "field": "count", "field_kind": "quantitative"}]}}"#,
            expected: point(&["organ"]),
        },
        Case {
            name: "categorical color",
            spec: r#"{"source": [{"alias": "p", "entity": "penguins"}],
                "transformation": [{"groupby": {"fields": ["species"]}}, {"rollup": {"out_field": "n", "op": "count"}}],
                "representation": {"mark": "bar", "mapping": [
                  {"channel": "x", "field": "n", "field_kind": "quantitative", "options": {"stack": "stacked"}},
                  {"channel": "color", "field": "species", "field_kind": "nominal"}]}}"#,
            expected: point(&["species"]),
        },
        Case {
            name: "categorical x and color",
            spec: r#"{"source": [{"alias": "p", "entity": "penguins"}],
                "transformation": [{"groupby": {"fields": ["island", "species"]}}, {"rollup": {"out_field": "n", "op": "count"}}],
                "representation": {"mark": "bar", "mapping": [
                  {"channel": "x", "field": "island", "field_kind": "nominal"},
                  {"channel": "y", "field": "n", "field_kind": "quantitative", "options": {"stack": "stacked"}},
                  {"channel": "color", "field": "species", "field_kind": "nominal"}]}}"#,
            expected: point(&["island", "species"]),
        },
        Case {
            name: "derived fields only",
            spec: r#"{"source": [{"alias": "p", "entity": "penguins"}],
                "transformation": [{"rollup": {"out_field": "mean_mass", "op": "mean", "in_field": "body_mass_g"}}],
                "representation": {"mark": "bar", "mapping": [
                  {"channel": "y", "field": "mean_mass", "field_kind": "quantitative"}]}}"#,
            expected: None,
        },
        Case {
            name: "explicit row mark",
            spec: r#"{"source": [{"alias": "p", "entity": "penguins"}],
                "representation": {"mark": "row"}}"#,
            expected: None,
        },
        Case {
            name: "default table",
            spec: r#"{"source": [{"alias": "p", "entity": "penguins"}]}"#,
            expected: None,
        },
    ]
}

/// Names of the cases whose derived brush differs from the expectation.
pub fn mismatches() -> Vec<String> {
    cases()
        .into_iter()
        .filter_map(|c| {
            let spec = parse_spec(c.spec).unwrap_or_else(|e| panic!("{}: {e}", c.name));
            let got = derive_brush(&spec);
            (got != c.expected).then(|| format!("{}: got {got:?}, expected {:?}", c.name, c.expected))
        })
        .collect()
}
