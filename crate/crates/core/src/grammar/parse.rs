use std::collections::HashSet;

use serde_json::Value as Json;

use super::{GrammarError, VizSpec, CHANNELS, MARKS, TRANSFORM_KINDS};

/// Parse a spec from JSON text.
pub fn parse_spec(document: &str) -> Result<VizSpec, GrammarError> {
    let json: Json = serde_json::from_str(document).map_err(|e| GrammarError::MalformedDocument {
        locus: "$".to_owned(),
        reason: e.to_string(),
    })?;
    parse_spec_value(&json)
}

/// Parse a spec from an already-decoded JSON value.
///
/// Enumerated vocabulary (transform kinds, marks, channels) is checked
/// first so those mistakes get a precise error; everything else is
/// checked structurally, with unknown keys rejected.
pub fn parse_spec_value(json: &Json) -> Result<VizSpec, GrammarError> {
    let malformed = |locus: &str, reason: &str| GrammarError::MalformedDocument {
        locus: locus.to_owned(),
        reason: reason.to_owned(),
    };
    let obj = json
        .as_object()
        .ok_or_else(|| malformed("$", "spec must be an object"))?;

    if let Some(transforms) = obj.get("transformation").and_then(Json::as_array) {
        for (i, t) in transforms.iter().enumerate() {
            let locus = format!("transformation[{i}]");
            let t = t
                .as_object()
                .ok_or_else(|| malformed(&locus, "transform must be an object"))?;
            if t.len() != 1 {
                return Err(malformed(&locus, "transform must have exactly one kind key"));
            }
            let (kind, _) = t.iter().next().expect("one key");
            if !TRANSFORM_KINDS.contains(&kind.as_str()) {
                return Err(GrammarError::UnknownTransformKind {
                    locus,
                    found: kind.clone(),
                });
            }
        }
    }

    if let Some(rep) = obj.get("representation").and_then(Json::as_object) {
        if let Some(mark) = rep.get("mark").and_then(Json::as_str) {
            if !MARKS.contains(&mark) {
                return Err(GrammarError::UnknownMark {
                    found: mark.to_owned(),
                });
            }
        }
        if let Some(mapping) = rep.get("mapping").and_then(Json::as_array) {
            for (i, enc) in mapping.iter().enumerate() {
                if let Some(channel) = enc.get("channel").and_then(Json::as_str) {
                    if !CHANNELS.contains(&channel) {
                        return Err(GrammarError::UnknownChannel {
                            locus: format!("representation.mapping[{i}]"),
                            found: channel.to_owned(),
                        });
                    }
                }
            }
        }
    }

    let spec: VizSpec = serde_json::from_value(json.clone()).map_err(|e| malformed("$", &e.to_string()))?;

    if spec.source.is_empty() {
        return Err(malformed("source", "at least one source is required"));
    }
    let mut aliases = HashSet::new();
    for s in &spec.source {
        if !aliases.insert(s.alias.as_str()) {
            return Err(GrammarError::DuplicateAlias(s.alias.clone()));
        }
    }
    if let Some(rep) = &spec.representation {
        let mut channels = HashSet::new();
        for enc in &rep.mapping {
            if !channels.insert(enc.channel) {
                return Err(GrammarError::DuplicateChannel(
                    CHANNELS[enc.channel as usize].to_owned(),
                ));
            }
        }
    }
    Ok(spec)
}
