use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datapackage::Package;
use crate::grammar::validate_spec;
use crate::linking::check_selection;

use super::{SessionError, SessionState};

/// Schema version written into every snapshot.
pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema_version: u32,
    pub state: SessionState,
}

impl Snapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }
}

pub fn snapshot(state: &SessionState) -> Snapshot {
    Snapshot {
        schema_version: SNAPSHOT_SCHEMA_VERSION,
        state: state.clone(),
    }
}

/// SHA-256 of the snapshot JSON with the session id blanked.
pub fn digest(state: &SessionState) -> String {
    let mut anonymous = snapshot(state);
    anonymous.state.id.clear();
    hex::encode(Sha256::digest(anonymous.to_json().as_bytes()))
}

/// Rebuild a session from a snapshot document, checking it against the
/// package. Either the whole state comes back or an error does.
pub fn restore(document: &str, package: &Package) -> Result<SessionState, SessionError> {
    let malformed = |m: String| SessionError::Malformed(m);
    let json: serde_json::Value = serde_json::from_str(document).map_err(|e| malformed(e.to_string()))?;
    let found = json
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| malformed("missing schema_version".into()))?;
    if found > u64::from(SNAPSHOT_SCHEMA_VERSION) {
        return Err(SessionError::VersionSkew {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            supported: SNAPSHOT_SCHEMA_VERSION,
        });
    }
    let snap: Snapshot = serde_json::from_value(json).map_err(|e| malformed(e.to_string()))?;
    let state = snap.state;
    if state.package != package.name {
        return Err(malformed(format!(
            "snapshot is for package {}, not {}",
            state.package, package.name
        )));
    }
    for sel in state.registry.iter() {
        check_selection(package, sel).map_err(|e| malformed(format!("selection {}: {e}", sel.name)))?;
    }
    for item in &state.dashboard {
        if let Some(v) = validate_spec(&item.spec, package).first() {
            return Err(malformed(format!("{} at {}: {}", item.viz_id, v.locus, v.reason)));
        }
        if let Some(b) = &item.brush {
            if !state.registry.contains(&b.selection) {
                return Err(malformed(format!("{} brushes unknown selection {}", item.viz_id, b.selection)));
            }
        }
        state
            .table(package, &item.viz_id)
            .map_err(|e| malformed(format!("{}: {e}", item.viz_id)))?;
    }
    Ok(state)
}
