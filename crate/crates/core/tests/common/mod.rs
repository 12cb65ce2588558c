//! Shared fixtures and oracles for the integration suites and the
//! acceptance runner. Oracles here read raw CSV text and loop over rows;
//! they never call into the library's filtering code.

#![allow(dead_code)]

pub mod brush_table;
pub mod files;
pub mod guardrails;
pub mod penguins;
pub mod portal;
pub mod properties;

use std::path::PathBuf;

use linkdash::datapackage::{load_package, Package};

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(rel: &str) -> PathBuf {
    manifest_dir().join("fixtures").join(rel)
}

pub fn penguins_package() -> Package {
    load_package(manifest_dir().join("data/penguins/datapackage.json")).expect("penguins package loads")
}

pub fn portal_package() -> Package {
    load_package(manifest_dir().join("data/portal/datapackage.json")).expect("portal package loads")
}

pub fn package_named(name: &str) -> Package {
    match name {
        "penguins" => penguins_package(),
        "portal" => portal_package(),
        other => panic!("no bundled package {other}"),
    }
}

/// Outcome of one acceptance check.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn pass(detail: impl Into<String>) -> Self {
        Outcome {
            passed: true,
            detail: detail.into(),
        }
    }

    pub fn fail(detail: impl Into<String>) -> Self {
        Outcome {
            passed: false,
            detail: detail.into(),
        }
    }

    pub fn check(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}
