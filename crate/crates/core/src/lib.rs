//! Conversational dashboards over multi-entity data packages.
//!
//! A chat message goes through an agent pipeline ([`agents`]) that yields
//! filters and declarative chart specs ([`grammar`]). Specs run against a
//! loaded data package ([`datapackage`], [`dataflow`]) and are linked
//! through named selections ([`linking`]). A [`session`] holds the
//! conversation and dashboard; [`service`] puts it behind HTTP.

pub mod agents;
pub mod dataflow;
pub mod datapackage;
pub mod grammar;
pub mod linking;
pub mod service;
pub mod session;
pub mod value;
