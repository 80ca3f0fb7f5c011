//! Skill-versus-chance analytics for online poker and rummy play logs.
//!
//! The pipeline runs from CSV logs ([`ingest`]) to per-player timelines,
//! then to skill variables ([`metrics`]), and finally to the three-test
//! battery and verdict ([`stattests`]). [`simgen`] produces synthetic logs
//! with planted ground truth in the same CSV formats.

pub mod cli;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod report;
pub mod rng;
pub mod simgen;
pub mod stattests;
