//! Corpus engineering and evaluation statistics for edit-summary generation.
//!
//! The pipeline runs `ingest` → `diffcore` → `curator` → `promptgen`, with
//! `metrics` and `rankstats` covering automatic and human evaluation.

pub mod diffcore;
pub mod http;
pub mod curator;
pub mod ingest;
pub mod metrics;
pub mod promptgen;
pub mod rankstats;
