//! Record types of the inter-stage files and per-line schema validation.

use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use anyhow::Result;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use editsum_core::curator::{AnnotatedEdit, DatasetSample, RejectEntry};
use editsum_core::diffcore::{SentenceDiff, SerializedInput};
use editsum_core::ingest::{EditRecord, IngestedEdit};
use editsum_core::promptgen::JobFailure;
use editsum_core::rankstats::{Ballot, CodedItem, ErrorLabel, Outcome, WhatCategory, WhyCategory};

use crate::error::Invalid;
use crate::jsonl;

/// Output of the `diff` stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffRecord {
    pub edit: EditRecord,
    pub diff: SentenceDiff,
    /// Absent when the diff is empty or cannot be serialized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<SerializedInput>,
}

/// A candidate summary and its reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorePair {
    #[serde(default)]
    pub id: Option<String>,
    pub candidate: String,
    pub reference: String,
}

/// A ranking with ties, best tier first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankingRecord {
    pub sample_id: String,
    #[serde(default)]
    pub annotator_id: String,
    pub tiers: Vec<Vec<String>>,
}

impl RankingRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.tiers.len() < 2 || self.tiers.iter().any(Vec::is_empty) {
            return Err(format!("ranking {} needs at least two non-empty tiers", self.sample_id));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.tiers.iter().flatten().find(|m| !seen.insert(m.as_str())) {
            return Err(format!("ranking {} lists {dup:?} twice", self.sample_id));
        }
        Ok(())
    }
}

pub const EDIT: &str = "edit";
pub const DIFF: &str = "diff";
pub const ANNOTATED: &str = "annotated";
pub const REJECT: &str = "reject";
pub const SAMPLE: &str = "sample";
pub const BALLOT: &str = "ballot";
pub const RANKING: &str = "ranking";
pub const CODED_ITEM: &str = "coded_item";
pub const ERROR_LABEL: &str = "error_label";
pub const PAIR: &str = "pair";
pub const FAILURE: &str = "generation_failure";

pub const ALL: [&str; 11] =
    [EDIT, DIFF, ANNOTATED, REJECT, SAMPLE, BALLOT, RANKING, CODED_ITEM, ERROR_LABEL, PAIR, FAILURE];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub line: usize,
    pub message: String,
}

fn check<T: DeserializeOwned>(line: &str, validate: impl Fn(&T) -> Result<(), String>) -> Result<(), String> {
    let record: T = serde_json::from_str(line).map_err(|e| e.to_string())?;
    validate(&record)
}

fn ok<T>(_: &T) -> Result<(), String> {
    Ok(())
}

fn check_line(schema: &str, line: &str) -> Result<(), String> {
    match schema {
        EDIT => check::<IngestedEdit>(line, |r| r.edit.validate()),
        DIFF => check::<DiffRecord>(line, |r| r.edit.validate()),
        ANNOTATED => check::<AnnotatedEdit>(line, |r| r.edit.validate()),
        REJECT => check::<RejectEntry>(line, ok),
        SAMPLE => check::<DatasetSample>(line, DatasetSample::validate),
        BALLOT => check::<Ballot>(line, |b| b.validate().map_err(|e| e.to_string())),
        RANKING => check::<RankingRecord>(line, RankingRecord::validate),
        CODED_ITEM => check::<CodedItem>(line, ok),
        ERROR_LABEL => check::<ErrorLabel>(line, |l| {
            let known = |v: &str, ok: bool| if ok { Ok(()) } else { Err(format!("unknown category {v:?}")) };
            known(&l.outcome, Outcome::from_str(&l.outcome).is_ok())?;
            known(&l.what, WhatCategory::from_str(&l.what).is_ok())?;
            known(&l.why, WhyCategory::from_str(&l.why).is_ok())
        }),
        PAIR => check::<ScorePair>(line, ok),
        FAILURE => check::<JobFailure>(line, ok),
        other => Err(format!("unknown schema {other:?}")),
    }
}

/// Check every line of `path` against `schema`, or against the schema named
/// in the file header when `schema` is `None`.
pub fn validate_schema(path: &Path, schema: Option<&str>) -> Result<Vec<Violation>> {
    let (header, lines) = jsonl::read_lines(path)?;
    let schema = match (schema, &header) {
        (Some(s), _) => s.to_string(),
        (None, Some(h)) => h.schema.clone(),
        (None, None) if lines.is_empty() => return Ok(Vec::new()),
        (None, None) => anyhow::bail!(Invalid(format!("{}: no header; pass --schema", path.display()))),
    };
    if !ALL.contains(&schema.as_str()) {
        anyhow::bail!(Invalid(format!("unknown schema {schema:?}; known: {}", ALL.join(", "))));
    }
    let mut violations = Vec::new();
    if let Some(h) = header.filter(|h| h.schema != schema) {
        violations.push(Violation { line: 1, message: format!("header names schema {:?}", h.schema) });
    }
    for (line, text) in lines {
        if let Err(message) = check_line(&schema, &text) {
            violations.push(Violation { line, message });
        }
    }
    Ok(violations)
}
