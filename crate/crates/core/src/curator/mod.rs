//! Cleaning rules, quality filters, corpus annotation and deduplication.
//!
//! Records flow through [`apply_cleaning_rules`] (rules i-vi, first violation
//! wins), then [`apply_quality_filters`], then [`dedup_cap`]. Every input record
//! ends up either kept or rejected with exactly one [`RejectReason`].

mod dataset;

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::diffcore::{serialize, token_length, DiffError, SentenceDiff, Tokenizer};
use crate::ingest::EditRecord;

pub use dataset::{
    assemble_dataset, round_half_up, DatasetError, DatasetSample, DatasetSpec, SampleSource, SplitManifest,
    Splits, STANDARD_SYNTHETIC_FRACTIONS,
};

/// Thresholds and pattern lists for cleaning and filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CuratorConfig {
    /// Substrings of MediaWiki-generated summaries (rule ii).
    pub auto_summary_patterns: Vec<String>,
    /// Tool signatures marking semi-automated edits.
    pub semi_automated_signatures: Vec<String>,
    /// Change tags on edits that were later reverted (rule iv).
    pub reverted_tags: Vec<String>,
    /// Change tags on edits that perform a revert (rule v).
    pub revert_tags: Vec<String>,
    pub min_summary_chars: usize,
    pub max_summary_chars: usize,
    pub min_editor_edits: u64,
    pub max_input_tokens: usize,
    pub duplicate_cap: usize,
    pub tokenizer: String,
}

impl Default for CuratorConfig {
    fn default() -> Self {
        let strings = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self {
            auto_summary_patterns: strings(&[
                "Redirected page to",
                "Removed redirect to",
                "Blanked the page",
                "Replaced content with",
                "Created page with",
                "Undid revision",
                "Reverted edits by",
                "Reverted to revision",
                "Changed protection level",
            ]),
            semi_automated_signatures: strings(&[
                "using [[Wikipedia:HotCat",
                "via #suggestededit",
                "([[WP:AES|",
                "AWB",
                "[[WP:TW|TW]]",
                "[[WP:REFILL",
            ]),
            reverted_tags: strings(&["mw-reverted"]),
            revert_tags: strings(&["mw-undo", "mw-rollback", "mw-manual-revert"]),
            min_summary_chars: 5,
            max_summary_chars: 200,
            min_editor_edits: 30,
            max_input_tokens: 1024,
            duplicate_cap: 3,
            tokenizer: "whitespace".to_string(),
        }
    }
}

impl CuratorConfig {
    /// All thresholds must be positive and the length window non-empty.
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("min_summary_chars", self.min_summary_chars as u64),
            ("max_summary_chars", self.max_summary_chars as u64),
            ("min_editor_edits", self.min_editor_edits),
            ("max_input_tokens", self.max_input_tokens as u64),
            ("duplicate_cap", self.duplicate_cap as u64),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(format!("curator.{name} must be positive"));
        }
        if self.min_summary_chars > self.max_summary_chars {
            return Err("curator.min_summary_chars exceeds max_summary_chars".into());
        }
        Ok(())
    }
}

/// Why a record was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Rule (i): no sentence inserted, removed or changed.
    NoSentenceChange,
    /// Rule (ii): MediaWiki-generated summary.
    AutoSummary,
    /// Rule (iii): edit made by a bot.
    Bot,
    /// Rule (iv): edit was later reverted.
    Reverted,
    /// Rule (v): edit performs a revert.
    Revert,
    /// Rule (vi): blank summary after removing the section marker.
    BlankSummary,
    TooShort,
    TooLongSummary,
    LowEditCount,
    /// Serialized input exceeds the token budget.
    TooLong,
    MarkerCollision,
    Duplicate,
}

impl RejectReason {
    pub const ALL: [RejectReason; 12] = [
        Self::NoSentenceChange,
        Self::AutoSummary,
        Self::Bot,
        Self::Reverted,
        Self::Revert,
        Self::BlankSummary,
        Self::TooShort,
        Self::TooLongSummary,
        Self::LowEditCount,
        Self::TooLong,
        Self::MarkerCollision,
        Self::Duplicate,
    ];

    /// Roman-numeral identifier for the six cleaning rules.
    pub fn rule_id(self) -> Option<&'static str> {
        Some(match self {
            Self::NoSentenceChange => "i",
            Self::AutoSummary => "ii",
            Self::Bot => "iii",
            Self::Reverted => "iv",
            Self::Revert => "v",
            Self::BlankSummary => "vi",
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NoSentenceChange => "no_sentence_change",
            Self::AutoSummary => "auto_summary",
            Self::Bot => "bot",
            Self::Reverted => "reverted",
            Self::Revert => "revert",
            Self::BlankSummary => "blank_summary",
            Self::TooShort => "too_short",
            Self::TooLongSummary => "too_long_summary",
            Self::LowEditCount => "low_edit_count",
            Self::TooLong => "too_long",
            Self::MarkerCollision => "marker_collision",
            Self::Duplicate => "duplicate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Reject(RejectReason),
}

/// An edit with its diff and corpus-level annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedEdit {
    pub edit: EditRecord,
    pub diff: SentenceDiff,
    pub summary_clean: String,
    /// Code points in `summary_clean`.
    pub summary_length: usize,
    /// Occurrences of the normalized summary in the annotated corpus.
    pub summary_frequency: u64,
    /// Edits by the same editor in the annotated corpus.
    pub user_frequency: u64,
    pub semi_automated: bool,
}

impl AnnotatedEdit {
    pub fn frequency_key(&self) -> String {
        normalize_for_frequency(&self.summary_clean)
    }
}

/// Remove a leading `/* section */` marker and the whitespace around it.
pub fn strip_section_marker(summary_raw: &str) -> String {
    let trimmed = summary_raw.trim_start();
    if let Some(rest) = trimmed.strip_prefix("/*") {
        if let Some(end) = rest.find("*/") {
            return rest[end + 2..].trim_start().to_string();
        }
    }
    summary_raw.to_string()
}

fn link_pattern() -> &'static Regex {
    static LINKS: OnceLock<Regex> = OnceLock::new();
    LINKS.get_or_init(|| {
        Regex::new(r"(?i)\[\[.*?\]\]|\[(?:https?:)?//[^\]]*\]|(?:https?://|www\.)\S+")
            .expect("valid link regex")
    })
}

/// Lowercase and replace wiki links and URLs with `<link>`.
pub fn normalize_for_frequency(summary: &str) -> String {
    link_pattern().replace_all(summary, "<link>").to_lowercase()
}

/// Two-pass annotation: count normalized summaries and editors over the
/// whole corpus, then attach the counts to each record.
pub fn annotate(records: Vec<(EditRecord, SentenceDiff)>, config: &CuratorConfig) -> Vec<AnnotatedEdit> {
    let cleaned: Vec<String> = records.iter().map(|(e, _)| strip_section_marker(&e.summary_raw)).collect();
    let keys: Vec<String> = cleaned.iter().map(|s| normalize_for_frequency(s)).collect();

    let mut summary_counts: HashMap<&str, u64> = HashMap::new();
    let mut user_counts: HashMap<&str, u64> = HashMap::new();
    for (key, (edit, _)) in keys.iter().zip(&records) {
        *summary_counts.entry(key.as_str()).or_default() += 1;
        *user_counts.entry(edit.editor_name.as_str()).or_default() += 1;
    }
    let summary_counts: Vec<u64> = keys.iter().map(|k| summary_counts[k.as_str()]).collect();
    let user_counts: Vec<u64> = records.iter().map(|(e, _)| user_counts[e.editor_name.as_str()]).collect();

    records
        .into_iter()
        .zip(cleaned)
        .zip(summary_counts.into_iter().zip(user_counts))
        .map(|(((edit, diff), summary_clean), (summary_frequency, user_frequency))| {
            let semi_automated = config
                .semi_automated_signatures
                .iter()
                .any(|sig| edit.summary_raw.contains(sig.as_str()));
            AnnotatedEdit {
                summary_length: summary_clean.chars().count(),
                summary_clean,
                summary_frequency,
                user_frequency,
                semi_automated,
                edit,
                diff,
            }
        })
        .collect()
}

/// Rules (i)-(vi) in order; the first violated rule is reported.
pub fn apply_cleaning_rules(record: &AnnotatedEdit, config: &CuratorConfig) -> Verdict {
    let has_tag = |tags: &[String]| tags.iter().any(|t| record.edit.tags.contains(t));
    let reason = if record.diff.is_empty() {
        RejectReason::NoSentenceChange
    } else if config
        .auto_summary_patterns
        .iter()
        .any(|p| record.edit.summary_raw.contains(p.as_str()))
    {
        RejectReason::AutoSummary
    } else if record.edit.editor_is_bot {
        RejectReason::Bot
    } else if has_tag(&config.reverted_tags) {
        RejectReason::Reverted
    } else if has_tag(&config.revert_tags) {
        RejectReason::Revert
    } else if record.summary_clean.trim().is_empty() {
        RejectReason::BlankSummary
    } else {
        return Verdict::Keep;
    };
    Verdict::Reject(reason)
}

/// Summary length window, editor experience and input-length budget.
/// Bounds are inclusive on the kept side.
pub fn apply_quality_filters(record: &AnnotatedEdit, config: &CuratorConfig, tokenizer: &dyn Tokenizer) -> Verdict {
    let reason = if record.summary_length < config.min_summary_chars {
        RejectReason::TooShort
    } else if record.summary_length > config.max_summary_chars {
        RejectReason::TooLongSummary
    } else if record.edit.editor_edit_count < config.min_editor_edits {
        RejectReason::LowEditCount
    } else {
        match serialize(&record.diff) {
            Ok(input) if token_length(&input, tokenizer) > config.max_input_tokens => RejectReason::TooLong,
            Ok(_) => return Verdict::Keep,
            Err(DiffError::EmptyDiff) => RejectReason::NoSentenceChange,
            Err(_) => RejectReason::MarkerCollision,
        }
    };
    Verdict::Reject(reason)
}

/// Result of [`dedup_cap`].
#[derive(Debug, Clone, Default)]
pub struct DedupOutcome {
    pub kept: Vec<AnnotatedEdit>,
    pub dropped: Vec<AnnotatedEdit>,
}

/// Keep at most `cap` records per normalized summary, preferring the earliest
/// (timestamp, then revision id). Output is in that order.
pub fn dedup_cap(mut records: Vec<AnnotatedEdit>, cap: usize) -> DedupOutcome {
    records.sort_by(|a, b| {
        (a.edit.timestamp, a.edit.revision_id).cmp(&(b.edit.timestamp, b.edit.revision_id))
    });
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut outcome = DedupOutcome::default();
    for record in records {
        let count = seen.entry(record.frequency_key()).or_default();
        if *count < cap {
            *count += 1;
            outcome.kept.push(record);
        } else {
            outcome.dropped.push(record);
        }
    }
    outcome
}

/// One line of the reject log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RejectEntry {
    pub revision_id: u64,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default)]
pub struct CurationOutcome {
    pub kept: Vec<AnnotatedEdit>,
    pub rejects: Vec<RejectEntry>,
}

impl CurationOutcome {
    pub fn reject_counts(&self) -> BTreeMap<RejectReason, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.rejects {
            *counts.entry(r.reason).or_default() += 1;
        }
        counts
    }
}

/// Full curation pass over annotated records.
pub fn curate(records: Vec<AnnotatedEdit>, config: &CuratorConfig, tokenizer: &dyn Tokenizer) -> CurationOutcome {
    let mut outcome = CurationOutcome::default();
    let mut survivors = Vec::new();
    for record in records {
        let verdict = match apply_cleaning_rules(&record, config) {
            Verdict::Keep => apply_quality_filters(&record, config, tokenizer),
            reject => reject,
        };
        match verdict {
            Verdict::Keep => survivors.push(record),
            Verdict::Reject(reason) => {
                outcome.rejects.push(RejectEntry { revision_id: record.edit.revision_id, reason })
            }
        }
    }
    let deduped = dedup_cap(survivors, config.duplicate_cap);
    outcome.rejects.extend(
        deduped
            .dropped
            .iter()
            .map(|r| RejectEntry { revision_id: r.edit.revision_id, reason: RejectReason::Duplicate }),
    );
    outcome.kept = deduped.kept;
    outcome
}

/// Human-written training sample for a kept record.
pub fn human_sample(record: &AnnotatedEdit) -> Result<DatasetSample, DiffError> {
    Ok(DatasetSample {
        input: serialize(&record.diff)?,
        target: record.summary_clean.clone(),
        source: SampleSource::Human,
        revision_id: record.edit.revision_id,
    })
}
