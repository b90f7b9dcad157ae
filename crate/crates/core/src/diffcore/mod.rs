//! Sentence-level edit diffs and the flat model-input format.
//!
//! A revision pair is reduced to the multiset of removed and added sentences,
//! each side sorted by code point, then serialized as
//! `<old_text> s1 <sent_sep> s2 <new_text> t1 <sent_sep> t2`.

mod markup;
mod segment;
mod tokenizer;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::RevisionPair;

pub use markup::{prose_paragraphs, REF_PLACEHOLDER};
pub use segment::{segment_sentences, split_paragraph};
pub use tokenizer::{
    token_length, Tokenizer, TokenizerRegistry, WhitespaceTokenizer, WordPieceTokenizer,
};

pub const OLD_TEXT_MARKER: &str = "<old_text>";
pub const NEW_TEXT_MARKER: &str = "<new_text>";
pub const SENTENCE_SEPARATOR: &str = "<sent_sep>";

const MARKERS: [&str; 3] = [OLD_TEXT_MARKER, NEW_TEXT_MARKER, SENTENCE_SEPARATOR];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiffError {
    #[error("diff has neither removed nor added sentences")]
    EmptyDiff,
    #[error("sentence contains a reserved marker: {0:?}")]
    MarkerCollision(String),
    #[error("unknown tokenizer {0:?}")]
    UnknownTokenizer(String),
    #[error("malformed serialized input: {0}")]
    MalformedInput(String),
}

/// Removed and added sentences of one edit, each sorted by code point.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceDiff {
    pub removed: Vec<String>,
    pub added: Vec<String>,
}

impl SentenceDiff {
    /// Builds a diff from unsorted sides, sorting each.
    pub fn new(mut removed: Vec<String>, mut added: Vec<String>) -> Self {
        removed.sort();
        added.sort();
        Self { removed, added }
    }

    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }

    /// Swap the roles of the two revisions.
    pub fn reversed(&self) -> Self {
        Self { removed: self.added.clone(), added: self.removed.clone() }
    }
}

/// Single-line model input produced by [`serialize`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SerializedInput(String);

impl SerializedInput {
    /// Wraps text read back from a file without re-validating it.
    pub fn from_raw(text: String) -> Self {
        Self(text)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    pub fn separator_count(&self) -> usize {
        self.0.matches(SENTENCE_SEPARATOR).count()
    }

    /// Recover the sentence lists. Exact inverse of [`serialize`] for
    /// whitespace-normalized sentences.
    pub fn parse(&self) -> Result<SentenceDiff, DiffError> {
        let text = self.0.as_str();
        let (old_part, new_part) = if let Some(rest) = strip_marker(text, OLD_TEXT_MARKER) {
            match rest.split_once(&format!(" {NEW_TEXT_MARKER} ")) {
                Some((old, new)) => (Some(old), Some(new)),
                None => (Some(rest), None),
            }
        } else if let Some(rest) = strip_marker(text, NEW_TEXT_MARKER) {
            (None, Some(rest))
        } else {
            return Err(DiffError::MalformedInput(format!(
                "expected {OLD_TEXT_MARKER} or {NEW_TEXT_MARKER} prefix"
            )));
        };
        let split = |part: Option<&str>| -> Result<Vec<String>, DiffError> {
            let Some(part) = part else { return Ok(Vec::new()) };
            part.split(&format!(" {SENTENCE_SEPARATOR} "))
                .map(|s| {
                    if s.is_empty() || MARKERS.iter().any(|m| s.contains(m)) {
                        Err(DiffError::MalformedInput(format!("bad sentence {s:?}")))
                    } else {
                        Ok(s.to_string())
                    }
                })
                .collect()
        };
        Ok(SentenceDiff { removed: split(old_part)?, added: split(new_part)? })
    }
}

fn strip_marker<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    text.strip_prefix(marker)?.strip_prefix(' ')
}

impl fmt::Display for SerializedInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Multiset difference of the sentences of the two revisions.
pub fn extract_diff(pair: &RevisionPair) -> SentenceDiff {
    diff_sentences(segment_sentences(&pair.old_text), segment_sentences(&pair.new_text))
}

/// Multiset difference over already-segmented sentence lists.
pub fn diff_sentences(old: Vec<String>, new: Vec<String>) -> SentenceDiff {
    let mut balance: HashMap<String, i64> = HashMap::new();
    for s in old {
        *balance.entry(s).or_default() += 1;
    }
    for s in new {
        *balance.entry(s).or_default() -= 1;
    }
    let mut removed = Vec::new();
    let mut added = Vec::new();
    for (sentence, count) in balance {
        match count.signum() {
            1 => removed.extend(std::iter::repeat_n(sentence, count as usize)),
            -1 => added.extend(std::iter::repeat_n(sentence, count.unsigned_abs() as usize)),
            _ => {}
        }
    }
    SentenceDiff::new(removed, added)
}

/// Flatten a diff into the single-line input string.
pub fn serialize(diff: &SentenceDiff) -> Result<SerializedInput, DiffError> {
    if diff.is_empty() {
        return Err(DiffError::EmptyDiff);
    }
    let mut parts: Vec<String> = Vec::new();
    for (marker, side) in [(OLD_TEXT_MARKER, &diff.removed), (NEW_TEXT_MARKER, &diff.added)] {
        if side.is_empty() {
            continue;
        }
        parts.push(marker.to_string());
        for (i, sentence) in side.iter().enumerate() {
            if MARKERS.iter().any(|m| sentence.contains(m)) {
                return Err(DiffError::MarkerCollision(sentence.clone()));
            }
            if i > 0 {
                parts.push(SENTENCE_SEPARATOR.to_string());
            }
            parts.push(sentence.split_whitespace().collect::<Vec<_>>().join(" "));
        }
    }
    Ok(SerializedInput(parts.join(" ")))
}
