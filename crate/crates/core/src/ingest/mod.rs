//! Revision acquisition from the MediaWiki Action API or XML history dumps.
//!
//! Ingestion never normalizes: summaries, tags and texts are carried through
//! byte-for-byte. Cleaning happens in [`crate::curator`].

mod api;
mod dump;

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use api::{ApiClient, EditorInfo, IngestConfig, IpEditCount, USER_AGENT_ENV};
pub use dump::{open_dump, DumpReader, DumpStats};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected API response: {0}")]
    InvalidResponse(String),
    #[error("malformed XML at byte {offset}: {message}")]
    MalformedXml { offset: u64, message: String },
    #[error("user agent not configured; set {USER_AGENT_ENV}")]
    MissingUserAgent,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One Wikipedia edit with its editor metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditRecord {
    pub revision_id: u64,
    /// 0 for page creations.
    pub parent_revision_id: u64,
    pub page_title: String,
    pub editor_name: String,
    pub editor_is_bot: bool,
    #[serde(default)]
    pub editor_is_anonymous: bool,
    pub editor_edit_count: u64,
    pub summary_raw: String,
    pub tags: BTreeSet<String>,
    pub timestamp: DateTime<Utc>,
}

impl EditRecord {
    /// Field-level invariant check.
    pub fn validate(&self) -> Result<(), String> {
        if self.revision_id == self.parent_revision_id {
            return Err(format!("revision {} is its own parent", self.revision_id));
        }
        Ok(())
    }
}

/// Full wikitext immediately before and after an edit. Either side may be
/// empty (page creation or blanking).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevisionPair {
    pub old_text: String,
    pub new_text: String,
}

/// One line of an edits file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestedEdit {
    pub edit: EditRecord,
    pub revision: RevisionPair,
}

/// Fills in metadata a dump does not carry (editor groups and counts, change
/// tags).
pub trait RecordEnricher {
    fn enrich(&self, record: &mut EditRecord) -> Result<(), IngestError>;
}

/// Whether a user name is an IPv4/IPv6 address (anonymous editor).
pub fn is_ip_editor(name: &str) -> bool {
    name.parse::<std::net::IpAddr>().is_ok()
}
