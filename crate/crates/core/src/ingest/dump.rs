//! Streaming reader for `pages-meta-history` XML exports.
//!
//! Only the previous revision of the current page is held in memory, so
//! memory use does not grow with the number of revisions.

use std::collections::{BTreeSet, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, Utc};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{is_ip_editor, EditRecord, IngestError, RecordEnricher, RevisionPair};

/// Counters collected while streaming.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DumpStats {
    pub pages: u64,
    pub revisions: u64,
    pub pairs: u64,
    /// Pairs dropped because one side's text was deleted.
    pub skipped_deleted: u64,
    /// Pairs dropped for failing record invariants.
    pub skipped_invalid: u64,
}

#[derive(Debug, Default, Clone)]
struct RevisionBuilder {
    id: Option<u64>,
    parent_id: Option<u64>,
    timestamp: Option<String>,
    username: Option<String>,
    ip: Option<String>,
    comment: String,
    text: String,
    text_deleted: bool,
}

#[derive(Debug, Default)]
struct PageState {
    title: String,
    previous: Option<RevisionBuilder>,
}

/// Open a dump file, transparently decompressing gzip or bzip2 by magic bytes.
pub fn open_dump(path: &Path) -> Result<DumpReader<Box<dyn BufRead>>, IngestError> {
    let mut raw = BufReader::new(File::open(path)?);
    let magic = raw.fill_buf()?.get(..3).map(<[u8]>::to_vec).unwrap_or_default();
    let inner: Box<dyn BufRead> = if magic.starts_with(&[0x1f, 0x8b]) {
        Box::new(BufReader::new(flate2::bufread::MultiGzDecoder::new(raw)))
    } else if magic == b"BZh" {
        Box::new(BufReader::new(bzip2::bufread::MultiBzDecoder::new(raw)))
    } else {
        Box::new(raw)
    };
    Ok(DumpReader::new(inner))
}

/// Iterator over consecutive revision pairs of every page in a dump.
pub struct DumpReader<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    path: Vec<Vec<u8>>,
    text: String,
    page: Option<PageState>,
    revision: Option<RevisionBuilder>,
    ready: VecDeque<(EditRecord, RevisionPair)>,
    enricher: Option<Box<dyn RecordEnricher>>,
    stats: DumpStats,
    done: bool,
}

impl<R: BufRead> DumpReader<R> {
    pub fn new(source: R) -> Self {
        Self {
            reader: Reader::from_reader(source),
            buf: Vec::new(),
            path: Vec::new(),
            text: String::new(),
            page: None,
            revision: None,
            ready: VecDeque::new(),
            enricher: None,
            stats: DumpStats::default(),
            done: false,
        }
    }

    /// Attach a source for metadata the dump lacks (editor counts, bot
    /// status, change tags).
    pub fn with_enricher(mut self, enricher: Box<dyn RecordEnricher>) -> Self {
        self.enricher = Some(enricher);
        self
    }

    pub fn stats(&self) -> DumpStats {
        self.stats
    }

    fn malformed(&self, message: impl Into<String>) -> IngestError {
        IngestError::MalformedXml { offset: self.reader.buffer_position(), message: message.into() }
    }

    fn in_revision(&self) -> bool {
        self.revision.is_some()
    }

    fn parent_tag(&self) -> Option<&[u8]> {
        self.path.len().checked_sub(2).map(|i| self.path[i].as_slice())
    }

    fn on_start(&mut self, e: &BytesStart<'_>, empty: bool) -> Result<(), IngestError> {
        let name = e.name().as_ref().to_vec();
        match name.as_slice() {
            b"page" => {
                self.page = Some(PageState::default());
                self.stats.pages += 1;
            }
            b"revision" if self.page.is_some() => self.revision = Some(RevisionBuilder::default()),
            b"text" if self.in_revision() && has_deleted_attr(e) => {
                if let Some(rev) = self.revision.as_mut() {
                    rev.text_deleted = true;
                }
            }
            _ => {}
        }
        if !empty {
            self.path.push(name);
            self.text.clear();
        }
        Ok(())
    }

    fn on_end(&mut self) -> Result<(), IngestError> {
        let name = self.path.pop().ok_or_else(|| self.malformed("unbalanced end tag"))?;
        let value = std::mem::take(&mut self.text);
        let parent = self.path.last().map(Vec::as_slice);
        match (name.as_slice(), parent) {
            (b"title", Some(b"page")) => {
                if let Some(page) = self.page.as_mut() {
                    page.title = value;
                }
            }
            (b"id", Some(b"revision")) => {
                let id = parse_u64(&value).ok_or_else(|| self.malformed(format!("bad revision id {value:?}")))?;
                self.revision_mut()?.id = Some(id);
            }
            (b"parentid", Some(b"revision")) => {
                let id = parse_u64(&value).ok_or_else(|| self.malformed(format!("bad parent id {value:?}")))?;
                self.revision_mut()?.parent_id = Some(id);
            }
            (b"timestamp", Some(b"revision")) => self.revision_mut()?.timestamp = Some(value),
            (b"comment", Some(b"revision")) => self.revision_mut()?.comment = value,
            (b"text", Some(b"revision")) => self.revision_mut()?.text = value,
            (b"username", Some(b"contributor")) if self.in_revision() => {
                self.revision_mut()?.username = Some(value)
            }
            (b"ip", Some(b"contributor")) if self.in_revision() => self.revision_mut()?.ip = Some(value),
            (b"revision", _) if self.page.is_some() => {
                let rev = self.revision.take().ok_or_else(|| self.malformed("revision end without start"))?;
                self.finish_revision(rev)?;
            }
            (b"page", _) => self.page = None,
            _ => {}
        }
        Ok(())
    }

    fn revision_mut(&mut self) -> Result<&mut RevisionBuilder, IngestError> {
        if self.revision.is_none() {
            return Err(self.malformed("revision field outside <revision>"));
        }
        Ok(self.revision.as_mut().expect("checked"))
    }

    fn finish_revision(&mut self, current: RevisionBuilder) -> Result<(), IngestError> {
        self.stats.revisions += 1;
        let title = self.page.as_ref().map(|p| p.title.clone()).unwrap_or_default();
        let previous = self.page.as_mut().and_then(|p| p.previous.take());
        if let Some(prev) = previous {
            if prev.text_deleted || current.text_deleted {
                self.stats.skipped_deleted += 1;
            } else {
                let record = self.build_record(&title, &prev, &current)?;
                match record.validate() {
                    Ok(()) => {
                        let pair = RevisionPair { old_text: prev.text.clone(), new_text: current.text.clone() };
                        self.stats.pairs += 1;
                        self.ready.push_back((record, pair));
                    }
                    Err(_) => self.stats.skipped_invalid += 1,
                }
            }
        }
        if let Some(page) = self.page.as_mut() {
            page.previous = Some(current);
        }
        Ok(())
    }

    fn build_record(
        &self,
        title: &str,
        prev: &RevisionBuilder,
        cur: &RevisionBuilder,
    ) -> Result<EditRecord, IngestError> {
        let revision_id = cur.id.ok_or_else(|| self.malformed("revision without <id>"))?;
        let parent_revision_id = cur
            .parent_id
            .or(prev.id)
            .ok_or_else(|| self.malformed("cannot determine parent revision"))?;
        let raw_ts = cur.timestamp.as_deref().ok_or_else(|| self.malformed("revision without <timestamp>"))?;
        let timestamp = DateTime::parse_from_rfc3339(raw_ts)
            .map_err(|e| self.malformed(format!("bad timestamp {raw_ts:?}: {e}")))?
            .with_timezone(&Utc);
        let (editor_name, anonymous) = match (&cur.username, &cur.ip) {
            (Some(u), _) => (u.clone(), is_ip_editor(u)),
            (None, Some(ip)) => (ip.clone(), true),
            (None, None) => (String::new(), false),
        };
        Ok(EditRecord {
            revision_id,
            parent_revision_id,
            page_title: title.to_string(),
            editor_name,
            editor_is_bot: false,
            editor_is_anonymous: anonymous,
            editor_edit_count: 0,
            summary_raw: cur.comment.clone(),
            tags: BTreeSet::new(),
            timestamp,
        })
    }

    fn pump(&mut self) -> Result<(), IngestError> {
        while self.ready.is_empty() && !self.done {
            self.buf.clear();
            let event = self
                .reader
                .read_event_into(&mut self.buf)
                .map_err(|e| IngestError::MalformedXml {
                    offset: self.reader.error_position(),
                    message: e.to_string(),
                })?
                .into_owned();
            match event {
                Event::Start(e) => self.on_start(&e, false)?,
                Event::Empty(e) => self.on_start(&e, true)?,
                Event::End(_) => self.on_end()?,
                Event::Text(t) => {
                    if self.capturing() {
                        let s = t.unescape().map_err(|e| self.malformed(e.to_string()))?;
                        self.text.push_str(&s);
                    }
                }
                Event::CData(c) => {
                    if self.capturing() {
                        self.text.push_str(&String::from_utf8_lossy(&c));
                    }
                }
                Event::Eof => {
                    if !self.path.is_empty() {
                        return Err(self.malformed("unexpected end of file inside element"));
                    }
                    self.done = true;
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Text is only accumulated for leaf fields we keep.
    fn capturing(&self) -> bool {
        matches!(
            self.path.last().map(Vec::as_slice),
            Some(b"title" | b"id" | b"parentid" | b"timestamp" | b"comment" | b"text" | b"username" | b"ip")
        ) && self.parent_tag().is_some()
    }
}

impl<R: BufRead> Iterator for DumpReader<R> {
    type Item = Result<(EditRecord, RevisionPair), IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Err(e) = self.pump() {
            self.done = true;
            self.ready.clear();
            return Some(Err(e));
        }
        let (mut record, pair) = self.ready.pop_front()?;
        if let Some(enricher) = &self.enricher {
            if let Err(e) = enricher.enrich(&mut record) {
                return Some(Err(e));
            }
        }
        Some(Ok((record, pair)))
    }
}

fn has_deleted_attr(e: &BytesStart<'_>) -> bool {
    e.attributes()
        .flatten()
        .any(|a| a.key.as_ref() == b"deleted")
}

fn parse_u64(s: &str) -> Option<u64> {
    s.trim().parse().ok()
}
