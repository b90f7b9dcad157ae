//! JSON-lines files with a leading `{"schema": ..., "version": ...}` line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub schema: String,
    pub version: u32,
}

/// Parses `line` as a header if it is one.
pub fn parse_header(line: &str) -> Option<Header> {
    serde_json::from_str(line).ok()
}

/// Record lines with their 1-based line numbers.
pub type NumberedLines = Vec<(usize, String)>;

/// Raw record lines of a file, with the header (if any) split off. Blank
/// lines are skipped.
pub fn read_lines(path: &Path) -> Result<(Option<Header>, NumberedLines)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut header = None;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Some(h) = parse_header(&line) {
                header = Some(h);
                continue;
            }
        }
        lines.push((i + 1, line));
    }
    Ok((header, lines))
}

fn check_header(path: &Path, header: &Option<Header>, schema: &str) -> Result<()> {
    if let Some(h) = header {
        if h.schema != schema {
            bail!(crate::error::Invalid(format!(
                "{}: expected schema {schema:?}, found {:?}",
                path.display(),
                h.schema
            )));
        }
        if h.version > SCHEMA_VERSION {
            bail!(crate::error::Invalid(format!(
                "{}: schema version {} is newer than supported {SCHEMA_VERSION}",
                path.display(),
                h.version
            )));
        }
    }
    Ok(())
}

/// Read every record of `schema` from `path`. The header is optional.
pub fn read<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>> {
    let (header, lines) = read_lines(path)?;
    check_header(path, &header, schema)?;
    lines
        .into_iter()
        .map(|(n, line)| {
            serde_json::from_str(&line)
                .map_err(|e| crate::error::Invalid(format!("{}:{n}: {e}", path.display())).into())
        })
        .collect()
}

/// Write a header followed by one line per record.
pub fn write<'a, T: Serialize + 'a>(path: &Path, schema: &str, records: impl IntoIterator<Item = &'a T>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    let header = Header { schema: schema.to_string(), version: SCHEMA_VERSION };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for record in records {
        writeln!(w, "{}", serde_json::to_string(record)?)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Pretty JSON document.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
