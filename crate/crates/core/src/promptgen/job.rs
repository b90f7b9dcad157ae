//! Resumable, bounded-concurrency generation over many diffs.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::{generate_summary, ChatEndpoint, GenerationParams, PromptBundle, PromptError};
use crate::curator::{DatasetSample, SampleSource};
use crate::diffcore::SerializedInput;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationItem {
    pub revision_id: u64,
    pub input: SerializedInput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobFailure {
    pub revision_id: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JobReport {
    /// One sample per distinct input revision that has succeeded so far, in
    /// input order, including those restored from the checkpoint.
    pub samples: Vec<DatasetSample>,
    pub failures: Vec<JobFailure>,
    /// Samples restored from the checkpoint without a request.
    pub resumed: usize,
}

/// Reads finished samples. A torn final line (no trailing newline, not valid
/// JSON) is cut off so appends start on a clean line.
fn load_checkpoint(path: &Path) -> Result<HashMap<u64, DatasetSample>, PromptError> {
    let mut done = HashMap::new();
    let mut bytes = Vec::new();
    match File::open(path) {
        Ok(mut f) => {
            f.read_to_end(&mut bytes)?;
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(e.into()),
    }
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        line_no += 1;
        let end = bytes[offset..].iter().position(|&b| b == b'\n').map(|p| offset + p);
        let line = &bytes[offset..end.unwrap_or(bytes.len())];
        let parsed = serde_json::from_slice::<DatasetSample>(line);
        match (parsed, end) {
            (Ok(sample), Some(end)) => {
                done.insert(sample.revision_id, sample);
                offset = end + 1;
            }
            (Ok(sample), None) => {
                done.insert(sample.revision_id, sample);
                OpenOptions::new().append(true).open(path)?.write_all(b"\n")?;
                break;
            }
            (Err(_), None) => {
                warn!("dropping torn checkpoint line {line_no}");
                OpenOptions::new().write(true).open(path)?.set_len(offset as u64)?;
                break;
            }
            (Err(_), Some(end)) if line.iter().all(u8::is_ascii_whitespace) => offset = end + 1,
            (Err(e), Some(_)) => {
                return Err(PromptError::Checkpoint(format!("{}: line {line_no}: {e}", path.display())));
            }
        }
    }
    Ok(done)
}

/// Generate a synthetic summary for every input not already in the
/// checkpoint. Per-item errors are collected; only checkpoint I/O aborts.
pub fn run_generation_job(
    items: &[GenerationItem],
    template: &PromptBundle,
    params: &GenerationParams,
    endpoint: &dyn ChatEndpoint,
    concurrency: usize,
    checkpoint: &Path,
) -> Result<JobReport, PromptError> {
    let mut done = load_checkpoint(checkpoint)?;
    let mut seen = HashSet::new();
    let unique: Vec<&GenerationItem> = items.iter().filter(|i| seen.insert(i.revision_id)).collect();
    let resumed = unique.iter().filter(|i| done.contains_key(&i.revision_id)).count();
    let pending: Vec<&GenerationItem> = unique.iter().copied().filter(|i| !done.contains_key(&i.revision_id)).collect();
    info!("{} inputs, {resumed} already done, {} to generate", unique.len(), pending.len());

    let mut log = BufWriter::new(OpenOptions::new().create(true).append(true).open(checkpoint)?);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let mut failures = Vec::new();
    let mut write_error = None;

    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..concurrency.max(1).min(pending.len().max(1)) {
            let tx = tx.clone();
            let (next, stop, pending) = (&next, &stop, &pending);
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = pending.get(i) else { break };
                let result = generate_summary(&template.retarget(item.input.clone()), params, endpoint);
                if tx.send((*item, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (item, result) in rx {
            match result {
                Ok(summary) => {
                    let sample = DatasetSample {
                        input: item.input.clone(),
                        target: summary,
                        source: SampleSource::Synthetic,
                        revision_id: item.revision_id,
                    };
                    let line = serde_json::to_string(&sample).expect("sample serializes");
                    if let Err(e) = writeln!(log, "{line}").and_then(|_| log.flush()) {
                        stop.store(true, Ordering::Relaxed);
                        write_error = Some(e);
                        break;
                    }
                    done.insert(item.revision_id, sample);
                }
                Err(e) => {
                    warn!("revision {}: {e}", item.revision_id);
                    failures.push(JobFailure { revision_id: item.revision_id, reason: e.to_string() });
                }
            }
        }
    });
    if let Some(e) = write_error {
        return Err(e.into());
    }

    let order: HashMap<u64, usize> = unique.iter().enumerate().map(|(i, it)| (it.revision_id, i)).collect();
    failures.sort_by_key(|f| order[&f.revision_id]);
    let samples = unique.iter().filter_map(|i| done.remove(&i.revision_id)).collect();
    Ok(JobReport { samples, failures, resumed })
}
