//! Blind side-by-side sheets for manual grading of synthetic summaries.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{render_diff, PromptError};
use crate::curator::{DatasetSample, SampleSource};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcRow {
    pub revision_id: u64,
    pub diff: String,
    pub summary_a: String,
    pub summary_b: String,
}

/// Which pool each column came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcKeyEntry {
    pub revision_id: u64,
    pub a: SampleSource,
    pub b: SampleSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityCheck {
    pub seed: u64,
    pub rows: Vec<QcRow>,
    pub key: Vec<QcKeyEntry>,
}

impl QualityCheck {
    /// Tab-separated sheet with a header row.
    pub fn write_tsv<W: Write>(&self, out: W) -> Result<(), PromptError> {
        let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
        w.write_record(["revision_id", "diff", "summary_a", "summary_b"])
            .map_err(|e| PromptError::Io(e.into()))?;
        for row in &self.rows {
            w.write_record([row.revision_id.to_string().as_str(), &row.diff, &row.summary_a, &row.summary_b])
                .map_err(|e| PromptError::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn key_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({ "seed": self.seed, "rows": self.key }))
            .expect("key serializes")
    }
}

/// Pick `n` revisions present in both pools and lay out their human and
/// synthetic summaries in random column order.
pub fn sample_quality_check(
    human: &[DatasetSample],
    synthetic: &[DatasetSample],
    n: usize,
    seed: u64,
) -> Result<QualityCheck, PromptError> {
    let synthetic: HashMap<u64, &DatasetSample> = synthetic.iter().map(|s| (s.revision_id, s)).collect();
    let mut pairs: Vec<(&DatasetSample, &DatasetSample)> = human
        .iter()
        .filter_map(|h| synthetic.get(&h.revision_id).map(|s| (h, *s)))
        .collect();
    pairs.sort_by_key(|(h, _)| h.revision_id);
    pairs.dedup_by_key(|(h, _)| h.revision_id);
    if pairs.len() < n {
        return Err(PromptError::InsufficientPool { needed: n, available: pairs.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pairs.shuffle(&mut rng);
    pairs.truncate(n);
    let mut rows = Vec::with_capacity(n);
    let mut key = Vec::with_capacity(n);
    for (h, s) in pairs {
        let human_first = rng.gen_bool(0.5);
        let (a, b) = if human_first { (h, s) } else { (s, h) };
        rows.push(QcRow {
            revision_id: h.revision_id,
            diff: render_diff(&h.input).unwrap_or_else(|_| h.input.as_str().to_string()),
            summary_a: a.target.clone(),
            summary_b: b.target.clone(),
        });
        key.push(QcKeyEntry { revision_id: h.revision_id, a: a.source, b: b.source });
    }
    Ok(QualityCheck { seed, rows, key })
}
