//! Train/validation/test assembly at a fixed synthetic proportion.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::SerializedInput;

/// Synthetic proportions evaluated in the reference experiments.
pub const STANDARD_SYNTHETIC_FRACTIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    Human,
    Synthetic,
}

/// One model-ready (input, target) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSample {
    pub input: SerializedInput,
    pub target: String,
    pub source: SampleSource,
    pub revision_id: u64,
}

impl DatasetSample {
    pub fn validate(&self) -> Result<(), String> {
        if self.input.as_str().is_empty() {
            return Err(format!("sample {} has an empty input", self.revision_id));
        }
        if self.source == SampleSource::Human && self.target.trim().is_empty() {
            return Err(format!("human sample {} has an empty target", self.revision_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub synthetic_fraction: f64,
    pub train_size: usize,
    pub val_size: usize,
    /// Supplied by the caller rather than read from configuration.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self { synthetic_fraction: 1.0, train_size: 100_000, val_size: 10_000, seed: 0 }
    }
}

impl DatasetSpec {
    /// Whether the fraction is one of [`STANDARD_SYNTHETIC_FRACTIONS`].
    pub fn is_standard_grid(&self) -> bool {
        STANDARD_SYNTHETIC_FRACTIONS.contains(&self.synthetic_fraction)
    }

    pub fn synthetic_counts(&self) -> (usize, usize) {
        (
            round_half_up(self.synthetic_fraction, self.train_size),
            round_half_up(self.synthetic_fraction, self.val_size),
        )
    }
}

/// `round(fraction * n)` with halves rounded up.
pub fn round_half_up(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 0.5).floor() as usize
}

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("{pool:?} pool too small: need {needed}, have {available}")]
    InsufficientPool { pool: SampleSource, needed: usize, available: usize },
    #[error("synthetic_fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("sample {revision_id} in the {pool:?} pool is labelled {found:?}")]
    WrongSource { pool: SampleSource, found: SampleSource, revision_id: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<DatasetSample>,
    pub val: Vec<DatasetSample>,
    pub test: Vec<DatasetSample>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub human: usize,
    pub synthetic: usize,
}

impl SplitCounts {
    fn of(samples: &[DatasetSample]) -> Self {
        let synthetic = samples.iter().filter(|s| s.source == SampleSource::Synthetic).count();
        Self { human: samples.len() - synthetic, synthetic }
    }
}

/// Summary written next to the split files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub synthetic_fraction: f64,
    pub standard_grid: bool,
    pub seed: u64,
    pub train: SplitCounts,
    pub val: SplitCounts,
    pub test: SplitCounts,
}

impl Splits {
    pub fn manifest(&self, spec: &DatasetSpec) -> SplitManifest {
        SplitManifest {
            synthetic_fraction: spec.synthetic_fraction,
            standard_grid: spec.is_standard_grid(),
            seed: spec.seed,
            train: SplitCounts::of(&self.train),
            val: SplitCounts::of(&self.val),
            test: SplitCounts::of(&self.test),
        }
    }
}

fn unique_by_revision(pool: Vec<DatasetSample>, expected: SampleSource, exclude: &HashSet<u64>) -> Result<Vec<DatasetSample>, DatasetError> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(pool.len());
    for sample in pool {
        if sample.source != expected {
            return Err(DatasetError::WrongSource { pool: expected, found: sample.source, revision_id: sample.revision_id });
        }
        if !exclude.contains(&sample.revision_id) && seen.insert(sample.revision_id) {
            out.push(sample);
        }
    }
    Ok(out)
}

/// Draw train and validation sets at the requested synthetic proportion by
/// seeded sampling without replacement; the untouched human pool becomes the
/// test set. No revision id appears in more than one split.
pub fn assemble_dataset(
    human: Vec<DatasetSample>,
    synthetic: Vec<DatasetSample>,
    spec: &DatasetSpec,
) -> Result<Splits, DatasetError> {
    if !(0.0..=1.0).contains(&spec.synthetic_fraction) {
        return Err(DatasetError::BadFraction(spec.synthetic_fraction));
    }
    let (syn_train, syn_val) = spec.synthetic_counts();
    let human_train = spec.train_size - syn_train;
    let human_val = spec.val_size - syn_val;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut synthetic = unique_by_revision(synthetic, SampleSource::Synthetic, &HashSet::new())?;
    let needed = syn_train + syn_val;
    if synthetic.len() < needed {
        return Err(DatasetError::InsufficientPool {
            pool: SampleSource::Synthetic,
            needed,
            available: synthetic.len(),
        });
    }
    synthetic.shuffle(&mut rng);
    synthetic.truncate(needed);
    let synthetic_val = synthetic.split_off(syn_train);
    let used: HashSet<u64> = synthetic.iter().chain(&synthetic_val).map(|s| s.revision_id).collect();

    let mut human = unique_by_revision(human, SampleSource::Human, &used)?;
    let needed = human_train + human_val;
    if human.len() < needed {
        return Err(DatasetError::InsufficientPool { pool: SampleSource::Human, needed, available: human.len() });
    }
    human.shuffle(&mut rng);
    let test = human.split_off(needed);
    let human_val_samples = human.split_off(human_train);

    let mut train = synthetic;
    train.extend(human);
    train.shuffle(&mut rng);
    let mut val = synthetic_val;
    val.extend(human_val_samples);
    val.shuffle(&mut rng);

    Ok(Splits { train, val, test })
}
