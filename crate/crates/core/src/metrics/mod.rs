//! ROUGE scores, mean/CI aggregation and a bridge to external scorers.

mod external;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{external_score, ExternalScorer};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no scores to aggregate")]
    EmptyInput,
    #[error("score {index} is not finite")]
    NonFinite { index: usize },
    #[error("external scorer unavailable: {0}")]
    ScorerUnavailable(String),
    #[error("score {score} at index {index} is outside [0, 1]")]
    ScoreOutOfRange { index: usize, score: f64 },
}

/// Lowercased runs of alphanumeric characters. Punctuation separates tokens
/// and is dropped; there is no stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn f1(overlap: usize, candidate_total: usize, reference_total: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / candidate_total as f64;
    let r = overlap as f64 / reference_total as f64;
    2.0 * p * r / (p + r)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_default() += 1;
        }
    }
    counts
}

/// Scores for inputs where at least one side is too short for any unit:
/// `Some(1.0)` when both are identical, `Some(0.0)` otherwise.
fn degenerate(c: &[String], r: &[String], c_units: usize, r_units: usize) -> Option<f64> {
    if c_units > 0 && r_units > 0 {
        return None;
    }
    Some(if c_units == 0 && r_units == 0 && c == r { 1.0 } else { 0.0 })
}

/// ROUGE-N F1 with clipped n-gram counts.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> f64 {
    let (c, r) = (tokenize(candidate), tokenize(reference));
    let (cc, rc) = (ngram_counts(&c, n), ngram_counts(&r, n));
    let (c_total, r_total) = (cc.values().sum::<usize>(), rc.values().sum::<usize>());
    if let Some(score) = degenerate(&c, &r, c_total, r_total) {
        return score;
    }
    let overlap = cc.iter().map(|(g, k)| (*k).min(rc.get(g).copied().unwrap_or(0))).sum();
    f1(overlap, c_total, r_total)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L F1 from the longest common token subsequence.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (tokenize(candidate), tokenize(reference));
    if let Some(score) = degenerate(&c, &r, c.len(), r.len()) {
        return score;
    }
    f1(lcs_len(&c, &r), c.len(), r.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    /// mean ± 1.96 · s / √n
    Normal,
    /// Percentile bootstrap.
    Bootstrap,
}

/// `[metrics]` configuration section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub ci: CiMethod,
    pub bootstrap_resamples: usize,
    pub scorer: Option<ExternalScorer>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { ci: CiMethod::Normal, bootstrap_resamples: 1000, scorer: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric_name: String,
    pub per_sample: Vec<f64>,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

fn check_finite(scores: &[f64]) -> Result<(), MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    match scores.iter().position(|s| !s.is_finite()) {
        Some(index) => Err(MetricsError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Mean and standard error (sample standard deviation over √n; 0 for n = 1).
pub fn mean_and_se(scores: &[f64]) -> (f64, f64) {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    if scores.len() < 2 {
        return (mean, 0.0);
    }
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean with a normal-approximation 95% interval.
pub fn aggregate(metric_name: &str, per_sample: &[f64]) -> Result<MetricReport, MetricsError> {
    check_finite(per_sample)?;
    let (mean, se) = mean_and_se(per_sample);
    Ok(MetricReport {
        metric_name: metric_name.to_string(),
        per_sample: per_sample.to_vec(),
        mean,
        ci_low: mean - Z_95 * se,
        ci_high: mean + Z_95 * se,
        n: per_sample.len(),
    })
}

/// Mean with a 95% percentile-bootstrap interval.
pub fn aggregate_bootstrap(
    metric_name: &str,
    per_sample: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<MetricReport, MetricsError> {
    check_finite(per_sample)?;
    let n = per_sample.len();
    let mean = per_sample.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples.max(1))
        .map(|_| (0..n).map(|_| per_sample[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let at = |q: f64| means[((q * (means.len() - 1) as f64).round() as usize).min(means.len() - 1)];
    Ok(MetricReport {
        metric_name: metric_name.to_string(),
        per_sample: per_sample.to_vec(),
        mean,
        ci_low: at(0.025).min(mean),
        ci_high: at(0.975).max(mean),
        n,
    })
}

/// Aggregate according to `config.ci`.
pub fn aggregate_with(
    metric_name: &str,
    per_sample: &[f64],
    config: &MetricsConfig,
    seed: u64,
) -> Result<MetricReport, MetricsError> {
    match config.ci {
        CiMethod::Normal => aggregate(metric_name, per_sample),
        CiMethod::Bootstrap => aggregate_bootstrap(metric_name, per_sample, config.bootstrap_resamples, seed),
    }
}

/// ROUGE-1, ROUGE-2 and ROUGE-L reports over aligned candidate/reference lists.
pub fn rouge_reports(
    pairs: &[(String, String)],
    config: &MetricsConfig,
    seed: u64,
) -> Result<Vec<MetricReport>, MetricsError> {
    let r1: Vec<f64> = pairs.iter().map(|(c, r)| rouge_n(c, r, 1)).collect();
    let r2: Vec<f64> = pairs.iter().map(|(c, r)| rouge_n(c, r, 2)).collect();
    let rl: Vec<f64> = pairs.iter().map(|(c, r)| rouge_l(c, r)).collect();
    Ok(vec![
        aggregate_with("rouge1", &r1, config, seed)?,
        aggregate_with("rouge2", &r2, config, seed)?,
        aggregate_with("rougeL", &rl, config, seed)?,
    ])
}
