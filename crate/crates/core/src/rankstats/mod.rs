//! Human-evaluation and qualitative-coding statistics.
//!
//! Best/worst ballots over four candidate summaries are the main input: the
//! chosen best ranks first, the worst last and the other two tie in between.

mod agreement;
mod binomial;
mod errors;
mod plackett_luce;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{mean_and_se, Z_95};

pub use agreement::{bound_ranges, cohen_kappa, agreement_table, AgreementRow, Bounds, BoundsReport, CodedItem, Stratum};
pub use binomial::{binomial_two_sided, head_to_head, HeadToHead};
pub use errors::{tabulate_errors, ErrorLabel, ErrorRow, Outcome, Proportion, WhatCategory, WhyCategory};
pub use plackett_luce::{fit_plackett_luce, fit_tiered, PlConfig, PlFit};

pub const METHODS_PER_BALLOT: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("invalid ballot: {0}")]
    InvalidBallot(String),
    #[error("rankings cover different methods")]
    MethodMismatch,
    #[error("ranking has no untied pair")]
    DegenerateRanking,
    #[error("no items")]
    EmptyInput,
    #[error("kappa undefined: chance agreement is 1")]
    KappaUndefined,
    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("unknown category {value:?} at label {index}")]
    UnknownCategory { index: usize, value: String },
    #[error("conflicting ballots for sample {0} and no adjudication")]
    UnresolvedConflict(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One annotator's best and worst pick among four summaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ballot {
    pub sample_id: String,
    pub annotator_id: String,
    pub methods: Vec<String>,
    pub best: String,
    pub worst: String,
    /// Set on the ballot that settles a conflict for its sample.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub adjudicated: bool,
}

impl Ballot {
    pub fn validate(&self) -> Result<(), RankError> {
        let bad = |m: String| Err(RankError::InvalidBallot(format!("sample {}: {m}", self.sample_id)));
        if self.methods.len() != METHODS_PER_BALLOT {
            return bad(format!("{} methods, expected {METHODS_PER_BALLOT}", self.methods.len()));
        }
        if self.methods.iter().collect::<BTreeSet<_>>().len() != METHODS_PER_BALLOT {
            return bad("duplicate method names".into());
        }
        if self.best == self.worst {
            return bad("best equals worst".into());
        }
        for pick in [&self.best, &self.worst] {
            if !self.methods.contains(pick) {
                return bad(format!("{pick:?} is not among the methods"));
            }
        }
        Ok(())
    }

    /// The two methods neither picked best nor worst.
    pub fn middle(&self) -> Vec<&str> {
        self.methods
            .iter()
            .filter(|m| **m != self.best && **m != self.worst)
            .map(String::as_str)
            .collect()
    }

    /// 1 for best, 0 for worst, 0.5 otherwise.
    pub fn scores(&self) -> Vec<(&str, f64)> {
        self.methods
            .iter()
            .map(|m| {
                let s = if *m == self.best {
                    1.0
                } else if *m == self.worst {
                    0.0
                } else {
                    0.5
                };
                (m.as_str(), s)
            })
            .collect()
    }

    pub fn ranking(&self) -> Result<PartialRanking, RankError> {
        self.validate()?;
        let ranks = self.methods.iter().map(|m| {
            let r = if *m == self.best {
                1
            } else if *m == self.worst {
                4
            } else {
                2
            };
            (m.clone(), r)
        });
        Ok(PartialRanking::from_ranks(ranks))
    }
}

/// Method → rank, where equal ranks are ties. Lower is better.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialRanking {
    ranks: BTreeMap<String, u32>,
}

impl PartialRanking {
    pub fn from_ranks(ranks: impl IntoIterator<Item = (String, u32)>) -> Self {
        Self { ranks: ranks.into_iter().collect() }
    }

    pub fn rank(&self, method: &str) -> Option<u32> {
        self.ranks.get(method).copied()
    }

    pub fn methods(&self) -> impl Iterator<Item = &str> {
        self.ranks.keys().map(String::as_str)
    }
}

/// Kendall's τ-b over all method pairs.
pub fn kendall_tau_b(a: &PartialRanking, b: &PartialRanking) -> Result<f64, RankError> {
    if !a.ranks.keys().eq(b.ranks.keys()) {
        return Err(RankError::MethodMismatch);
    }
    let ra: Vec<i64> = a.ranks.values().map(|&r| r as i64).collect();
    let rb: Vec<i64> = b.ranks.values().map(|&r| r as i64).collect();
    let (mut concordant, mut discordant, mut ties_a, mut ties_b, mut pairs) = (0i64, 0i64, 0i64, 0i64, 0i64);
    for i in 0..ra.len() {
        for j in i + 1..ra.len() {
            pairs += 1;
            let (da, db) = ((ra[i] - ra[j]).signum(), (rb[i] - rb[j]).signum());
            ties_a += i64::from(da == 0);
            ties_b += i64::from(db == 0);
            match da * db {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }
    let denom = (((pairs - ties_a) * (pairs - ties_b)) as f64).sqrt();
    if denom == 0.0 {
        return Err(RankError::DegenerateRanking);
    }
    Ok((concordant - discordant) as f64 / denom)
}

/// Mean per-sample τ-b for one pair of annotators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorPairTau {
    pub annotator_a: String,
    pub annotator_b: String,
    pub mean_tau: f64,
    pub samples: usize,
}

/// τ-b for every annotator pair, averaged over the samples both rated.
/// Adjudicated ballots are ignored.
pub fn annotator_pair_tau(ballots: &[Ballot]) -> Result<Vec<AnnotatorPairTau>, RankError> {
    let mut by_sample: BTreeMap<&str, BTreeMap<&str, PartialRanking>> = BTreeMap::new();
    for b in ballots.iter().filter(|b| !b.adjudicated) {
        by_sample.entry(&b.sample_id).or_default().insert(&b.annotator_id, b.ranking()?);
    }
    let mut sums: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    for rankings in by_sample.values() {
        let annotators: Vec<&&str> = rankings.keys().collect();
        for (i, a) in annotators.iter().enumerate() {
            for b in &annotators[i + 1..] {
                let tau = kendall_tau_b(&rankings[**a], &rankings[**b])?;
                let entry = sums.entry((**a, **b)).or_default();
                entry.0 += tau;
                entry.1 += 1;
            }
        }
    }
    Ok(sums
        .into_iter()
        .map(|((a, b), (sum, n))| AnnotatorPairTau {
            annotator_a: a.to_string(),
            annotator_b: b.to_string(),
            mean_tau: sum / n as f64,
            samples: n,
        })
        .collect())
}

/// Per-method mean ballot score and how often it was picked best or worst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub best_rate: f64,
    pub worst_rate: f64,
}

pub fn score_ballots(ballots: &[Ballot]) -> Result<Vec<MethodScore>, RankError> {
    let mut per_method: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for ballot in ballots {
        ballot.validate()?;
        for (method, score) in ballot.scores() {
            per_method.entry(method).or_default().push(score);
        }
    }
    Ok(per_method
        .into_iter()
        .map(|(method, scores)| {
            let (mean, se) = mean_and_se(&scores);
            let n = scores.len();
            let rate = |target: f64| scores.iter().filter(|&&s| s == target).count() as f64 / n as f64;
            MethodScore {
                method: method.to_string(),
                n,
                mean,
                ci_low: mean - Z_95 * se,
                ci_high: mean + Z_95 * se,
                best_rate: rate(1.0),
                worst_rate: rate(0.0),
            }
        })
        .collect())
}

/// Which ballots feed the aggregate statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjudicationMode {
    /// Every annotator ballot; adjudications dropped.
    Pre,
    /// One ballot per sample: the adjudicated one, else the agreed or
    /// strict-majority choice.
    #[default]
    Post,
}

pub fn resolve_ballots(ballots: &[Ballot], mode: AdjudicationMode) -> Result<Vec<Ballot>, RankError> {
    for b in ballots {
        b.validate()?;
    }
    if mode == AdjudicationMode::Pre {
        return Ok(ballots.iter().filter(|b| !b.adjudicated).cloned().collect());
    }
    let mut order = Vec::new();
    let mut groups: HashMap<&str, Vec<&Ballot>> = HashMap::new();
    for b in ballots {
        let group = groups.entry(&b.sample_id).or_default();
        if group.is_empty() {
            order.push(b.sample_id.as_str());
        }
        group.push(b);
    }
    order
        .into_iter()
        .map(|sample| {
            let group = &groups[sample];
            if let Some(adj) = group.iter().rev().find(|b| b.adjudicated) {
                return Ok((*adj).clone());
            }
            let mut votes: BTreeMap<(&str, &str), usize> = BTreeMap::new();
            for b in group {
                *votes.entry((&b.best, &b.worst)).or_default() += 1;
            }
            let (&(best, worst), &count) = votes.iter().max_by_key(|(_, c)| **c).expect("non-empty group");
            if 2 * count <= group.len() && votes.len() > 1 {
                return Err(RankError::UnresolvedConflict(sample.to_string()));
            }
            let winner = group.iter().find(|b| b.best == best && b.worst == worst).expect("vote from group");
            Ok((*winner).clone())
        })
        .collect()
}

/// `[rankstats]` configuration section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankstatsConfig {
    pub adjudication: AdjudicationMode,
    pub plackett_luce: PlConfig,
    /// Method pairs for head-to-head binomial tests.
    pub head_to_head: Vec<(String, String)>,
}

impl Default for RankstatsConfig {
    fn default() -> Self {
        Self { adjudication: AdjudicationMode::Post, plackett_luce: PlConfig::default(), head_to_head: Vec::new() }
    }
}
