//! Error-analysis tables: category shares per method and ballot outcome.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RankError;
use crate::metrics::Z_95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Win,
    Lose,
    Neither,
}

/// What the summary says about the content of the edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhatCategory {
    Correct,
    NoChange,
    NotSpecific,
    Unclear,
    Unexhaustive,
    Unrelated,
}

/// Whether the summary gives the reason for the edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhyCategory {
    Correct,
    Incorrect,
    Missing,
}

impl WhatCategory {
    pub const ALL: [Self; 6] =
        [Self::Correct, Self::NoChange, Self::NotSpecific, Self::Unclear, Self::Unexhaustive, Self::Unrelated];
}

impl WhyCategory {
    pub const ALL: [Self; 3] = [Self::Correct, Self::Incorrect, Self::Missing];
}

fn normalize(label: &str) -> String {
    label.trim().to_lowercase().replace(['_', '-'], " ")
}

impl FromStr for Outcome {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match normalize(s).as_str() {
            "win" => Ok(Self::Win),
            "lose" | "loss" => Ok(Self::Lose),
            "neither" => Ok(Self::Neither),
            _ => Err(()),
        }
    }
}

impl FromStr for WhatCategory {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match normalize(s).as_str() {
            "correct" => Ok(Self::Correct),
            "no change" => Ok(Self::NoChange),
            "not specific" => Ok(Self::NotSpecific),
            "unclear" => Ok(Self::Unclear),
            "unexhaustive" => Ok(Self::Unexhaustive),
            "unrelated" => Ok(Self::Unrelated),
            _ => Err(()),
        }
    }
}

impl FromStr for WhyCategory {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match normalize(s).as_str() {
            "correct" => Ok(Self::Correct),
            "incorrect" => Ok(Self::Incorrect),
            "missing" => Ok(Self::Missing),
            _ => Err(()),
        }
    }
}

/// One annotated summary as it appears in a labels file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorLabel {
    pub method: String,
    pub outcome: String,
    pub what: String,
    pub why: String,
}

/// A share with its normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub p: f64,
    pub half_width: f64,
}

impl Proportion {
    fn of(count: usize, n: usize) -> Self {
        let p = count as f64 / n as f64;
        Self { p, half_width: Z_95 * (p * (1.0 - p) / n as f64).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub method: String,
    pub outcome: Outcome,
    pub n: usize,
    pub what: BTreeMap<WhatCategory, Proportion>,
    pub why: BTreeMap<WhyCategory, Proportion>,
}

/// One row per (method, outcome) present in the labels, in that order.
pub fn tabulate_errors(labels: &[ErrorLabel]) -> Result<Vec<ErrorRow>, RankError> {
    let unknown = |index: usize, value: &str| RankError::UnknownCategory { index, value: value.to_string() };
    let mut groups: BTreeMap<(&str, Outcome), Vec<(WhatCategory, WhyCategory)>> = BTreeMap::new();
    for (index, label) in labels.iter().enumerate() {
        let outcome = label.outcome.parse().map_err(|_| unknown(index, &label.outcome))?;
        let what = label.what.parse().map_err(|_| unknown(index, &label.what))?;
        let why = label.why.parse().map_err(|_| unknown(index, &label.why))?;
        groups.entry((&label.method, outcome)).or_default().push((what, why));
    }
    Ok(groups
        .into_iter()
        .map(|((method, outcome), codes)| {
            let n = codes.len();
            let what = WhatCategory::ALL
                .iter()
                .map(|&c| (c, Proportion::of(codes.iter().filter(|(w, _)| *w == c).count(), n)))
                .collect();
            let why = WhyCategory::ALL
                .iter()
                .map(|&c| (c, Proportion::of(codes.iter().filter(|(_, y)| *y == c).count(), n)))
                .collect();
            ErrorRow { method: method.to_string(), outcome, n, what, why }
        })
        .collect())
}
