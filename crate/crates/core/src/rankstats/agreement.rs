//! Two-coder agreement for binary qualitative codes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RankError;

/// Editor-experience class used to stratify coded samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stratum {
    Ip,
    Newcomer,
    Mid,
    Experienced,
}

impl Stratum {
    /// IP editors, then under 10 edits, under 1000, and 1000 or more.
    pub fn from_editor(is_anonymous: bool, edit_count: u64) -> Self {
        match (is_anonymous, edit_count) {
            (true, _) => Self::Ip,
            (false, 0..=9) => Self::Newcomer,
            (false, 10..=999) => Self::Mid,
            _ => Self::Experienced,
        }
    }
}

/// One item as marked by the two coders for one category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodedItem {
    pub item_id: String,
    pub stratum: Stratum,
    #[serde(default)]
    pub category: String,
    pub coder_a: bool,
    pub coder_b: bool,
}

/// Returns (percent agreement, κ) with chance agreement from the product of
/// the coders' marginals.
pub fn cohen_kappa(items: &[CodedItem]) -> Result<(f64, f64), RankError> {
    if items.is_empty() {
        return Err(RankError::EmptyInput);
    }
    let n = items.len() as f64;
    let agree = items.iter().filter(|i| i.coder_a == i.coder_b).count() as f64 / n;
    let pa = items.iter().filter(|i| i.coder_a).count() as f64 / n;
    let pb = items.iter().filter(|i| i.coder_b).count() as f64 / n;
    let chance = pa * pb + (1.0 - pa) * (1.0 - pb);
    if (1.0 - chance).abs() < 1e-12 {
        return Err(RankError::KappaUndefined);
    }
    Ok((agree, (agree - chance) / (1.0 - chance)))
}

/// Share of items both coders marked (lower) and either marked (upper).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub n: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    fn of<'a>(items: impl Iterator<Item = &'a CodedItem>) -> Self {
        let (mut n, mut both, mut either) = (0usize, 0usize, 0usize);
        for i in items {
            n += 1;
            both += usize::from(i.coder_a && i.coder_b);
            either += usize::from(i.coder_a || i.coder_b);
        }
        let share = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        Self { n, lower: share(both), upper: share(either) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub overall: Bounds,
    pub by_stratum: BTreeMap<Stratum, Bounds>,
}

pub fn bound_ranges(items: &[CodedItem]) -> Result<BoundsReport, RankError> {
    if items.is_empty() {
        return Err(RankError::EmptyInput);
    }
    let mut strata: BTreeMap<Stratum, Vec<&CodedItem>> = BTreeMap::new();
    for item in items {
        strata.entry(item.stratum).or_default().push(item);
    }
    Ok(BoundsReport {
        overall: Bounds::of(items.iter()),
        by_stratum: strata.into_iter().map(|(s, v)| (s, Bounds::of(v.into_iter()))).collect(),
    })
}

/// One category row of the agreement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub category: String,
    pub n: usize,
    pub percent_agreement: f64,
    /// `None` when chance agreement is 1.
    pub kappa: Option<f64>,
    pub bounds: BoundsReport,
}

/// Agreement and bound ranges for each category, in name order.
pub fn agreement_table(items: &[CodedItem]) -> Result<Vec<AgreementRow>, RankError> {
    let mut by_category: BTreeMap<&str, Vec<CodedItem>> = BTreeMap::new();
    for item in items {
        by_category.entry(&item.category).or_default().push(item.clone());
    }
    by_category
        .into_iter()
        .map(|(category, group)| {
            let (percent_agreement, kappa) = match cohen_kappa(&group) {
                Ok((p, k)) => (p, Some(k)),
                Err(RankError::KappaUndefined) => (1.0, None),
                Err(e) => return Err(e),
            };
            Ok(AgreementRow {
                category: category.to_string(),
                n: group.len(),
                percent_agreement,
                kappa,
                bounds: bound_ranges(&group)?,
            })
        })
        .collect()
}
