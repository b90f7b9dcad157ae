//! Exact two-sided binomial test and head-to-head comparisons.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

use super::{Ballot, RankError};

/// Relative slack when comparing point probabilities, so outcomes equally
/// likely to `k` are not lost to rounding.
const RELATIVE_TOLERANCE: f64 = 1.0 + 1e-7;

/// Sum of P(X = i) over all i with P(X = i) ≤ P(X = k), X ~ Bin(n, p0).
pub fn binomial_two_sided(k: u64, n: u64, p0: f64) -> Result<f64, RankError> {
    if k > n {
        return Err(RankError::InvalidArgument(format!("k = {k} exceeds n = {n}")));
    }
    let dist = Binomial::new(p0, n).map_err(|e| RankError::InvalidArgument(e.to_string()))?;
    let threshold = dist.pmf(k) * RELATIVE_TOLERANCE;
    let p: f64 = (0..=n).map(|i| dist.pmf(i)).filter(|&pi| pi <= threshold).sum();
    Ok(p.min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadToHead {
    pub method_a: String,
    pub method_b: String,
    /// Ballots where `method_a` scored higher.
    pub wins_a: u64,
    pub wins_b: u64,
    /// Ballots where both got the same score.
    pub ties: u64,
    pub p_value: f64,
}

/// Binomial test of `a` against `b` over ballots showing both, ties dropped.
pub fn head_to_head(ballots: &[Ballot], a: &str, b: &str) -> Result<HeadToHead, RankError> {
    let (mut wins_a, mut wins_b, mut ties) = (0, 0, 0);
    for ballot in ballots {
        ballot.validate()?;
        let scores = ballot.scores();
        let score = |m: &str| scores.iter().find(|(x, _)| *x == m).map(|(_, s)| *s);
        let (Some(sa), Some(sb)) = (score(a), score(b)) else { continue };
        match sa.partial_cmp(&sb) {
            Some(std::cmp::Ordering::Greater) => wins_a += 1,
            Some(std::cmp::Ordering::Less) => wins_b += 1,
            _ => ties += 1,
        }
    }
    let n = wins_a + wins_b;
    let p_value = if n == 0 { 1.0 } else { binomial_two_sided(wins_a, n, 0.5)? };
    Ok(HeadToHead { method_a: a.into(), method_b: b.into(), wins_a, wins_b, ties, p_value })
}
