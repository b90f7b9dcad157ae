//! Plackett-Luce utilities from rankings with tied tiers.
//!
//! A ranking is a list of tiers, best first. Items inside a tier are tied;
//! the likelihood sums over every ordering of each tier. Fitting alternates
//! posterior weights over those orderings with a minorization-maximization
//! step for full rankings, so the observed log-likelihood never decreases.

use serde::{Deserialize, Serialize};

use super::{Ballot, RankError};

/// Utilities below this are clamped so the vector stays strictly positive.
const UTILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlConfig {
    pub max_iterations: usize,
    /// Stop when no log-utility moves by more than this.
    pub tolerance: f64,
}

impl Default for PlConfig {
    fn default() -> Self {
        Self { max_iterations: 10_000, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlFit {
    pub methods: Vec<String>,
    /// Positive, summing to 1, aligned with `methods`.
    pub utilities: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Some method can be pushed to the boundary (never beats part of the
    /// field), so its utility is not identified.
    pub degenerate: bool,
    /// Log-likelihood at the start and after every iteration.
    pub log_likelihood: Vec<f64>,
}

impl PlFit {
    pub fn utility(&self, method: &str) -> Option<f64> {
        self.methods.iter().position(|m| m == method).map(|i| self.utilities[i])
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// Every full ordering consistent with the tiers.
fn linear_extensions(tiers: &[Vec<usize>]) -> Vec<Vec<usize>> {
    tiers.iter().fold(vec![Vec::new()], |acc, tier| {
        let perms = permutations(tier);
        acc.iter()
            .flat_map(|prefix| {
                perms.iter().map(move |p| {
                    let mut o = prefix.clone();
                    o.extend(p);
                    o
                })
            })
            .collect()
    })
}

fn ordering_probability(order: &[usize], u: &[f64]) -> f64 {
    let mut remaining: f64 = order.iter().map(|&i| u[i]).sum();
    let mut p = 1.0;
    for &i in &order[..order.len().saturating_sub(1)] {
        p *= u[i] / remaining;
        remaining -= u[i];
    }
    p
}

fn log_likelihood(extensions: &[Vec<Vec<usize>>], u: &[f64]) -> f64 {
    extensions
        .iter()
        .map(|exts| exts.iter().map(|o| ordering_probability(o, u)).sum::<f64>().ln())
        .sum()
}

/// Whether every item can be reached from every other along "ranked at or
/// above" edges. Ties count in both directions.
fn strongly_connected(n: usize, rankings: &[Vec<Vec<usize>>]) -> bool {
    let mut forward = vec![Vec::new(); n];
    let mut backward = vec![Vec::new(); n];
    for tiers in rankings {
        for (t, tier) in tiers.iter().enumerate() {
            for &i in tier {
                let below = tiers[t + 1..].iter().flatten();
                for &j in tier.iter().filter(|&&j| j != i).chain(below) {
                    forward[i].push(j);
                    backward[j].push(i);
                }
            }
        }
    }
    let reaches_all = |graph: &[Vec<usize>]| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &graph[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    n == 0 || (reaches_all(&forward) && reaches_all(&backward))
}

/// Fit utilities for `methods` from tiered rankings of their indices.
pub fn fit_tiered(methods: Vec<String>, rankings: &[Vec<Vec<usize>>], config: &PlConfig) -> Result<PlFit, RankError> {
    let n = methods.len();
    if n == 0 || rankings.is_empty() {
        return Err(RankError::EmptyInput);
    }
    for tiers in rankings {
        let mut seen = vec![false; n];
        for &i in tiers.iter().flatten() {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(RankError::InvalidArgument(format!("bad item index {i} in ranking")));
            }
        }
    }
    let degenerate = !strongly_connected(n, rankings);
    let extensions: Vec<Vec<Vec<usize>>> = rankings.iter().map(|r| linear_extensions(r)).collect();

    let mut u = vec![1.0 / n as f64; n];
    let mut trace = vec![log_likelihood(&extensions, &u)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let mut wins = vec![0.0; n];
        let mut denom = vec![0.0; n];
        for exts in &extensions {
            let probs: Vec<f64> = exts.iter().map(|o| ordering_probability(o, &u)).collect();
            let total: f64 = probs.iter().sum();
            for (order, p) in exts.iter().zip(probs) {
                let w = p / total;
                let mut remaining: f64 = order.iter().map(|&i| u[i]).sum();
                for (t, &chosen) in order[..order.len() - 1].iter().enumerate() {
                    wins[chosen] += w;
                    for &j in &order[t..] {
                        denom[j] += w / remaining;
                    }
                    remaining -= u[chosen];
                }
            }
        }
        let mut next: Vec<f64> = (0..n)
            .map(|i| if denom[i] > 0.0 { (wins[i] / denom[i]).max(UTILITY_FLOOR) } else { u[i] })
            .collect();
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= sum);
        let delta = next.iter().zip(&u).map(|(a, b)| (a.ln() - b.ln()).abs()).fold(0.0, f64::max);
        u = next;
        trace.push(log_likelihood(&extensions, &u));
        if delta < config.tolerance {
            converged = true;
            break;
        }
    }
    if !converged && !degenerate {
        return Err(RankError::NonConvergence { iterations });
    }
    Ok(PlFit { methods, utilities: u, iterations, converged, degenerate, log_likelihood: trace })
}

/// Fit one utility per method from best/worst ballots, with the middle pair
/// tied.
pub fn fit_plackett_luce(ballots: &[Ballot], config: &PlConfig) -> Result<PlFit, RankError> {
    for b in ballots {
        b.validate()?;
    }
    let mut methods: Vec<String> = ballots.iter().flat_map(|b| b.methods.iter().cloned()).collect();
    methods.sort();
    methods.dedup();
    let index = |m: &str| methods.binary_search_by(|x| x.as_str().cmp(m)).expect("method collected");
    let rankings: Vec<Vec<Vec<usize>>> = ballots
        .iter()
        .map(|b| vec![vec![index(&b.best)], b.middle().into_iter().map(index).collect(), vec![index(&b.worst)]])
        .collect();
    fit_tiered(methods.clone(), &rankings, config)
}
