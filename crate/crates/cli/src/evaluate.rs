//! Evaluation subcommands.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use editsum_core::metrics;
use editsum_core::rankstats::{
    self, AdjudicationMode, AgreementRow, AnnotatorPairTau, Ballot, CodedItem, ErrorLabel, ErrorRow, HeadToHead,
    MethodScore, PlFit,
};

use crate::config::PipelineConfig;
use crate::error::Invalid;
use crate::jsonl;
use crate::schema::{self, RankingRecord, ScorePair};

#[derive(Debug, Args)]
pub struct EvalAutoArgs {
    /// Candidate/reference pairs.
    #[arg(long)]
    input: PathBuf,
    /// Output directory, one JSON report per metric.
    #[arg(long)]
    output: PathBuf,
    /// Percentile bootstrap instead of the normal interval.
    #[arg(long)]
    bootstrap: bool,
    /// Skip the configured external scorer.
    #[arg(long)]
    no_external: bool,
}

pub fn eval_auto(config: &PipelineConfig, args: EvalAutoArgs) -> Result<()> {
    let mut mc = config.metrics.clone();
    if args.bootstrap {
        mc.ci = metrics::CiMethod::Bootstrap;
    }
    let pairs: Vec<ScorePair> = jsonl::read(&args.input, schema::PAIR)?;
    let pairs: Vec<(String, String)> = pairs.into_iter().map(|p| (p.candidate, p.reference)).collect();
    let mut reports = metrics::rouge_reports(&pairs, &mc, config.seed).map_err(|e| Invalid(e.to_string()))?;
    if let (Some(scorer), false) = (&mc.scorer, args.no_external) {
        let scores = metrics::external_score(&pairs, scorer)?;
        reports.push(metrics::aggregate_with("external", &scores, &mc, config.seed)?);
    }
    for r in &reports {
        jsonl::write_json(&args.output.join(format!("{}.json", r.metric_name)), r)?;
        println!("{:<9} mean {:.4}  95% CI [{:.4}, {:.4}]  n={}", r.metric_name, r.mean, r.ci_low, r.ci_high, r.n);
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalHumanArgs {
    /// Ballots, or tiered rankings when the file declares the ranking schema.
    #[arg(long)]
    input: PathBuf,
    /// JSON report.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    adjudication: Option<Mode>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum Mode {
    Pre,
    Post,
}

#[derive(Debug, Serialize)]
struct PlSummary {
    utilities: BTreeMap<String, f64>,
    iterations: usize,
    converged: bool,
    degenerate: bool,
    log_likelihood: f64,
}

impl From<PlFit> for PlSummary {
    fn from(fit: PlFit) -> Self {
        Self {
            utilities: fit.methods.into_iter().zip(fit.utilities).collect(),
            iterations: fit.iterations,
            converged: fit.converged,
            degenerate: fit.degenerate,
            log_likelihood: *fit.log_likelihood.last().expect("trace has the initial value"),
        }
    }
}

#[derive(Debug, Serialize)]
struct BallotReport {
    adjudication: AdjudicationMode,
    ballots: usize,
    scores: Vec<MethodScore>,
    annotator_tau: Vec<AnnotatorPairTau>,
    plackett_luce: PlSummary,
    head_to_head: Vec<HeadToHead>,
}

#[derive(Debug, Serialize)]
struct RankingReport {
    rankings: usize,
    plackett_luce: PlSummary,
}

fn invalid(e: rankstats::RankError) -> anyhow::Error {
    Invalid(e.to_string()).into()
}

fn eval_rankings(config: &PipelineConfig, args: &EvalHumanArgs) -> Result<()> {
    let records: Vec<RankingRecord> = jsonl::read(&args.input, schema::RANKING)?;
    for r in &records {
        r.validate().map_err(Invalid)?;
    }
    let mut methods: Vec<String> = records.iter().flat_map(|r| r.tiers.iter().flatten().cloned()).collect();
    methods.sort();
    methods.dedup();
    let index = |m: &String| methods.binary_search(m).expect("collected");
    let tiers: Vec<Vec<Vec<usize>>> =
        records.iter().map(|r| r.tiers.iter().map(|t| t.iter().map(index).collect()).collect()).collect();
    let fit = rankstats::fit_tiered(methods.clone(), &tiers, &config.rankstats.plackett_luce).map_err(invalid)?;
    let report = RankingReport { rankings: records.len(), plackett_luce: fit.into() };
    for (m, u) in &report.plackett_luce.utilities {
        println!("{m:<20} utility {u:.4}");
    }
    jsonl::write_json(&args.output, &report)
}

pub fn eval_human(config: &mut PipelineConfig, args: EvalHumanArgs) -> Result<()> {
    let (header, _) = jsonl::read_lines(&args.input)?;
    if header.is_some_and(|h| h.schema == schema::RANKING) {
        return eval_rankings(config, &args);
    }
    if let Some(mode) = args.adjudication {
        config.rankstats.adjudication = match mode {
            Mode::Pre => AdjudicationMode::Pre,
            Mode::Post => AdjudicationMode::Post,
        };
    }
    let rs = &config.rankstats;
    let raw: Vec<Ballot> = jsonl::read(&args.input, schema::BALLOT)?;
    let ballots = rankstats::resolve_ballots(&raw, rs.adjudication).map_err(invalid)?;
    let scores = rankstats::score_ballots(&ballots).map_err(invalid)?;
    let annotator_tau = rankstats::annotator_pair_tau(&raw).map_err(invalid)?;
    let fit = rankstats::fit_plackett_luce(&ballots, &rs.plackett_luce).map_err(invalid)?;
    let pairs: Vec<(String, String)> = if rs.head_to_head.is_empty() {
        let names: Vec<&String> = scores.iter().map(|s| &s.method).collect();
        names
            .iter()
            .enumerate()
            .flat_map(|(i, a)| names[i + 1..].iter().map(move |b| ((*a).clone(), (*b).clone())))
            .collect()
    } else {
        rs.head_to_head.clone()
    };
    let head_to_head = pairs
        .iter()
        .map(|(a, b)| rankstats::head_to_head(&ballots, a, b))
        .collect::<Result<Vec<_>, _>>()
        .map_err(invalid)?;
    let report = BallotReport {
        adjudication: rs.adjudication,
        ballots: ballots.len(),
        scores,
        annotator_tau,
        plackett_luce: fit.into(),
        head_to_head,
    };
    for s in &report.scores {
        let u = report.plackett_luce.utilities[&s.method];
        println!(
            "{:<20} score {:.3} [{:.3}, {:.3}]  best {:.2}  worst {:.2}  utility {u:.4}",
            s.method, s.mean, s.ci_low, s.ci_high, s.best_rate, s.worst_rate
        );
    }
    for h in &report.head_to_head {
        println!("{} vs {}: {}-{} (ties {}), p = {:.3}", h.method_a, h.method_b, h.wins_a, h.wins_b, h.ties, h.p_value);
    }
    jsonl::write_json(&args.output, &report)
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSON report.
    #[arg(long)]
    output: PathBuf,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Serialized name of a unit enum variant.
fn label<T: Serialize>(value: &T) -> String {
    serde_json::to_value(value).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn csv_writer(path: &PathBuf) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub fn qualcode(args: TableArgs) -> Result<()> {
    let items: Vec<CodedItem> = jsonl::read(&args.input, schema::CODED_ITEM)?;
    let rows: Vec<AgreementRow> = rankstats::agreement_table(&items).map_err(invalid)?;
    for r in &rows {
        let kappa = r.kappa.map_or("undefined".to_string(), |k| format!("{k:.2}"));
        let b = &r.bounds.overall;
        println!("{:<20} agreement {:.2}  kappa {kappa}  range {:.2} - {:.2}", r.category, r.percent_agreement, b.lower, b.upper);
    }
    if let Some(path) = &args.csv {
        let mut w = csv_writer(path)?;
        w.write_record(["category", "stratum", "n", "lower", "upper", "percent_agreement", "kappa"])?;
        for r in &rows {
            let kappa = r.kappa.map(|k| k.to_string()).unwrap_or_default();
            let overall = std::iter::once(("all".to_string(), &r.bounds.overall));
            let strata = r.bounds.by_stratum.iter().map(|(s, b)| (label(s), b));
            for (stratum, b) in overall.chain(strata) {
                w.write_record([
                    r.category.clone(),
                    stratum,
                    b.n.to_string(),
                    b.lower.to_string(),
                    b.upper.to_string(),
                    r.percent_agreement.to_string(),
                    kappa.clone(),
                ])?;
            }
        }
        w.flush()?;
    }
    jsonl::write_json(&args.output, &rows)
}

pub fn errors(args: TableArgs) -> Result<()> {
    let labels: Vec<ErrorLabel> = jsonl::read(&args.input, schema::ERROR_LABEL)?;
    let rows: Vec<ErrorRow> = rankstats::tabulate_errors(&labels).map_err(invalid)?;
    for r in &rows {
        println!("{} / {}: n={}", r.method, label(&r.outcome), r.n);
    }
    if let Some(path) = &args.csv {
        let mut w = csv_writer(path)?;
        w.write_record(["method", "outcome", "n", "meta", "category", "proportion", "half_width"])?;
        for r in &rows {
            let outcome = label(&r.outcome);
            let what = r.what.iter().map(|(c, p)| ("what", label(c), p));
            let why = r.why.iter().map(|(c, p)| ("why", label(c), p));
            for (meta, cat, p) in what.chain(why) {
                w.write_record([
                    r.method.clone(),
                    outcome.clone(),
                    r.n.to_string(),
                    meta.to_string(),
                    cat,
                    p.p.to_string(),
                    p.half_width.to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    jsonl::write_json(&args.output, &rows)
}
