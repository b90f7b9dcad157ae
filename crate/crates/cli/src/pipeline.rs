//! Corpus-building subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use editsum_core::curator::{self, AnnotatedEdit, DatasetSample, RejectReason};
use editsum_core::diffcore::{self, SerializedInput, TokenizerRegistry, WordPieceTokenizer};
use editsum_core::ingest::{open_dump, ApiClient, IngestError, IngestedEdit};
use editsum_core::promptgen::{
    self, run_generation_job, sample_quality_check, GenerationItem, HttpChatClient, PromptBundle,
};

use crate::config::PipelineConfig;
use crate::error::Invalid;
use crate::schema::{self, DiffRecord};
use crate::{jsonl, IoArgs};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Source {
    Api,
    Dump,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, value_enum)]
    source: Source,
    /// Dump file (`dump`) or file of revision ids, one per line (`api`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Revision ids to fetch (`api`).
    #[arg(long, value_delimiter = ',')]
    revids: Vec<u64>,
    #[arg(long)]
    output: PathBuf,
    /// Fill in tags and editor data for dump records from the API.
    #[arg(long)]
    enrich: bool,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    requests_per_second: Option<f64>,
}

fn read_revids(path: &Path) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| Invalid(format!("{}:{}: not a revision id", path.display(), i + 1)).into())
        })
        .collect()
}

pub fn ingest(config: &PipelineConfig, args: IngestArgs) -> Result<()> {
    let mut ingest_config = config.ingest.clone();
    if let Some(e) = args.endpoint {
        ingest_config.endpoint = e;
    }
    if let Some(r) = args.requests_per_second {
        ingest_config.requests_per_second = r;
    }
    let edits: Vec<IngestedEdit> = match args.source {
        Source::Api => {
            let mut ids = args.revids;
            if let Some(path) = &args.input {
                ids.extend(read_revids(path)?);
            }
            let client = ApiClient::from_env(&ingest_config)?;
            let fetched: Vec<Result<Option<IngestedEdit>, IngestError>> = ids
                .par_iter()
                .map(|&id| match client.fetch_edit(id) {
                    Ok((edit, revision)) => Ok(Some(IngestedEdit { edit, revision })),
                    Err(IngestError::NotFound(what)) => {
                        warn!("skipping {what}");
                        Ok(None)
                    }
                    Err(e) => Err(e),
                })
                .collect();
            let mut out = Vec::new();
            for (id, r) in ids.iter().zip(fetched) {
                out.extend(r.with_context(|| format!("revision {id}"))?);
            }
            out
        }
        Source::Dump => {
            let path = args.input.ok_or_else(|| Invalid("--input dump path required".into()))?;
            let mut reader = open_dump(&path).with_context(|| format!("opening {}", path.display()))?;
            if args.enrich {
                reader = reader.with_enricher(Box::new(ApiClient::from_env(&ingest_config)?));
            }
            let mut out = Vec::new();
            for item in &mut reader {
                let (edit, revision) = item?;
                out.push(IngestedEdit { edit, revision });
            }
            info!("dump: {:?}", reader.stats());
            out
        }
    };
    jsonl::write(&args.output, schema::EDIT, &edits)?;
    println!("ingest: {} edits -> {}", edits.len(), args.output.display());
    Ok(())
}

pub fn diff(args: IoArgs) -> Result<()> {
    let edits: Vec<IngestedEdit> = jsonl::read(&args.input, schema::EDIT)?;
    let records: Vec<DiffRecord> = edits
        .into_par_iter()
        .map(|IngestedEdit { edit, revision }| {
            let diff = diffcore::extract_diff(&revision);
            let input = diffcore::serialize(&diff).ok();
            DiffRecord { edit, diff, input }
        })
        .collect();
    jsonl::write(&args.output, schema::DIFF, &records)?;
    let empty = records.iter().filter(|r| r.diff.is_empty()).count();
    println!("diff: {} edits ({empty} with no sentence change) -> {}", records.len(), args.output.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Diff records.
    #[arg(long)]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    min_summary_chars: Option<usize>,
    #[arg(long)]
    max_summary_chars: Option<usize>,
    #[arg(long)]
    min_editor_edits: Option<u64>,
    #[arg(long)]
    max_input_tokens: Option<usize>,
    #[arg(long)]
    duplicate_cap: Option<usize>,
    #[arg(long)]
    tokenizer: Option<String>,
    /// WordPiece vocabulary registered under the tokenizer name.
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct CurateReport {
    input: usize,
    kept: usize,
    rejected: usize,
    by_reason: BTreeMap<&'static str, usize>,
    by_rule: BTreeMap<&'static str, usize>,
}

pub fn curate(config: &mut PipelineConfig, args: CurateArgs) -> Result<()> {
    let c = &mut config.curator;
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = args.$field { c.$field = v; })* };
    }
    set!(min_summary_chars, max_summary_chars, min_editor_edits, max_input_tokens, duplicate_cap, tokenizer);
    config.validate()?;
    let c = &config.curator;

    let mut registry = TokenizerRegistry::default();
    if let Some(vocab) = &args.vocab {
        let wp = WordPieceTokenizer::from_vocab_file(c.tokenizer.clone(), vocab)
            .with_context(|| format!("reading {}", vocab.display()))?;
        registry.register(Arc::new(wp));
    }
    let tokenizer = registry.get(&c.tokenizer).map_err(|e| Invalid(e.to_string()))?;

    let records: Vec<DiffRecord> = jsonl::read(&args.input, schema::DIFF)?;
    let input = records.len();
    let annotated = curator::annotate(records.into_iter().map(|r| (r.edit, r.diff)).collect(), c);
    let outcome = curator::curate(annotated.clone(), c, tokenizer.as_ref());
    let rejected = outcome.rejects.len();
    if outcome.kept.len() + rejected != input {
        bail!("curation lost records: {} kept + {rejected} rejected != {input}", outcome.kept.len());
    }
    let samples: Vec<DatasetSample> = outcome
        .kept
        .iter()
        .map(curator::human_sample)
        .collect::<Result<_, _>>()
        .map_err(|e| Invalid(e.to_string()))?;

    let dir = &args.output;
    jsonl::write(&dir.join("annotated.jsonl"), schema::ANNOTATED, &annotated)?;
    jsonl::write(&dir.join("kept.jsonl"), schema::ANNOTATED, &outcome.kept)?;
    jsonl::write(&dir.join("rejects.jsonl"), schema::REJECT, &outcome.rejects)?;
    jsonl::write(&dir.join("human.jsonl"), schema::SAMPLE, &samples)?;
    let counts = outcome.reject_counts();
    let report = CurateReport {
        input,
        kept: outcome.kept.len(),
        rejected,
        by_reason: counts.iter().map(|(r, n)| (r.as_str(), *n)).collect(),
        by_rule: counts.iter().filter_map(|(r, n)| r.rule_id().map(|id| (id, *n))).collect(),
    };
    jsonl::write_json(&dir.join("report.json"), &report)?;
    println!("curate: {input} input, {} kept, {rejected} rejected -> {}", report.kept, dir.display());
    for reason in RejectReason::ALL {
        if let Some(n) = counts.get(&reason) {
            println!("  {:<20} {n}", reason.as_str());
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Annotated records to summarize.
    #[arg(long)]
    input: PathBuf,
    /// Synthetic samples.
    #[arg(long)]
    output: PathBuf,
    /// Defaults to the output path with `.checkpoint` appended.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    model: Option<String>,
    /// Replaces the shipped system instruction.
    #[arg(long)]
    instruction: Option<PathBuf>,
    /// Replaces the shipped demonstrations (JSON list of {input, summary}).
    #[arg(long)]
    demonstrations: Option<PathBuf>,
    /// Also write a blind quality-check sheet of this many rows.
    #[arg(long)]
    qc_sample: Option<usize>,
    /// Human samples paired with the synthetic ones for the sheet.
    #[arg(long, requires = "qc_sample")]
    human: Option<PathBuf>,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn synth(config: &mut PipelineConfig, args: SynthArgs) -> Result<()> {
    if let Some(c) = args.concurrency {
        config.promptgen.concurrency = c;
    }
    if let Some(m) = args.model {
        config.promptgen.model = m;
    }
    config.validate()?;
    let pg = &config.promptgen;

    let mut template = PromptBundle::with_defaults(SerializedInput::from_raw(String::new()));
    if let Some(p) = &args.instruction {
        template.system_instruction =
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?.trim_end().to_string();
    }
    if let Some(p) = &args.demonstrations {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        template.demonstrations = serde_json::from_str(&text).map_err(|e| Invalid(format!("{}: {e}", p.display())))?;
    }
    if template.demonstrations.len() != promptgen::DEMONSTRATION_COUNT {
        bail!(Invalid(format!("need {} demonstrations", promptgen::DEMONSTRATION_COUNT)));
    }

    let records: Vec<AnnotatedEdit> = jsonl::read(&args.input, schema::ANNOTATED)?;
    let items: Vec<GenerationItem> = records
        .iter()
        .filter_map(|r| match diffcore::serialize(&r.diff) {
            Ok(input) => Some(GenerationItem { revision_id: r.edit.revision_id, input }),
            Err(e) => {
                warn!("revision {}: {e}", r.edit.revision_id);
                None
            }
        })
        .collect();
    let client = HttpChatClient::from_env(pg)?;
    let checkpoint = args.checkpoint.unwrap_or_else(|| with_suffix(&args.output, ".checkpoint"));
    let report = run_generation_job(&items, &template, &pg.params, &client, pg.concurrency, &checkpoint)?;
    jsonl::write(&args.output, schema::SAMPLE, &report.samples)?;
    jsonl::write(&with_suffix(&args.output, ".failures"), schema::FAILURE, &report.failures)?;
    println!(
        "synth: {} samples ({} resumed), {} failures -> {}",
        report.samples.len(),
        report.resumed,
        report.failures.len(),
        args.output.display()
    );

    if let Some(n) = args.qc_sample {
        let human_path = args.human.ok_or_else(|| Invalid("--human is required with --qc-sample".into()))?;
        let human: Vec<DatasetSample> = jsonl::read(&human_path, schema::SAMPLE)?;
        let qc = sample_quality_check(&human, &report.samples, n, config.seed)?;
        let tsv = with_suffix(&args.output, ".qc.tsv");
        qc.write_tsv(std::fs::File::create(&tsv).with_context(|| format!("creating {}", tsv.display()))?)?;
        std::fs::write(with_suffix(&args.output, ".qc_key.json"), qc.key_json() + "\n")?;
        println!("synth: quality-check sheet with {n} rows -> {}", tsv.display());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long)]
    human: PathBuf,
    #[arg(long)]
    synthetic: PathBuf,
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    synthetic_fraction: Option<f64>,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    val: Option<usize>,
}

pub fn mix(config: &mut PipelineConfig, args: MixArgs) -> Result<()> {
    let spec = &mut config.dataset;
    if let Some(f) = args.synthetic_fraction {
        spec.synthetic_fraction = f;
    }
    if let Some(t) = args.train {
        spec.train_size = t;
    }
    if let Some(v) = args.val {
        spec.val_size = v;
    }
    spec.seed = config.seed;
    config.validate()?;
    let spec = &config.dataset;
    if !spec.is_standard_grid() {
        warn!("synthetic fraction {} is off the 0/0.25/0.5/0.75/1 grid", spec.synthetic_fraction);
    }
    let human: Vec<DatasetSample> = jsonl::read(&args.human, schema::SAMPLE)?;
    let synthetic: Vec<DatasetSample> = jsonl::read(&args.synthetic, schema::SAMPLE)?;
    let splits = curator::assemble_dataset(human, synthetic, spec).map_err(|e| Invalid(e.to_string()))?;
    let dir = &args.output;
    jsonl::write(&dir.join("train.jsonl"), schema::SAMPLE, &splits.train)?;
    jsonl::write(&dir.join("val.jsonl"), schema::SAMPLE, &splits.val)?;
    jsonl::write(&dir.join("test.jsonl"), schema::SAMPLE, &splits.test)?;
    let manifest = splits.manifest(spec);
    jsonl::write_json(&dir.join("manifest.json"), &manifest)?;
    println!(
        "mix: train {} synthetic / {} human, val {} / {}, test {} -> {}",
        manifest.train.synthetic,
        manifest.train.human,
        manifest.val.synthetic,
        manifest.val.human,
        manifest.test.human,
        dir.display()
    );
    Ok(())
}
