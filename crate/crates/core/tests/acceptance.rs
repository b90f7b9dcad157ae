//! End-to-end acceptance checks. Each test writes one PASS/FAIL line to
//! stderr (uncaptured) before asserting.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use editsum_core::curator::{
    annotate, assemble_dataset, curate, CuratorConfig, DatasetSample, DatasetSpec, RejectReason, SampleSource,
};
use editsum_core::diffcore::{extract_diff, serialize, token_length, DiffError, SentenceDiff, SerializedInput, WhitespaceTokenizer};
use editsum_core::ingest::{EditRecord, RevisionPair};
use editsum_core::metrics::{rouge_l, rouge_n};
use editsum_core::promptgen::{build_messages, generate_summary, GenerationParams, HttpChatClient, PromptBundle, PromptgenConfig, Role};
use editsum_core::rankstats::{
    binomial_two_sided, cohen_kappa, fit_plackett_luce, kendall_tau_b, score_ballots, Ballot, CodedItem, PartialRanking,
    PlConfig, RankError, Stratum,
};

fn report(id: u32, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance {id}: {verdict} ({detail})");
}

#[test]
fn c1_binomial() {
    let _ = binomial_two_sided(1, 2, 0.5);
    let start = Instant::now();
    let p22 = binomial_two_sided(22, 46, 0.5).unwrap();
    let p24 = binomial_two_sided(24, 46, 0.5).unwrap();
    let elapsed = start.elapsed();
    let ok = format!("{p22:.3}") == "0.883" && p22 == p24 && elapsed < Duration::from_millis(1);
    report(1, ok, &format!("p(22/46) = {p22:.6}, p(24/46) = {p24:.6}, {elapsed:?} for both, need 0.883 and < 1ms"));
    assert!(ok);
}

const METHODS: [&str; 4] = ["edisum", "gpt4", "human", "t5"];

fn sample_ranking(rng: &mut ChaCha8Rng, utilities: &[f64]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..utilities.len()).collect();
    let mut order = Vec::new();
    while !left.is_empty() {
        let total: f64 = left.iter().map(|&i| utilities[i]).sum();
        let mut u = rng.gen::<f64>() * total;
        let mut pick = left.len() - 1;
        for (k, &i) in left.iter().enumerate() {
            if u < utilities[i] {
                pick = k;
                break;
            }
            u -= utilities[i];
        }
        order.push(left.remove(pick));
    }
    order
}

#[test]
fn c2_plackett_luce_recovery() {
    let truth = [0.072, 0.308, 0.276, 0.346];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    let (mut abs_error, mut max_sum_error, mut monotone) = (0.0, 0.0f64, true);
    let trials = 100;
    for trial in 0..trials {
        let ballots: Vec<Ballot> = (0..99)
            .map(|i| {
                let order = sample_ranking(&mut rng, &truth);
                Ballot {
                    sample_id: format!("{trial}-{i}"),
                    annotator_id: "a".into(),
                    methods: METHODS.iter().map(|m| m.to_string()).collect(),
                    best: METHODS[order[0]].into(),
                    worst: METHODS[order[3]].into(),
                    adjudicated: false,
                }
            })
            .collect();
        let fit = fit_plackett_luce(&ballots, &PlConfig::default()).unwrap();
        for (m, t) in METHODS.iter().zip(truth) {
            abs_error += (fit.utility(m).unwrap() - t).abs();
        }
        max_sum_error = max_sum_error.max((fit.utilities.iter().sum::<f64>() - 1.0).abs());
        monotone &= fit.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
    }
    let elapsed = start.elapsed();
    let mae = abs_error / (trials * truth.len()) as f64;
    let ok = mae < 0.05 && max_sum_error <= 1e-9 && monotone && elapsed < Duration::from_secs(10);
    report(
        2,
        ok,
        &format!("MAE {mae:.4} < 0.05, max |sum-1| {max_sum_error:.1e}, monotone {monotone}, {elapsed:?} < 10s"),
    );
    assert!(ok);
}

fn edit(id: u64, summary: &str) -> EditRecord {
    EditRecord {
        revision_id: id,
        parent_revision_id: id + 1000,
        page_title: "Robin".into(),
        editor_name: format!("Editor{id}"),
        editor_is_bot: false,
        editor_is_anonymous: false,
        editor_edit_count: 500,
        summary_raw: summary.into(),
        tags: BTreeSet::new(),
        timestamp: Utc.with_ymd_and_hms(2023, 8, 1, 0, 0, 0).unwrap() + chrono::Duration::minutes(id as i64),
    }
}

fn words_sentence(words: usize) -> String {
    let mut s = (0..words).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
    s.push('.');
    s
}

#[test]
fn c3_filter_rules() {
    use RejectReason::*;
    let diff = |id: u64| SentenceDiff::new(vec![], vec![format!("Robins sing {id}.")]);
    let mut cases: Vec<(EditRecord, SentenceDiff, Option<RejectReason>)> = Vec::new();
    cases.push((edit(1, "fixed typo"), SentenceDiff::default(), Some(NoSentenceChange)));
    cases.push((edit(2, "Created page with 'Robins'"), diff(2), Some(AutoSummary)));
    let mut e = edit(3, "fixed typo");
    e.editor_is_bot = true;
    cases.push((e, diff(3), Some(Bot)));
    let mut e = edit(4, "fixed typo");
    e.tags.insert("mw-reverted".into());
    cases.push((e, diff(4), Some(Reverted)));
    let mut e = edit(5, "fixed typo");
    e.tags.insert("mw-undo".into());
    cases.push((e, diff(5), Some(Revert)));
    cases.push((edit(6, "/* History */ "), diff(6), Some(BlankSummary)));
    cases.push((edit(7, "abcd"), diff(7), Some(TooShort)));
    cases.push((edit(8, "abcde"), diff(8), None));
    cases.push((edit(9, &"x".repeat(201)), diff(9), Some(TooLongSummary)));
    cases.push((edit(10, &"y".repeat(200)), diff(10), None));
    let mut e = edit(11, "low count");
    e.editor_edit_count = 29;
    cases.push((e, diff(11), Some(LowEditCount)));
    let mut e = edit(12, "enough edits");
    e.editor_edit_count = 30;
    cases.push((e, diff(12), None));
    let long = SentenceDiff::new(vec![], vec![words_sentence(1024)]);
    let fits = SentenceDiff::new(vec![], vec![words_sentence(1023)]);
    assert_eq!(token_length(&serialize(&long).unwrap(), &WhitespaceTokenizer), 1025);
    assert_eq!(token_length(&serialize(&fits).unwrap(), &WhitespaceTokenizer), 1024);
    cases.push((edit(13, "long input"), long, Some(TooLong)));
    cases.push((edit(14, "fits input"), fits, None));
    for id in 15..=18 {
        let expected = if id == 18 { Some(Duplicate) } else { None };
        cases.push((edit(id, "Fixed grammar"), diff(id), expected));
    }

    let expected: BTreeMap<u64, Option<RejectReason>> =
        cases.iter().map(|(e, _, r)| (e.revision_id, *r)).collect();
    let config = CuratorConfig::default();
    let annotated = annotate(cases.into_iter().map(|(e, d, _)| (e, d)).collect(), &config);
    let outcome = curate(annotated, &config, &WhitespaceTokenizer);
    let mut actual: BTreeMap<u64, Option<RejectReason>> =
        outcome.kept.iter().map(|k| (k.edit.revision_id, None)).collect();
    for r in &outcome.rejects {
        actual.insert(r.revision_id, Some(r.reason));
    }
    let mismatches: Vec<u64> = expected.keys().filter(|id| expected.get(id) != actual.get(id)).copied().collect();
    let ok = mismatches.is_empty() && actual.len() == expected.len();
    report(3, ok, &format!("{} records, {} kept, mismatches {mismatches:?}", expected.len(), outcome.kept.len()));
    assert_eq!(actual, expected);
}

fn pool(ids: std::ops::Range<u64>, source: SampleSource) -> Vec<DatasetSample> {
    ids.map(|id| DatasetSample {
        input: SerializedInput::from_raw(format!("<new_text> Sentence {id}.")),
        target: format!("summary {id}"),
        source,
        revision_id: id,
    })
    .collect()
}

#[test]
fn c4_mix_grid() {
    let mut details = Vec::new();
    let mut ok = true;
    for (s, want) in [(0.0, 0), (0.25, 250), (0.5, 500), (0.75, 750), (1.0, 1000)] {
        let spec = DatasetSpec { synthetic_fraction: s, train_size: 1000, val_size: 100, seed: 7 };
        let run = || {
            let splits = assemble_dataset(
                pool(0..3000, SampleSource::Human),
                pool(2000..4000, SampleSource::Synthetic),
                &spec,
            )
            .unwrap();
            let bytes = serde_json::to_vec(&(&splits.train, &splits.val, &splits.test)).unwrap();
            (splits, bytes)
        };
        let (splits, first) = run();
        let (_, second) = run();
        let synthetic = splits.train.iter().filter(|x| x.source == SampleSource::Synthetic).count();
        let mut ids = HashSet::new();
        let disjoint = splits.train.iter().chain(&splits.val).chain(&splits.test).all(|x| ids.insert(x.revision_id));
        let test_human = splits.test.iter().all(|x| x.source == SampleSource::Human);
        let this = synthetic == want && splits.train.len() == 1000 && disjoint && test_human && first == second;
        ok &= this;
        details.push(format!("S={s}: {synthetic}"));
    }
    report(4, ok, &format!("{}, disjoint and bit-identical reruns", details.join(", ")));
    assert!(ok);
}

#[test]
fn c5_diff_golden() {
    let cases: [(&str, &str, &str); 10] = [
        (
            "Robins sing.",
            "Robins sing. Zebra fact. Apple fact.",
            "<new_text> Apple fact. <sent_sep> Zebra fact.",
        ),
        ("Zebras run. Apples fall.", "Apples fall.", "<old_text> Zebras run."),
        ("", "Cats purr. Dogs bark.", "<new_text> Cats purr. <sent_sep> Dogs bark."),
        (
            "The bird is red. It sings.",
            "The bird is blue. It sings.",
            "<old_text> The bird is red. <new_text> The bird is blue.",
        ),
        (
            "Robins eat worms.",
            "Robins eat worms.<ref>Smith 2001</ref>",
            "<old_text> Robins eat worms. <new_text> Robins eat worms.[ref]",
        ),
        (
            "Robins live in [[Europe]].",
            "Robins live in [[Europe|western Europe]].",
            "<old_text> Robins live in Europe. <new_text> Robins live in western Europe.",
        ),
        ("Yes. Yes.", "Yes.", "<old_text> Yes."),
        (
            "Dr. Smith wrote it.",
            "Dr. Smith wrote it. Mr. Jones agreed.",
            "<new_text> Mr. Jones agreed.",
        ),
        (
            "Alpha one. Beta two.",
            "Zed three. Émile four. Bob five.",
            "<old_text> Alpha one. <sent_sep> Beta two. <new_text> Bob five. <sent_sep> Zed three. <sent_sep> Émile four.",
        ),
        (
            "== History ==\nThe '''robin''' is small.\n[[Category:Birds]]",
            "== History ==\nThe '''robin''' is small.\n\nIt was named in 1850! Was it?\n{{Infobox bird}}",
            "<new_text> It was named in 1850! <sent_sep> Was it?",
        ),
    ];
    let mut failures = Vec::new();
    for (i, (old, new, golden)) in cases.iter().enumerate() {
        let pair = RevisionPair { old_text: old.to_string(), new_text: new.to_string() };
        let got = serialize(&extract_diff(&pair)).map(SerializedInput::into_string);
        if got.as_deref() != Ok(*golden) {
            failures.push(format!("case {}: {got:?}", i + 1));
        }
    }
    let markup_only = RevisionPair {
        old_text: "Robins sing.\n[[Category:Birds]]".into(),
        new_text: "Robins sing.\n{{Infobox bird}}\n[[Category:Songbirds]]".into(),
    };
    let empty_ok = matches!(serialize(&extract_diff(&markup_only)), Err(DiffError::EmptyDiff));
    let ok = failures.is_empty() && empty_ok;
    report(5, ok, &format!("10 golden strings, {} mismatches, markup-only change empty: {empty_ok}", failures.len()));
    assert!(ok, "{failures:?}");
}

fn ngrams(tokens: &[&str], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n).map(|i| tokens[i..i + n].iter().map(|t| t.to_string()).collect()).collect()
}

fn f1(overlap: f64, cand: f64, refr: f64) -> f64 {
    if overlap == 0.0 {
        return 0.0;
    }
    let (p, r) = (overlap / cand, overlap / refr);
    2.0 * p * r / (p + r)
}

fn oracle_rouge_n(c: &[&str], r: &[&str], n: usize) -> f64 {
    let (cg, rg) = (ngrams(c, n), ngrams(r, n));
    if cg.is_empty() || rg.is_empty() {
        return if cg.is_empty() && rg.is_empty() && c == r { 1.0 } else { 0.0 };
    }
    let mut remaining = rg.clone();
    let mut overlap = 0.0;
    for g in &cg {
        if let Some(pos) = remaining.iter().position(|x| x == g) {
            remaining.remove(pos);
            overlap += 1.0;
        }
    }
    f1(overlap, cg.len() as f64, rg.len() as f64)
}

fn is_subsequence(sub: &[&str], of: &[&str]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|s| it.any(|o| o == s))
}

fn oracle_rouge_l(c: &[&str], r: &[&str]) -> f64 {
    if c.is_empty() || r.is_empty() {
        return if c.is_empty() && r.is_empty() { 1.0 } else { 0.0 };
    }
    let mut best = 0;
    for mask in 0u32..(1 << c.len()) {
        let sub: Vec<&str> = (0..c.len()).filter(|i| mask & (1 << i) != 0).map(|i| c[i]).collect();
        if sub.len() > best && is_subsequence(&sub, r) {
            best = sub.len();
        }
    }
    f1(best as f64, c.len() as f64, r.len() as f64)
}

fn all_sequences(alphabet: &[&'static str], max_len: usize) -> Vec<Vec<&'static str>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for a in alphabet {
                let mut s: Vec<&str> = seq.clone();
                s.push(a);
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[test]
fn c6_rouge_oracle() {
    let seqs = all_sequences(&["a", "b", "c"], 5);
    let texts: Vec<String> = seqs.iter().map(|s| s.join(" ")).collect();
    let mut mismatches = 0usize;
    let mut pairs = 0usize;
    for (c, ct) in seqs.iter().zip(&texts) {
        for (r, rt) in seqs.iter().zip(&texts) {
            pairs += 1;
            let got = [rouge_n(ct, rt, 1), rouge_n(ct, rt, 2), rouge_l(ct, rt)];
            let want = [oracle_rouge_n(c, r, 1), oracle_rouge_n(c, r, 2), oracle_rouge_l(c, r)];
            if got.iter().zip(want).any(|(g, w)| (g - w).abs() > 1e-12) {
                mismatches += 1;
            }
        }
    }
    let examples = rouge_n("Added a citation", "Added a citation", 1) == 1.0
        && rouge_n("Added a citation", "fixed typo", 2) == 0.0
        && rouge_n("fixed typo", "removed vandalism", 1) == 0.0
        && rouge_l("Added a citation", "Added a citation") == 1.0
        && rouge_l("", "fixed typo") == 0.0;
    let ok = mismatches == 0 && examples;
    report(6, ok, &format!("{pairs} sequence pairs, {mismatches} mismatches, examples hold: {examples}"));
    assert!(ok);
}

/// Every weak order of four items as a rank vector.
fn weak_orders() -> Vec<[u32; 4]> {
    let mut out = Vec::new();
    for code in 0..4u32.pow(4) {
        let r = [code % 4, code / 4 % 4, code / 16 % 4, code / 64];
        let used: BTreeSet<u32> = r.iter().copied().collect();
        if used.iter().copied().eq(0..used.len() as u32) {
            out.push(r);
        }
    }
    out
}

fn oracle_tau(a: &[u32; 4], b: &[u32; 4]) -> Option<f64> {
    let sign = |x: u32, y: u32| (x as i64 - y as i64).signum();
    let (mut num, mut sa, mut sb) = (0i64, 0i64, 0i64);
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                let (x, y) = (sign(a[i], a[j]), sign(b[i], b[j]));
                num += x * y;
                sa += x * x;
                sb += y * y;
            }
        }
    }
    (sa > 0 && sb > 0).then(|| num as f64 / ((sa * sb) as f64).sqrt())
}

fn closed_form_kappa(both: usize, a_only: usize, b_only: usize, neither: usize) -> Option<f64> {
    let n = (both + a_only + b_only + neither) as f64;
    let p_o = (both + neither) as f64 / n;
    let (pa, pb) = ((both + a_only) as f64 / n, (both + b_only) as f64 / n);
    let p_e = pa * pb + (1.0 - pa) * (1.0 - pb);
    (p_e < 1.0).then(|| (p_o - p_e) / (1.0 - p_e))
}

fn coded_items(both: usize, a_only: usize, b_only: usize, neither: usize) -> Vec<CodedItem> {
    let cells = [(both, true, true), (a_only, true, false), (b_only, false, true), (neither, false, false)];
    cells
        .iter()
        .flat_map(|&(count, a, b)| (0..count).map(move |_| (a, b)))
        .enumerate()
        .map(|(i, (coder_a, coder_b))| CodedItem {
            item_id: i.to_string(),
            stratum: Stratum::Mid,
            category: "inappropriate".into(),
            coder_a,
            coder_b,
        })
        .collect()
}

#[test]
fn c7_rank_statistics() {
    let orders = weak_orders();
    let names = ["a", "b", "c", "d"];
    let ranking = |r: &[u32; 4]| PartialRanking::from_ranks(names.iter().map(|n| n.to_string()).zip(r.iter().copied()));
    let mut tau_mismatches = 0;
    for a in &orders {
        for b in &orders {
            let got = kendall_tau_b(&ranking(a), &ranking(b));
            let matches = match oracle_tau(a, b) {
                Some(want) => got.is_ok_and(|g| (g - want).abs() < 1e-12),
                None => got == Err(RankError::DegenerateRanking),
            };
            tau_mismatches += usize::from(!matches);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut tables = vec![(0, 1, 1, 98)];
    while tables.len() < 50 {
        tables.push((rng.gen_range(0..30), rng.gen_range(0..30), rng.gen_range(0..30), rng.gen_range(0..30)));
    }
    let mut kappa_mismatches = 0;
    for &(both, a_only, b_only, neither) in &tables {
        let items = coded_items(both, a_only, b_only, neither);
        let got = cohen_kappa(&items);
        let matches = match (got, closed_form_kappa(both, a_only, b_only, neither)) {
            (Ok((_, k)), Some(want)) => (k - want).abs() < 1e-12,
            (Err(RankError::KappaUndefined), None) => true,
            (Err(RankError::EmptyInput), _) => both + a_only + b_only + neither == 0,
            _ => false,
        };
        kappa_mismatches += usize::from(!matches);
    }
    let (agreement, kappa) = cohen_kappa(&coded_items(0, 1, 1, 98)).unwrap();
    let phenomenon = agreement == 0.98 && kappa < 0.0 && (kappa + 0.01).abs() < 0.001;
    let ok = tau_mismatches == 0 && kappa_mismatches == 0 && phenomenon;
    report(
        7,
        ok,
        &format!(
            "{} rank-pair checks, {tau_mismatches} tau mismatches; 50 tables, {kappa_mismatches} kappa mismatches; \
             0.98 agreement gives kappa {kappa:.4}",
            orders.len() * orders.len()
        ),
    );
    assert!(ok);
}

#[test]
fn c8_ballot_scores_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = 0;
    for i in 0..10_000 {
        let best = rng.gen_range(0..4);
        let worst = (best + rng.gen_range(1..4)) % 4;
        let ballot = Ballot {
            sample_id: i.to_string(),
            annotator_id: "a".into(),
            methods: METHODS.iter().map(|m| m.to_string()).collect(),
            best: METHODS[best].into(),
            worst: METHODS[worst].into(),
            adjudicated: false,
        };
        let total: f64 = score_ballots(std::slice::from_ref(&ballot)).unwrap().iter().map(|s| s.mean).sum();
        let direct: f64 = ballot.scores().iter().map(|(_, s)| s).sum();
        bad += usize::from(total != 2.0 || direct != 2.0);
    }
    report(8, bad == 0, &format!("10000 random ballots, {bad} with score sum != 2"));
    assert_eq!(bad, 0);
}

#[test]
fn c9_prompt_assembly() {
    let bundle = PromptBundle::with_defaults(SerializedInput::from_raw(
        "<old_text> Robins are red. <new_text> Robins are orange. <sent_sep> They sing.".into(),
    ));
    let messages = build_messages(&bundle).unwrap();
    let structure = messages.len() == 12
        && messages[0].role == Role::System
        && messages[1..].iter().enumerate().all(|(i, m)| m.role == if i % 2 == 0 { Role::User } else { Role::Assistant });

    let fx = common::chat_fixture(vec![]);
    let client = HttpChatClient::new(&fx.base, "k", &PromptgenConfig::default()).unwrap();
    let params = GenerationParams::default();
    let first = generate_summary(&bundle, &params, &client).unwrap();
    let second = generate_summary(&bundle, &params, &client).unwrap();
    let reproducible = first.as_bytes() == second.as_bytes();
    let stopped = first == "Added Robins are red." && !first.contains('\n');
    let ok = structure && reproducible && stopped;
    report(9, ok, &format!("12 alternating messages: {structure}; reproducible: {reproducible}; summary {first:?}"));
    assert!(ok);
}
