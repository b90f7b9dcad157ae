use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn editsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_editsum"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_jsonl(path: &Path, schema: &str, records: &[Value]) {
    let mut text = format!("{{\"schema\":\"{schema}\",\"version\":1}}\n");
    for r in records {
        text.push_str(&r.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn edit(id: u64, summary: &str) -> Value {
    json!({
        "revision_id": id,
        "parent_revision_id": id + 10_000,
        "page_title": "Robin",
        "editor_name": format!("Editor{id}"),
        "editor_is_bot": false,
        "editor_edit_count": 500,
        "summary_raw": summary,
        "tags": [],
        "timestamp": format!("2023-08-01T00:{:02}:00Z", id % 60),
    })
}

fn diff_record(edit: Value, added: &[&str]) -> Value {
    json!({ "edit": edit, "diff": { "removed": [], "added": added } })
}

fn one_violation_per_rule() -> Vec<Value> {
    let mut bot = edit(3, "fixed typo");
    bot["editor_is_bot"] = json!(true);
    let mut reverted = edit(4, "fixed typo");
    reverted["tags"] = json!(["mw-reverted"]);
    let mut revert = edit(5, "fixed typo");
    revert["tags"] = json!(["mw-undo"]);
    vec![
        diff_record(edit(1, "fixed typo"), &[]),
        diff_record(edit(2, "Created page with 'Robins sing'"), &["Robins sing."]),
        diff_record(bot, &["Robins sing."]),
        diff_record(reverted, &["Robins sing."]),
        diff_record(revert, &["Robins sing."]),
        diff_record(edit(6, "/* Habitat */ "), &["Robins sing."]),
    ]
}

#[test]
fn curate_rejects_one_record_per_rule() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("diffs.jsonl");
    write_jsonl(&input, "diff", &one_violation_per_rule());
    let out = dir.path().join("curated");
    let o = editsum(&["curate", "--input", path(&input), "--output", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let report = read_json(&out.join("report.json"));
    assert_eq!(report["kept"], 0);
    assert_eq!(report["rejected"], 6);
    for rule in ["i", "ii", "iii", "iv", "v", "vi"] {
        assert_eq!(report["by_rule"][rule], 1, "rule {rule}");
    }
    let rejects = read_jsonl(&out.join("rejects.jsonl"));
    let reasons: Vec<&str> = rejects.iter().map(|r| r["reason"].as_str().unwrap()).collect();
    assert_eq!(reasons, ["no_sentence_change", "auto_summary", "bot", "reverted", "revert", "blank_summary"]);
    assert!(read_jsonl(&out.join("kept.jsonl")).is_empty());
}

#[test]
fn curate_counts_add_up_and_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("diffs.jsonl");
    let mut records = one_violation_per_rule();
    for id in 10..20 {
        records.push(diff_record(edit(id, "added links"), &["Robins sing."]));
    }
    let mut low = edit(30, "copyedit");
    low["editor_edit_count"] = json!(29);
    records.push(diff_record(low, &["Robins sing."]));
    write_jsonl(&input, "diff", &records);

    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = editsum(&["curate", "--input", path(&input), "--output", path(&out), "--duplicate-cap", "2"]);
        assert!(o.status.success());
        out
    };
    let (a, b) = (run("a"), run("b"));
    let report = read_json(&a.join("report.json"));
    assert_eq!(report["input"], 17);
    assert_eq!(report["kept"], 2);
    assert_eq!(report["by_reason"]["duplicate"], 8);
    assert_eq!(report["by_reason"]["low_edit_count"], 1);
    for f in ["annotated.jsonl", "kept.jsonl", "rejects.jsonl", "human.jsonl", "report.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let human = read_jsonl(&a.join("human.jsonl"));
    assert_eq!(human[0]["input"], "<new_text> Robins sing.");
    assert_eq!(human[0]["source"], "human");
}

fn sample(id: u64, source: &str) -> Value {
    json!({ "input": format!("<new_text> S{id}."), "target": format!("t{id}"), "source": source, "revision_id": id })
}

#[test]
fn mix_reports_requested_proportion() {
    let dir = tempfile::tempdir().unwrap();
    let human = dir.path().join("human.jsonl");
    let synthetic = dir.path().join("synthetic.jsonl");
    write_jsonl(&human, "sample", &(0..30_000).map(|i| sample(i, "human")).collect::<Vec<_>>());
    write_jsonl(&synthetic, "sample", &(100_000..185_000).map(|i| sample(i, "synthetic")).collect::<Vec<_>>());
    let out = dir.path().join("mix");
    let o = editsum(&[
        "mix",
        "--human",
        path(&human),
        "--synthetic",
        path(&synthetic),
        "--output",
        path(&out),
        "--synthetic-fraction",
        "0.75",
        "--train",
        "100000",
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["train"]["synthetic"], 75_000);
    assert_eq!(m["train"]["human"], 25_000);
    assert_eq!(m["val"]["synthetic"], 7_500);
    assert_eq!(m["test"]["human"], 30_000 - 25_000 - 2_500);
    assert_eq!(m["test"]["synthetic"], 0);
    assert_eq!(m["seed"], 3);
}

#[test]
fn mix_with_small_pool_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let human = dir.path().join("human.jsonl");
    write_jsonl(&human, "sample", &[sample(1, "human")]);
    let o = editsum(&[
        "mix", "--human", path(&human), "--synthetic", path(&human), "--output", path(dir.path()), "--train", "10",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_human_two_method_rankings() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("rankings.jsonl");
    let r = |id: &str, first: &str, second: &str| json!({ "sample_id": id, "tiers": [[first], [second]] });
    write_jsonl(&input, "ranking", &[r("1", "A", "B"), r("2", "A", "B"), r("3", "A", "B"), r("4", "B", "A")]);
    let out = dir.path().join("report.json");
    let o = editsum(&["eval-human", "--input", path(&input), "--output", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out);
    let u = &report["plackett_luce"]["utilities"];
    let (a, b) = (u["A"].as_f64().unwrap(), u["B"].as_f64().unwrap());
    assert!((a / b - 3.0).abs() < 1e-6);
}

fn ballot(sample: &str, annotator: &str, best: &str, worst: &str) -> Value {
    json!({
        "sample_id": sample,
        "annotator_id": annotator,
        "methods": ["edisum", "gpt4", "human", "t5"],
        "best": best,
        "worst": worst,
    })
}

#[test]
fn eval_human_ballot_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ballots.jsonl");
    let picks = [
        ("gpt4", "t5"),
        ("gpt4", "human"),
        ("edisum", "t5"),
        ("human", "gpt4"),
        ("gpt4", "edisum"),
        ("t5", "human"),
        ("edisum", "gpt4"),
        ("human", "t5"),
    ];
    let mut ballots = Vec::new();
    for (i, (best, worst)) in picks.iter().enumerate() {
        ballots.push(ballot(&i.to_string(), "a", best, worst));
        ballots.push(ballot(&i.to_string(), "b", best, worst));
    }
    write_jsonl(&input, "ballot", &ballots);
    let out = dir.path().join("report.json");
    let o = editsum(&["eval-human", "--input", path(&input), "--output", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out);
    assert_eq!(report["ballots"], 8);
    assert_eq!(report["annotator_tau"][0]["mean_tau"], 1.0);
    let total: f64 = report["scores"].as_array().unwrap().iter().map(|s| s["mean"].as_f64().unwrap()).sum();
    assert!((total - 2.0).abs() < 1e-12);
    let utilities = report["plackett_luce"]["utilities"].as_object().unwrap();
    let sum: f64 = utilities.values().map(|v| v.as_f64().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-9);
    assert_eq!(report["head_to_head"].as_array().unwrap().len(), 6);

    let pre = dir.path().join("pre.json");
    let o = editsum(&["eval-human", "--input", path(&input), "--output", path(&pre), "--adjudication", "pre"]);
    assert!(o.status.success());
    assert_eq!(read_json(&pre)["ballots"], 16);
}

#[test]
fn validate_reports_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.jsonl");
    write_jsonl(&good, "ballot", &[ballot("1", "a", "gpt4", "t5")]);
    assert_eq!(editsum(&["validate", "--input", path(&good)]).status.code(), Some(0));

    let bad = dir.path().join("bad.jsonl");
    write_jsonl(&bad, "ballot", &[ballot("1", "a", "gpt4", "t5"), ballot("2", "a", "t5", "t5")]);
    let o = editsum(&["validate", "--input", path(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("bad.jsonl:3:"), "{stdout}");

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(editsum(&["validate", "--input", path(&empty)]).status.code(), Some(0));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let o = editsum(&["diff", "--input", path(&missing), "--output", path(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));

    let config = dir.path().join("c.toml");
    std::fs::write(&config, "[curator]\nduplicate_cap = 0\n").unwrap();
    let o = editsum(&["--config", path(&config), "validate", "--input", path(&missing)]);
    assert_eq!(o.status.code(), Some(1));

    std::fs::write(&config, "[curator]\nno_such_key = 1\n").unwrap();
    let o = editsum(&["--config", path(&config), "validate", "--input", path(&missing)]);
    assert_eq!(o.status.code(), Some(1));

    assert_eq!(editsum(&["curate", "--bogus"]).status.code(), Some(1));
}

#[test]
fn ingest_dump_then_diff() {
    let dir = tempfile::tempdir().unwrap();
    let rev = |id: u64, parent: Option<u64>, comment: &str, text: &str| {
        let parent = parent.map(|p| format!("<parentid>{p}</parentid>")).unwrap_or_default();
        format!(
            "<revision><id>{id}</id>{parent}<timestamp>2023-08-01T12:00:0{id}Z</timestamp>\
             <contributor><username>Ann</username><id>7</id></contributor><comment>{comment}</comment>\
             <model>wikitext</model><format>text/x-wiki</format><text xml:space=\"preserve\">{text}</text></revision>"
        )
    };
    let xml = format!(
        "<mediawiki><siteinfo><sitename>W</sitename></siteinfo><page><title>Robin</title><ns>0</ns><id>1</id>{}{}</page></mediawiki>",
        rev(1, None, "new", "Robins sing. They eat worms."),
        rev(2, Some(1), "/* Diet */ berries", "Robins sing. They eat worms and berries."),
    );
    let dump = dir.path().join("dump.xml");
    std::fs::write(&dump, xml).unwrap();
    let edits = dir.path().join("edits.jsonl");
    let o = editsum(&["ingest", "--source", "dump", "--input", path(&dump), "--output", path(&edits)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let recs = read_jsonl(&edits);
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["edit"]["summary_raw"], "/* Diet */ berries");

    let diffs = dir.path().join("diffs.jsonl");
    assert!(editsum(&["diff", "--input", path(&edits), "--output", path(&diffs)]).status.success());
    let d = read_jsonl(&diffs);
    assert_eq!(d[0]["input"], "<old_text> They eat worms. <new_text> They eat worms and berries.");
}

#[test]
fn eval_auto_writes_rouge_reports() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pairs.jsonl");
    write_jsonl(
        &input,
        "pair",
        &[
            json!({"candidate": "the cat", "reference": "the cat sat"}),
            json!({"candidate": "added links", "reference": "Added links"}),
        ],
    );
    let out = dir.path().join("auto");
    let o = editsum(&["eval-auto", "--input", path(&input), "--output", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r1 = read_json(&out.join("rouge1.json"));
    assert!((r1["mean"].as_f64().unwrap() - 0.9).abs() < 1e-12);
    assert_eq!(r1["n"], 2);
    assert!(out.join("rouge2.json").exists() && out.join("rougeL.json").exists());
}

#[test]
fn qualcode_and_errors_tables() {
    let dir = tempfile::tempdir().unwrap();
    let coded = dir.path().join("coded.jsonl");
    let item = |i: u32, a: bool, b: bool| {
        json!({"item_id": i.to_string(), "stratum": "mid", "category": "summary", "coder_a": a, "coder_b": b})
    };
    write_jsonl(&coded, "coded_item", &[item(1, true, true), item(2, true, false), item(3, false, false)]);
    let out = dir.path().join("q.json");
    let csv = dir.path().join("q.csv");
    let o = editsum(&["qualcode", "--input", path(&coded), "--output", path(&out), "--csv", path(&csv)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_json(&out);
    assert!((rows[0]["bounds"]["overall"]["lower"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!(std::fs::read_to_string(&csv).unwrap().contains("summary,mid,3"));

    let labels = dir.path().join("labels.jsonl");
    let label = |what: &str| json!({"method": "gpt4", "outcome": "win", "what": what, "why": "missing"});
    write_jsonl(&labels, "error_label", &[label("Correct"), label("Unclear")]);
    let out = dir.path().join("e.json");
    assert!(editsum(&["errors", "--input", path(&labels), "--output", path(&out)]).status.success());
    assert_eq!(read_json(&out)[0]["what"]["correct"]["p"], 0.5);

    write_jsonl(&labels, "error_label", &[label("Vague")]);
    assert_eq!(editsum(&["errors", "--input", path(&labels), "--output", path(&out)]).status.code(), Some(1));
}

/// Chat endpoint that summarizes the final user turn and appends a second line.
fn chat_fixture() -> String {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let base = format!("http://{}/v1", server.server_addr().to_ip().unwrap());
    std::thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).unwrap();
            let v: Value = serde_json::from_str(&body).unwrap();
            let last = v["messages"].as_array().unwrap().last().unwrap()["content"].as_str().unwrap().to_string();
            let reply = json!({"choices": [{"message": {"role": "assistant", "content": format!("Edited: {last}\nmore")}}]});
            req.respond(tiny_http::Response::from_string(reply.to_string())).unwrap();
        }
    });
    base
}


#[test]
fn synth_against_fixture_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("diffs.jsonl");
    let mut records = Vec::new();
    for id in 1..=5 {
        records.push(diff_record(edit(id, &format!("summary {id}")), &[&format!("Sentence {id}.")]));
    }
    write_jsonl(&input, "diff", &records);
    let curated = dir.path().join("curated");
    assert!(editsum(&["curate", "--input", path(&input), "--output", path(&curated)]).status.success());

    let base = chat_fixture();
    let output = dir.path().join("synthetic.jsonl");
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_editsum"))
            .args([
                "synth",
                "--input",
                path(&curated.join("kept.jsonl")),
                "--output",
                path(&output),
                "--qc-sample",
                "3",
                "--human",
                path(&curated.join("human.jsonl")),
            ])
            .env("EDITSUM_API_KEY", "test-key")
            .env("EDITSUM_API_BASE", &base)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    };
    let o = run();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let samples = read_jsonl(&output);
    assert_eq!(samples.len(), 5);
    assert_eq!(samples[0]["target"], "Edited: new text: Sentence 1.");
    assert_eq!(samples[0]["source"], "synthetic");
    let first = std::fs::read(&output).unwrap();

    let o = run();
    assert!(String::from_utf8_lossy(&o.stdout).contains("(5 resumed)"));
    assert_eq!(std::fs::read(&output).unwrap(), first);

    let tsv = std::fs::read_to_string(PathBuf::from(format!("{}.qc.tsv", output.display()))).unwrap();
    assert_eq!(tsv.lines().count(), 4);
    let key = read_json(&PathBuf::from(format!("{}.qc_key.json", output.display())));
    assert_eq!(key["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn synth_without_credentials_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("kept.jsonl");
    write_jsonl(&input, "annotated", &[]);
    let o = Command::new(env!("CARGO_BIN_EXE_editsum"))
        .args(["synth", "--input", path(&input), "--output", path(&dir.path().join("s.jsonl"))])
        .env_remove("EDITSUM_API_KEY")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("EDITSUM_API_KEY"));
}
