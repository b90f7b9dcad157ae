//! Newline-delimited JSON bridge to scorers that live outside this crate.
//!
//! Each request line is `{"candidate": ..., "reference": ...}` and each
//! response line `{"score": ...}`, in the same order.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ExternalScorer {
    /// Child process reading requests on stdin, answering on stdout.
    Command { program: String, #[serde(default)] args: Vec<String> },
    /// Endpoint accepting an NDJSON POST body and answering in kind.
    Http { url: String, #[serde(default = "default_timeout")] timeout_secs: u64 },
}

fn default_timeout() -> u64 {
    300
}

#[derive(Serialize)]
struct Request<'a> {
    candidate: &'a str,
    reference: &'a str,
}

#[derive(Deserialize)]
struct Response {
    score: f64,
}

fn request_body(pairs: &[(String, String)]) -> String {
    let mut body = String::new();
    for (candidate, reference) in pairs {
        body.push_str(&serde_json::to_string(&Request { candidate, reference }).expect("request serializes"));
        body.push('\n');
    }
    body
}

fn parse_scores(output: &str, expected: usize) -> Result<Vec<f64>, MetricsError> {
    let scores = output
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str::<Response>(line)
                .map(|r| r.score)
                .map_err(|e| MetricsError::ScorerUnavailable(format!("bad response line {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if scores.len() != expected {
        return Err(MetricsError::ScorerUnavailable(format!(
            "expected {expected} scores, got {}",
            scores.len()
        )));
    }
    if let Some(index) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
        return Err(MetricsError::ScoreOutOfRange { index, score: scores[index] });
    }
    Ok(scores)
}

fn run_command(program: &str, args: &[String], body: String) -> Result<String, MetricsError> {
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| MetricsError::ScorerUnavailable(format!("{program}: {e}")))?;
    let mut stdin = child.stdin.take().expect("stdin piped");
    let writer = std::thread::spawn(move || stdin.write_all(body.as_bytes()));
    let mut out = String::new();
    let mut reader = BufReader::new(child.stdout.take().expect("stdout piped"));
    loop {
        let mut line = String::new();
        match reader.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => out.push_str(&line),
            Err(e) => return Err(MetricsError::ScorerUnavailable(e.to_string())),
        }
    }
    let status = child.wait().map_err(|e| MetricsError::ScorerUnavailable(e.to_string()))?;
    if let Ok(Err(e)) = writer.join() {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            return Err(MetricsError::ScorerUnavailable(e.to_string()));
        }
    }
    if !status.success() {
        return Err(MetricsError::ScorerUnavailable(format!("{program} exited with {status}")));
    }
    Ok(out)
}

fn run_http(url: &str, timeout_secs: u64, body: String) -> Result<String, MetricsError> {
    let unavailable = |e: reqwest::Error| MetricsError::ScorerUnavailable(e.to_string());
    let response = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(timeout_secs.max(1)))
        .build()
        .map_err(unavailable)?
        .post(url)
        .header(reqwest::header::CONTENT_TYPE, "application/x-ndjson")
        .body(body)
        .send()
        .map_err(unavailable)?;
    if !response.status().is_success() {
        return Err(MetricsError::ScorerUnavailable(format!("HTTP {}", response.status())));
    }
    response.text().map_err(unavailable)
}

/// One score per (candidate, reference) pair, in order, each in [0, 1].
pub fn external_score(pairs: &[(String, String)], scorer: &ExternalScorer) -> Result<Vec<f64>, MetricsError> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let body = request_body(pairs);
    let output = match scorer {
        ExternalScorer::Command { program, args } => run_command(program, args, body)?,
        ExternalScorer::Http { url, timeout_secs } => run_http(url, *timeout_secs, body)?,
    };
    parse_scores(&output, pairs.len())
}
