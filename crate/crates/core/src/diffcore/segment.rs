//! Rule-based sentence splitting over prose paragraphs.

use super::markup::{prose_paragraphs, REF_PLACEHOLDER};

/// Lowercased tokens (without their final period) that never end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "mt", "ft", "gen", "col", "lt", "sgt",
    "capt", "cmdr", "adm", "rev", "hon", "gov", "sen", "rep", "pres", "no", "nos", "vol", "pp",
    "p", "fig", "ca", "c", "approx", "vs", "v", "e.g", "i.e", "cf", "al", "inc", "ltd", "co",
    "corp", "bros", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov",
    "dec", "u.s", "u.k", "op", "ed", "eds", "est",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '»', '”', '’'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '«', '“', '‘', '¿', '¡'];

/// Split wikitext into sentences. Markup-only input yields an empty list.
pub fn segment_sentences(wikitext: &str) -> Vec<String> {
    prose_paragraphs(wikitext)
        .iter()
        .flat_map(|p| split_paragraph(p))
        .collect()
}

/// Split one already-cleaned paragraph.
pub fn split_paragraph(paragraph: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;

    while i < paragraph.len() {
        let c = next_char(paragraph, i);
        if matches!(c, '.' | '!' | '?') {
            let end = sentence_end(paragraph, i);
            if let Some(next) = next_sentence_start(paragraph, end) {
                if c != '.' || !is_abbreviation(&paragraph[start..i]) {
                    push_sentence(&mut sentences, &paragraph[start..end]);
                    start = next;
                    i = next;
                    continue;
                }
            }
            i = end;
            continue;
        }
        i += c.len_utf8();
    }
    push_sentence(&mut sentences, &paragraph[start..]);
    sentences
}

fn next_char(s: &str, at: usize) -> char {
    s[at..].chars().next().expect("index inside string")
}

/// Offset past the terminal punctuation run and any trailing closers or
/// reference placeholders.
fn sentence_end(s: &str, punct_at: usize) -> usize {
    let mut j = punct_at;
    loop {
        let rest = &s[j..];
        if let Some(c) = rest.chars().next() {
            if matches!(c, '.' | '!' | '?') || CLOSERS.contains(&c) {
                j += c.len_utf8();
                continue;
            }
        }
        if rest.starts_with(REF_PLACEHOLDER) {
            j += REF_PLACEHOLDER.len();
            continue;
        }
        return j;
    }
}

/// If a sentence may end at `end`, the offset where the following sentence
/// starts (the end of input counts as a boundary).
fn next_sentence_start(s: &str, end: usize) -> Option<usize> {
    let rest = &s[end..];
    if rest.is_empty() {
        return Some(s.len());
    }
    let trimmed = rest.trim_start();
    if trimmed.len() == rest.len() {
        return None;
    }
    let next = trimmed.chars().next()?;
    (next.is_uppercase() || OPENERS.contains(&next)).then_some(s.len() - trimmed.len())
}

fn is_abbreviation(before_period: &str) -> bool {
    let word = before_period
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or("")
        .trim_start_matches(OPENERS);
    if word.is_empty() {
        return false;
    }
    let mut chars = word.chars();
    // a single capital is an initial, as in "J. Smith"
    if let (Some(first), None) = (chars.next(), chars.next()) {
        if first.is_uppercase() {
            return true;
        }
    }
    ABBREVIATIONS.contains(&word.to_lowercase().as_str())
}

fn push_sentence(out: &mut Vec<String>, raw: &str) {
    let sentence = raw.trim();
    let has_prose = sentence
        .replace(REF_PLACEHOLDER, "")
        .chars()
        .any(char::is_alphanumeric);
    if has_prose {
        out.push(sentence.to_string());
    }
}
