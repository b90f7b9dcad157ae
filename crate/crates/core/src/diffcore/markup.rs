//! Reduction of wikitext to prose paragraphs.
//!
//! Templates, tables, comments, category/file/interlanguage links, headings and
//! content-only tags (math, gallery, ...) are dropped. Wiki links collapse to
//! their label, bold/italic quotes disappear and every `<ref>` becomes the
//! inline placeholder [`REF_PLACEHOLDER`].

/// Inline stand-in for a `<ref>...</ref>` or `<ref/>` element.
pub const REF_PLACEHOLDER: &str = "[ref]";

const DROPPED_LINK_NAMESPACES: &[&str] = &[
    "category", "file", "image", "media", "wikipedia", "wp", "help", "template", "portal",
    "special",
];

const CONTENT_DROPPING_TAGS: &[&str] = &[
    "math", "gallery", "timeline", "score", "syntaxhighlight", "source", "pre", "graph",
    "mapframe", "templatedata", "imagemap", "chem", "ce", "hiero", "nowiki",
];

/// Strip markup and return the prose paragraphs (one per non-empty line),
/// with whitespace collapsed to single spaces.
pub fn prose_paragraphs(wikitext: &str) -> Vec<String> {
    let inline = strip_inline(wikitext);
    inline
        .lines()
        .filter_map(clean_line)
        .collect()
}

fn clean_line(line: &str) -> Option<String> {
    let trimmed = line.trim();
    if trimmed.is_empty() || is_heading(trimmed) {
        return None;
    }
    // table residue, horizontal rules and redirects are not prose
    if trimmed.starts_with('|') || trimmed.starts_with('!') || trimmed.starts_with("----") {
        return None;
    }
    if trimmed.len() >= 9 && trimmed[..9].eq_ignore_ascii_case("#redirect") {
        return None;
    }
    let body = trimmed.trim_start_matches(['*', '#', ':', ';']);
    let collapsed = body.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.is_empty() {
        None
    } else {
        Some(collapsed)
    }
}

fn is_heading(line: &str) -> bool {
    line.len() >= 2 && line.starts_with('=') && line.ends_with('=')
}

fn strip_inline(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    let mut at_line_start = true;

    while let Some(c) = rest.chars().next() {
        if rest.starts_with("<!--") {
            rest = match rest.find("-->") {
                Some(end) => &rest[end + 3..],
                None => "",
            };
            continue;
        }
        if rest.starts_with("{{") {
            rest = skip_balanced(rest, "{{", "}}");
            continue;
        }
        if at_line_start && rest.starts_with("{|") {
            rest = skip_balanced(rest, "{|", "|}");
            continue;
        }
        if rest.starts_with("[[") {
            let end = balanced_end(rest, "[[", "]]");
            let inner = if rest[..end].ends_with("]]") && end >= 4 {
                &rest[2..end - 2]
            } else {
                &rest[2..end]
            };
            out.push_str(&render_wikilink(inner));
            rest = &rest[end..];
            at_line_start = false;
            continue;
        }
        if c == '[' && looks_like_external_link(&rest[1..]) {
            match rest.find(']') {
                Some(end) => {
                    let inner = &rest[1..end];
                    if let Some((_, label)) = inner.split_once(char::is_whitespace) {
                        out.push_str(&strip_inline(label.trim()));
                    }
                    rest = &rest[end + 1..];
                }
                None => {
                    out.push('[');
                    rest = &rest[1..];
                }
            }
            at_line_start = false;
            continue;
        }
        if rest.starts_with("''") {
            rest = rest.trim_start_matches('\'');
            continue;
        }
        if rest.starts_with("__") {
            if let Some(end) = magic_word_end(rest) {
                rest = &rest[end..];
                continue;
            }
        }
        if c == '<' {
            if let Some((consumed, replacement)) = handle_tag(rest) {
                out.push_str(replacement);
                rest = &rest[consumed..];
                continue;
            }
        }
        out.push(c);
        at_line_start = c == '\n' || (at_line_start && c.is_whitespace());
        rest = &rest[c.len_utf8()..];
    }
    out
}

/// Byte offset just past the balanced region that starts with `open`.
/// Unterminated regions run to the end of the input.
fn balanced_end(text: &str, open: &str, close: &str) -> usize {
    let mut depth = 0usize;
    let mut i = 0;
    let bytes = text.as_bytes();
    while i < bytes.len() {
        if text[i..].starts_with(open) {
            depth += 1;
            i += open.len();
        } else if text[i..].starts_with(close) {
            depth -= 1;
            i += close.len();
            if depth == 0 {
                return i;
            }
        } else {
            i += text[i..].chars().next().map_or(1, char::len_utf8);
        }
    }
    text.len()
}

fn skip_balanced<'a>(text: &'a str, open: &str, close: &str) -> &'a str {
    &text[balanced_end(text, open, close)..]
}

fn render_wikilink(inner: &str) -> String {
    let (target, label) = match inner.split_once('|') {
        Some((t, l)) => (t, Some(l)),
        None => (inner, None),
    };
    let target = target.trim().trim_start_matches(':');
    if let Some((prefix, _)) = target.split_once(':') {
        let prefix = prefix.trim().to_ascii_lowercase();
        let is_interlanguage = (2..=3).contains(&prefix.len())
            && prefix.chars().all(|c| c.is_ascii_lowercase())
            && !inner.trim().starts_with(':');
        if DROPPED_LINK_NAMESPACES.contains(&prefix.as_str()) || is_interlanguage {
            return String::new();
        }
    }
    match label {
        // the pipe trick `[[Foo (bar)|]]` renders as "Foo"
        Some("") => target.split(" (").next().unwrap_or(target).to_string(),
        Some(l) => strip_inline(l),
        None => target.to_string(),
    }
}

fn looks_like_external_link(rest: &str) -> bool {
    let lower: String = rest.chars().take(8).collect::<String>().to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("//")
}

fn magic_word_end(rest: &str) -> Option<usize> {
    let body = &rest[2..];
    let len = body
        .chars()
        .take_while(|c| c.is_ascii_uppercase())
        .count();
    (len > 0 && body[len..].starts_with("__")).then_some(2 + len + 2)
}

/// Returns (bytes consumed, replacement text) for a recognised tag at the
/// start of `rest`.
fn handle_tag(rest: &str) -> Option<(usize, &'static str)> {
    let close = rest.find('>')?;
    let tag_body = &rest[1..close];
    let self_closing = tag_body.ends_with('/');
    let is_end = tag_body.starts_with('/');
    let name: String = tag_body
        .trim_start_matches('/')
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    if name.is_empty() {
        return None;
    }
    if is_end {
        return Some((close + 1, ""));
    }
    let dropping = name == "ref" || CONTENT_DROPPING_TAGS.contains(&name.as_str());
    let replacement = if name == "ref" { REF_PLACEHOLDER } else { "" };
    if !dropping || self_closing {
        return Some((close + 1, if self_closing { replacement } else { "" }));
    }
    let end_tag = format!("</{name}");
    let lower = rest.to_ascii_lowercase();
    let consumed = match lower[close + 1..].find(&end_tag) {
        Some(pos) => {
            let start = close + 1 + pos;
            rest[start..].find('>').map_or(rest.len(), |gt| start + gt + 1)
        }
        None => rest.len(),
    };
    Some((consumed, replacement))
}
