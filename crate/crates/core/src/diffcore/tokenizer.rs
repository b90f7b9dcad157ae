//! Pluggable tokenizers used for the input-length filter.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use super::{DiffError, SerializedInput};

/// Counts tokens in a model input.
pub trait Tokenizer: Send + Sync {
    fn name(&self) -> &str;
    fn tokenize(&self, text: &str) -> Vec<String>;

    fn count(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }
}

/// Splits on Unicode whitespace.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn name(&self) -> &str {
        "whitespace"
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        text.split_whitespace().map(str::to_string).collect()
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// Greedy longest-match-first subword tokenizer over a vocabulary file
/// (one piece per line, continuation pieces prefixed with `##`).
pub struct WordPieceTokenizer {
    name: String,
    vocab: HashSet<String>,
    unknown: String,
    max_chars_per_word: usize,
}

impl WordPieceTokenizer {
    pub fn new(name: impl Into<String>, vocab: impl IntoIterator<Item = String>) -> Self {
        Self {
            name: name.into(),
            vocab: vocab.into_iter().collect(),
            unknown: "[UNK]".to_string(),
            max_chars_per_word: 100,
        }
    }

    pub fn from_vocab_file(name: impl Into<String>, path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(
            name,
            text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string),
        ))
    }

    fn word_pieces(&self, word: &str, out: &mut Vec<String>) {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() > self.max_chars_per_word {
            out.push(self.unknown.clone());
            return;
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while start < end {
                let mut piece: String = chars[start..end].iter().collect();
                if start > 0 {
                    piece.insert_str(0, "##");
                }
                if self.vocab.contains(&piece) {
                    found = Some(piece);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(piece) => {
                    pieces.push(piece);
                    start = end;
                }
                None => {
                    out.push(self.unknown.clone());
                    return;
                }
            }
        }
        out.extend(pieces);
    }
}

impl fmt::Debug for WordPieceTokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WordPieceTokenizer")
            .field("name", &self.name)
            .field("vocab_size", &self.vocab.len())
            .finish()
    }
}

impl Tokenizer for WordPieceTokenizer {
    fn name(&self) -> &str {
        &self.name
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for chunk in text.split_whitespace() {
            // markers like <sent_sep> are single tokens when the vocabulary has them
            if self.vocab.contains(chunk) {
                out.push(chunk.to_string());
                continue;
            }
            let mut word = String::new();
            for c in chunk.chars() {
                if c.is_alphanumeric() {
                    word.push(c);
                } else {
                    if !word.is_empty() {
                        self.word_pieces(&word, &mut out);
                        word.clear();
                    }
                    self.word_pieces(&c.to_string(), &mut out);
                }
            }
            if !word.is_empty() {
                self.word_pieces(&word, &mut out);
            }
        }
        out
    }
}

/// Named tokenizers; `whitespace` is always registered.
#[derive(Clone)]
pub struct TokenizerRegistry {
    tokenizers: BTreeMap<String, Arc<dyn Tokenizer>>,
}

impl Default for TokenizerRegistry {
    fn default() -> Self {
        let mut tokenizers: BTreeMap<String, Arc<dyn Tokenizer>> = BTreeMap::new();
        tokenizers.insert("whitespace".to_string(), Arc::new(WhitespaceTokenizer));
        Self { tokenizers }
    }
}

impl fmt::Debug for TokenizerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.tokenizers.keys()).finish()
    }
}

impl TokenizerRegistry {
    pub fn register(&mut self, tokenizer: Arc<dyn Tokenizer>) {
        self.tokenizers.insert(tokenizer.name().to_string(), tokenizer);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Tokenizer>, DiffError> {
        self.tokenizers
            .get(name)
            .cloned()
            .ok_or_else(|| DiffError::UnknownTokenizer(name.to_string()))
    }

    pub fn token_length(&self, input: &SerializedInput, tokenizer: &str) -> Result<usize, DiffError> {
        Ok(token_length(input, self.get(tokenizer)?.as_ref()))
    }
}

/// Token count of a serialized input under `tokenizer`.
pub fn token_length(input: &SerializedInput, tokenizer: &dyn Tokenizer) -> usize {
    tokenizer.count(input.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(s: &str) -> SerializedInput {
        SerializedInput::from_raw(s.to_string())
    }

    #[test]
    fn whitespace_counts() {
        let reg = TokenizerRegistry::default();
        assert_eq!(reg.token_length(&input(""), "whitespace").unwrap(), 0);
        assert_eq!(reg.token_length(&input("a b c"), "whitespace").unwrap(), 3);
        let long = vec!["w"; 1025].join(" ");
        assert_eq!(reg.token_length(&input(&long), "whitespace").unwrap(), 1025);
    }

    #[test]
    fn unknown_tokenizer_is_an_error() {
        let reg = TokenizerRegistry::default();
        assert!(matches!(
            reg.token_length(&input("a"), "bpe"),
            Err(DiffError::UnknownTokenizer(name)) if name == "bpe"
        ));
    }

    #[test]
    fn wordpiece_greedy_longest_match() {
        let vocab = ["<old_text>", "un", "##aff", "##able", "the", "."]
            .iter()
            .map(|s| s.to_string());
        let wp = WordPieceTokenizer::new("wp", vocab);
        assert_eq!(
            wp.tokenize("<old_text> unaffable the. xyz"),
            vec!["<old_text>", "un", "##aff", "##able", "the", ".", "[UNK]"]
        );
        let mut reg = TokenizerRegistry::default();
        reg.register(Arc::new(wp));
        assert_eq!(reg.token_length(&input("unaffable"), "wp").unwrap(), 3);
    }
}
