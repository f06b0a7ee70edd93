use std::collections::HashMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use sha2::{Digest, Sha256};

use super::NeuralError;
use crate::hint::{relation_symbol, JOINT_SYMBOLS, STRUCTURAL_SYMBOLS};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const MASK: usize = 4;
pub const SEP: usize = 5;

pub const SPECIALS: [&str; 6] = ["<pad>", "<bos>", "<eos>", "<unk>", "<mask>", "<|sep|>"];

/// Highest `<|sentK|>` symbol always present in a vocabulary.
pub const MAX_SENTENCE_SYMBOL: usize = 16;

static TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"<\|[^\s|<>]+\|>|<[A-Za-z_]+>|[\p{L}\p{N}_']+|[^\s\p{L}\p{N}_']")
        .expect("token regex")
});

/// Word-level split: structural symbols, words, and single punctuation marks.
pub fn split_tokens(text: &str) -> Vec<&str> {
    TOKEN.find_iter(text).map(|m| m.as_str()).collect()
}

/// True for `<...>` and `<|...|>` symbols.
pub fn is_symbol(token: &str) -> bool {
    token.len() > 2 && token.starts_with('<') && token.ends_with('>')
}

/// Dense token ids shared by the generator and the discriminator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, NeuralError> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(NeuralError::Vocabulary(format!("duplicate token `{t}`")));
            }
        }
        for (i, s) in SPECIALS.iter().enumerate() {
            if index.get(*s) != Some(&i) {
                return Err(NeuralError::Vocabulary(format!(
                    "special `{s}` must have id {i}"
                )));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    /// Specials, structural symbols and `relations` first, then every corpus
    /// token seen at least `min_freq` times, most frequent first.
    pub fn build<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        min_freq: usize,
        relations: &[String],
    ) -> Self {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(STRUCTURAL_SYMBOLS.iter().map(|s| s.to_string()));
        tokens.extend(JOINT_SYMBOLS.iter().map(|s| s.to_string()));
        tokens.extend((1..=MAX_SENTENCE_SYMBOL).map(|k| format!("<|sent{k}|>")));
        let mut rels: Vec<String> = relations.iter().map(|r| relation_symbol(r)).collect();
        rels.sort();
        tokens.extend(rels);
        let mut seen: std::collections::HashSet<String> = std::collections::HashSet::new();
        tokens.retain(|t| seen.insert(t.clone()));

        let mut counts: HashMap<&str, usize> = HashMap::new();
        for text in texts {
            for t in split_tokens(text) {
                *counts.entry(t).or_insert(0) += 1;
            }
        }
        let mut words: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_freq && !seen.contains(*t))
            .collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        tokens.extend(words.into_iter().map(|(t, _)| t.to_string()));
        Vocabulary::from_tokens(tokens).expect("built vocabulary is well formed")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Unknown tokens map to `<unk>`.
    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        split_tokens(text)
            .into_iter()
            .map(|t| self.id(t).unwrap_or(UNK))
            .collect()
    }

    pub fn detokenize(&self, ids: &[usize]) -> String {
        ids.iter()
            .map(|&i| self.tokens.get(i).map_or("<unk>", String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// First 16 hex digits of the SHA-256 of the JSON token list.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.tokens).expect("tokens serialize");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        let json = serde_json::to_string_pretty(&self.tokens).expect("tokens serialize");
        std::fs::write(path, json + "\n").map_err(|e| NeuralError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let bytes = std::fs::read(path).map_err(|e| NeuralError::io(path, e))?;
        let tokens: Vec<String> = serde_json::from_slice(&bytes)
            .map_err(|e| NeuralError::Vocabulary(format!("{}: {e}", path.display())))?;
        Vocabulary::from_tokens(tokens)
    }
}
