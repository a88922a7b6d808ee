//! Tokenization and vocabularies shared by the captioner, Doc2Vec and the
//! answering model.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{ensure, Error, Result};

pub const UNK: &str = "<unk>";
pub const END: &str = "<end>";
pub const START: &str = "<start>";

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Tokens re-joined with single spaces; the canonical form used when
/// comparing answers.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

/// Dense token ↔ index map. Index order is the file's line order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            ensure!(!t.is_empty(), "vocabulary entry {i} is empty");
            ensure!(index.insert(t.clone(), i).is_none(), "duplicate vocabulary entry `{t}`");
        }
        Ok(Self { tokens, index })
    }

    /// `specials` first, then every word seen at least `min_count` times,
    /// most frequent first with ties broken alphabetically.
    pub fn build<'a>(
        words: impl IntoIterator<Item = &'a str>,
        specials: &[&str],
        min_count: usize,
    ) -> Result<Self> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for w in words {
            *counts.entry(w).or_default() += 1;
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(w, c)| *c >= min_count && !specials.contains(w))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let tokens = specials
            .iter()
            .map(|s| s.to_string())
            .chain(kept.into_iter().map(|(w, _)| w.to_string()))
            .collect();
        Self::from_tokens(tokens)
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

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Maps out-of-vocabulary tokens to [`UNK`]; fails when UNK is absent.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<usize>> {
        tokens
            .iter()
            .map(|t| {
                self.id(t.as_ref()).or_else(|| self.id(UNK)).ok_or_else(|| {
                    Error::contract(format!("token `{}` not in vocabulary and no {UNK}", t.as_ref()))
                })
            })
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.tokens[i].clone()).collect()
    }

    /// Short content hash (first 16 hex digits of SHA-256 over the
    /// newline-joined tokens).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(&h.finalize()[..8])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.tokens.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// One token per line; the line number is the index.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tokens: Vec<String> = text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect();
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Parse { path: path.into(), line: i + 1, msg: "empty token".into() });
            }
        }
        Self::from_tokens(tokens).map_err(|e| Error::Parse {
            path: path.into(),
            line: 0,
            msg: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The Dog, ran."), ["the", "dog", "ran"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("e-mail 42"), ["e", "mail", "42"]);
    }

    #[test]
    fn build_orders_by_frequency_then_alpha() {
        let v = Vocab::build(["b", "a", "c", "a", "b", "z"], &[UNK, END], 1).unwrap();
        assert_eq!(v.tokens(), [UNK, END, "a", "b", "c", "z"]);
        let v = Vocab::build(["b", "a", "c", "a", "b"], &[UNK], 2).unwrap();
        assert_eq!(v.tokens(), [UNK, "a", "b"]);
    }

    #[test]
    fn encode_maps_unknowns() {
        let v = Vocab::build(["dog"], &[UNK, END], 1).unwrap();
        assert_eq!(v.encode(&["dog", "cat"]).unwrap(), vec![2, 0]);
        let bare = Vocab::from_tokens(vec!["dog".into()]).unwrap();
        assert!(bare.encode(&["cat"]).is_err());
    }

    #[test]
    fn rejects_duplicates() {
        assert!(Vocab::from_tokens(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let v = Vocab::build(["x", "y", "x"], &[UNK, END], 1).unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        let back = Vocab::load(&p).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.hash(), v.hash());
    }
}
