//! Word-level tokenization and the shared vocabulary.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const EOS: &str = "[EOS]";

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const CLS_ID: usize = 2;
pub const SEP_ID: usize = 3;
pub const EOS_ID: usize = 4;

pub const RESERVED: [&str; 5] = [PAD, UNK, CLS, SEP, EOS];

pub const DEFAULT_MAX_SIZE: usize = 4000;
pub const DEFAULT_MIN_COUNT: usize = 1;

const DETACHED: &[char] = &['.', ',', ':', ';', '?', '!', '(', ')', '"', '\''];

/// Lowercases, splits on whitespace and detaches `. , : ; ? ! ( ) " '`.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    for word in lower.split_whitespace() {
        let mut current = String::new();
        for ch in word.chars() {
            if DETACHED.contains(&ch) {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(ch.to_string());
            } else {
                current.push(ch);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

/// Token ↔ id bijection. Ids `0..5` are the reserved specials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Vocabulary holding only the reserved tokens.
    pub fn reserved_only() -> Self {
        Self::from_tokens(RESERVED.iter().map(|s| s.to_string()).collect())
            .expect("reserved tokens are valid")
    }

    /// Rebuilds a vocabulary from its id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len()
            || tokens.iter().zip(RESERVED).any(|(t, r)| t != r)
        {
            return Err(Error::Config(
                "vocabulary must start with [PAD] [UNK] [CLS] [SEP] [EOS]".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Maps tokens to ids, sending unknown tokens to `[UNK]`.
    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(UNK_ID))
            .collect()
    }

    /// `encode_tokens(tokenize(text))`.
    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        self.encode_tokens(&tokenize(text))
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter().map(|&i| self.token(i).unwrap_or(UNK)).collect()
    }

    /// One token per line; the line number is the id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for t in &self.tokens {
            writeln!(f, "{t}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tokens(text.lines().map(str::to_string).collect())
    }
}

/// Builds a vocabulary from raw texts: the reserved tokens followed by tokens
/// with `count >= min_count`, most frequent first, ties broken
/// lexicographically, capped at `max_size` entries in total.
pub fn build_vocab<I, S>(corpus: I, max_size: usize, min_count: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if max_size < RESERVED.len() {
        return Err(Error::Config(format!(
            "max_size must be at least {}, got {max_size}",
            RESERVED.len()
        )));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for text in corpus {
        for tok in tokenize(text.as_ref()) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_count && !RESERVED.contains(&t.as_str()))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
    tokens.extend(
        ranked
            .into_iter()
            .take(max_size - RESERVED.len())
            .map(|(t, _)| t),
    );
    Vocabulary::from_tokens(tokens)
}
