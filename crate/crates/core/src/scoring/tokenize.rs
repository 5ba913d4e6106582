//! Lowercased alphanumeric tokenization and the neural scorer's vocabulary.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const UNK: &str = "[UNK]";
pub const PAD: &str = "[PAD]";
pub const CLS_ID: u32 = 0;
pub const SEP_ID: u32 = 1;
pub const UNK_ID: u32 = 2;
pub const PAD_ID: u32 = 3;
pub const SPECIAL_TOKENS: [&str; 4] = [CLS, SEP, UNK, PAD];

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Tokens occurring at least `min_freq` times across `texts`, sorted,
    /// after the four reserved special tokens.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_freq: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for tok in tokenize(text) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let tokens = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(
                counts
                    .into_iter()
                    .filter(|&(_, c)| c >= min_freq)
                    .map(|(t, _)| t),
            )
            .collect::<Vec<_>>();
        Vocab::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }
}

/// `[CLS] text [SEP] caption [SEP]` as ids with segment labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPair {
    pub ids: Vec<u32>,
    pub segments: Vec<u8>,
    pub tokens: Vec<String>,
}

impl EncodedPair {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Encodes a text/caption pair, trimming the longer side first until the
/// sequence fits in `max_len`.
pub fn encode_pair(
    vocab: &Vocab,
    text: &str,
    caption: &str,
    max_len: usize,
) -> Result<EncodedPair> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput("text"));
    }
    if caption.trim().is_empty() {
        return Err(Error::EmptyInput("caption"));
    }
    let mut a = tokenize(text);
    let mut b = tokenize(caption);
    if a.is_empty() && b.is_empty() {
        return Err(Error::EmptyInput("sequence has only special tokens"));
    }
    if max_len < 5 {
        return Err(Error::Config(format!(
            "max_len {max_len} leaves no room for tokens"
        )));
    }
    while a.len() + b.len() + 3 > max_len {
        if a.len() >= b.len() {
            a.pop();
        } else {
            b.pop();
        }
    }
    let mut tokens = Vec::with_capacity(a.len() + b.len() + 3);
    let mut segments = Vec::with_capacity(tokens.capacity());
    tokens.push(CLS.to_string());
    segments.push(0);
    for t in a {
        tokens.push(t);
        segments.push(0);
    }
    tokens.push(SEP.to_string());
    segments.push(0);
    for t in b {
        tokens.push(t);
        segments.push(1);
    }
    tokens.push(SEP.to_string());
    segments.push(1);
    // Special tokens sit at their reserved ids; tokenize() never yields bracketed text.
    let ids = tokens.iter().map(|t| vocab.id(t)).collect();
    Ok(EncodedPair {
        ids,
        segments,
        tokens,
    })
}
