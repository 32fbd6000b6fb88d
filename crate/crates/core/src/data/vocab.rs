use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::decoder::CaptionTokens;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Token/index map. Indices `0..4` are the reserved PAD, BOS, EOS and UNK.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    min_count: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    min_count: usize,
    tokens: Vec<String>,
}

impl From<VocabRepr> for Vocabulary {
    fn from(r: VocabRepr) -> Self {
        Vocabulary::from_tokens(r.tokens, r.min_count)
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        VocabRepr {
            min_count: v.min_count,
            tokens: v.tokens,
        }
    }
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>, min_count: usize) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            tokens,
            index,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    /// Index of `token`, or UNK.
    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> Result<&str> {
        self.tokens
            .get(index)
            .map(String::as_str)
            .ok_or(Error::Vocabulary {
                index,
                size: self.len(),
            })
    }

    /// Corpus tokens in index order (reserved entries excluded).
    pub fn words(&self) -> &[String] {
        &self.tokens[RESERVED.len()..]
    }
}

/// Keeps tokens seen strictly more than `min_count` times, ordered by
/// descending frequency then lexicographically.
pub fn build_vocab<S: AsRef<str>>(corpus: &[Vec<S>], min_count: usize) -> Result<Vocabulary> {
    if corpus.iter().all(|c| c.is_empty()) {
        return Err(Error::config("cannot build a vocabulary from an empty corpus"));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for sentence in corpus {
        for t in sentence {
            *counts.entry(t.as_ref()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c > min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens = RESERVED
        .iter()
        .map(|s| s.to_string())
        .chain(kept.into_iter().map(|(t, _)| t.to_string()))
        .collect();
    Ok(Vocabulary::from_tokens(tokens, min_count))
}

/// `BOS + indices + EOS`, with unknown words mapped to UNK.
pub fn encode_caption<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> CaptionTokens {
    let words: Vec<usize> = tokens.iter().map(|t| vocab.index_of(t.as_ref())).collect();
    CaptionTokens::from_words(&words, vocab.len()).expect("vocabulary indices are in range")
}

/// Joins the words of a caption with single spaces; BOS, EOS and PAD are dropped.
pub fn decode_tokens(indices: &[usize], vocab: &Vocabulary) -> Result<String> {
    let mut words = Vec::with_capacity(indices.len());
    for &i in indices {
        let t = vocab.token(i)?;
        if i != BOS && i != EOS && i != PAD {
            words.push(t);
        }
    }
    Ok(words.join(" "))
}
