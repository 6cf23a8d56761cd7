use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::text::compose::SEP_MARKER;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const BOS: u32 = 2;
pub const EOS: u32 = 3;
pub const SEP: u32 = 4;
const RESERVED: [&str; 5] = ["<pad>", "<unk>", "<bos>", "<eos>", "<sep>"];

/// Immutable token sequence; cheap to clone.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSeq(Arc<[u32]>);

impl TokenSeq {
    pub fn new(ids: Vec<u32>) -> Self {
        TokenSeq(ids.into())
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    /// The sequence followed by EOS, as used for decoding targets.
    pub fn with_eos(&self) -> Vec<u32> {
        let mut v = self.0.to_vec();
        v.push(EOS);
        v
    }
}

impl Deref for TokenSeq {
    type Target = [u32];
    fn deref(&self) -> &[u32] {
        &self.0
    }
}

impl fmt::Debug for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// Token vocabulary with reserved ids PAD=0, UNK=1, BOS=2, EOS=3, SEP=4.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        Vocab::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Builds a vocabulary from every word of `texts`, ids assigned in
    /// lexicographic token order after the reserved entries.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let words: BTreeSet<String> = texts.into_iter().flat_map(words).collect();
        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(words)
            .collect();
        Self::from_tokens(tokens)
    }

    /// Rebuilds from a full token list (reserved entries included), as
    /// stored in checkpoints.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab { tokens, index }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn decode(&self, seq: &[u32]) -> String {
        seq.iter()
            .map(|&t| self.word(t).unwrap_or("<?>"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

fn tokenize_plain(text: &str, vocab: &Vocab, out: &mut Vec<u32>) {
    let start = out.len();
    out.extend(words(text).map(|w| vocab.id(&w)));
    if out.len() == start {
        out.push(PAD);
    }
}

/// Lowercases, splits on runs of non-alphanumeric characters and maps
/// out-of-vocabulary words to UNK. Segments separated by [`SEP_MARKER`] are
/// joined with the SEP id; every empty segment becomes a single PAD.
pub fn tokenize(text: &str, vocab: &Vocab) -> TokenSeq {
    let mut ids = Vec::new();
    for (i, segment) in text.split(SEP_MARKER).enumerate() {
        if i > 0 {
            ids.push(SEP);
        }
        tokenize_plain(segment, vocab, &mut ids);
    }
    TokenSeq::new(ids)
}
