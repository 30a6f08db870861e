//! Text preprocessing: cleaning, tokenization, stopword removal, stemming,
//! vocabulary construction, integer encoding, and fixed-length padding.

pub mod porter;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved vocabulary index for padding.
pub const PAD_INDEX: usize = 0;
/// Reserved vocabulary index for out-of-vocabulary tokens.
pub const OOV_INDEX: usize = 1;

/// The shipped English stopword list (179 entries, one per line).
pub const STOPWORDS_EN: &str = include_str!("stopwords_en.txt");

#[derive(Debug, Error)]
pub enum TextprepError {
    #[error("vocabulary import: {0}")]
    BadVocabulary(String),
    #[error("vocabulary JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Which end of a sequence receives padding zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PadMode {
    #[default]
    Pre,
    Post,
}

/// Knobs for the preprocessing pipeline.
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub max_sequence_length: usize,
    pub pad_mode: PadMode,
    pub stem: bool,
    pub stopword_list: BTreeSet<String>,
    pub min_token_frequency: usize,
    /// Cap on total vocabulary size, counting the two reserved indices.
    pub max_vocab_size: Option<usize>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            max_sequence_length: 64,
            pad_mode: PadMode::Pre,
            stem: true,
            stopword_list: shipped_stopwords(),
            min_token_frequency: 2,
            max_vocab_size: None,
        }
    }
}

/// Parses the shipped stopword file into a set.
pub fn shipped_stopwords() -> BTreeSet<String> {
    STOPWORDS_EN
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

static URL_PATTERN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)https?://\S+").expect("static regex"));
static SHORTENER_PATTERN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bt\.co/\S+").expect("static regex"));

/// Cleans raw tweet text: strip URL patterns (scheme URLs and bare `t.co/`
/// shorteners), lowercase, map everything outside `a-z` to space, collapse
/// whitespace.
pub fn clean_text(raw: &str) -> String {
    let no_urls = URL_PATTERN.replace_all(raw, "");
    let no_urls = SHORTENER_PATTERN.replace_all(&no_urls, "");
    let lower = no_urls.to_lowercase();
    let mapped: String = lower
        .chars()
        .map(|c| if c.is_ascii_lowercase() { c } else { ' ' })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits cleaned text on spaces; never yields an empty token.
pub fn tokenize(cleaned: &str) -> Vec<String> {
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Drops tokens present in `stopwords`, preserving order.
pub fn remove_stopwords(tokens: Vec<String>, stopwords: &BTreeSet<String>) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| !stopwords.contains(t.as_str()))
        .collect()
}

/// Full token pipeline for one text: clean, tokenize, remove stopwords,
/// and (when configured) stem.
pub fn process_tokens(raw: &str, config: &PreprocessConfig) -> Vec<String> {
    let tokens = tokenize(&clean_text(raw));
    let tokens = remove_stopwords(tokens, &config.stopword_list);
    if config.stem {
        tokens.iter().map(|t| porter::stem(t)).collect()
    } else {
        tokens
    }
}

/// Token-to-index dictionary with reserved PAD (0) and OOV (1) slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_index: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    schema_version: u32,
    pad_index: usize,
    oov_index: usize,
    tokens: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Total size including the two reserved indices.
    pub fn len(&self) -> usize {
        self.token_to_index.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false // reserved indices always exist
    }

    /// Index for a token, or OOV for anything unknown.
    pub fn lookup(&self, token: &str) -> usize {
        self.token_to_index.get(token).copied().unwrap_or(OOV_INDEX)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_index.contains_key(token)
    }

    pub fn to_json(&self) -> String {
        let file = VocabularyFile {
            schema_version: 1,
            pad_index: PAD_INDEX,
            oov_index: OOV_INDEX,
            tokens: self.token_to_index.clone(),
        };
        serde_json::to_string_pretty(&file).expect("vocabulary serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, TextprepError> {
        let file: VocabularyFile = serde_json::from_str(json)?;
        if file.schema_version != 1 {
            return Err(TextprepError::BadVocabulary(format!(
                "unsupported schema version {}",
                file.schema_version
            )));
        }
        if file.pad_index != PAD_INDEX || file.oov_index != OOV_INDEX {
            return Err(TextprepError::BadVocabulary(
                "reserved indices must be pad=0, oov=1".into(),
            ));
        }
        let mut seen = vec![false; file.tokens.len() + 2];
        for (token, &idx) in &file.tokens {
            if idx < 2 || idx >= seen.len() {
                return Err(TextprepError::BadVocabulary(format!(
                    "token {token:?} has non-contiguous index {idx}"
                )));
            }
            if seen[idx] {
                return Err(TextprepError::BadVocabulary(format!(
                    "duplicate index {idx}"
                )));
            }
            seen[idx] = true;
        }
        Ok(Self {
            token_to_index: file.tokens,
        })
    }
}

/// Builds a vocabulary from processed token lists. Tokens at or above the
/// frequency threshold are ranked by (frequency desc, token asc) and given
/// indices from 2 up, truncated at `max_vocab_size`.
pub fn build_vocab<'a, I>(corpus: I, config: &PreprocessConfig) -> Vocabulary
where
    I: IntoIterator<Item = &'a [String]>,
{
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for tokens in corpus {
        for token in tokens {
            *counts.entry(token.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= config.min_token_frequency)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if let Some(cap) = config.max_vocab_size {
        ranked.truncate(cap.saturating_sub(2));
    }
    let token_to_index = ranked
        .into_iter()
        .enumerate()
        .map(|(i, (token, _))| (token.to_string(), i + 2))
        .collect();
    Vocabulary { token_to_index }
}

/// Fixed-length index vector; padding zeros form a contiguous prefix (pre)
/// or suffix (post).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSequence {
    pub indices: Vec<usize>,
}

/// Maps tokens to vocabulary indices (unknown tokens to OOV).
pub fn encode(tokens: &[String], vocab: &Vocabulary) -> Vec<usize> {
    tokens.iter().map(|t| vocab.lookup(t)).collect()
}

/// Pads or truncates to exactly `length`. Pre mode pads the front and keeps
/// the last `length` entries on truncation; post mode does the opposite.
pub fn pad(indices: &[usize], length: usize, mode: PadMode) -> EncodedSequence {
    assert!(length >= 1, "pad length must be at least 1");
    let mut out = Vec::with_capacity(length);
    if indices.len() >= length {
        match mode {
            PadMode::Pre => out.extend_from_slice(&indices[indices.len() - length..]),
            PadMode::Post => out.extend_from_slice(&indices[..length]),
        }
    } else {
        let fill = length - indices.len();
        match mode {
            PadMode::Pre => {
                out.resize(fill, PAD_INDEX);
                out.extend_from_slice(indices);
            }
            PadMode::Post => {
                out.extend_from_slice(indices);
                out.resize(length, PAD_INDEX);
            }
        }
    }
    EncodedSequence { indices: out }
}

/// One text straight through to a padded index sequence.
pub fn encode_text(raw: &str, vocab: &Vocabulary, config: &PreprocessConfig) -> EncodedSequence {
    let tokens = process_tokens(raw, config);
    pad(&encode(&tokens, vocab), config.max_sequence_length, config.pad_mode)
}

#[cfg(test)]
mod tests;
