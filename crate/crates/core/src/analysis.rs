//! Deterministic text-to-token pipeline shared by ingestion and query
//! parsing.
//!
//! Both engines must see identical token streams for identical input, so
//! the pipeline is fixed and fully described by [`AnalyzerConfig`]: tokens
//! are maximal runs of alphanumeric code points, optionally lowercased
//! (Unicode simple lowercase), filtered against a stopword set, and
//! optionally stemmed. The configuration is frozen into the store manifest
//! at creation time and never changes afterwards.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

/// A single analyzed token: non-empty, whitespace-free, lowercased when
/// the config says so.
pub type Token = String;

/// Stemmer selection. `PorterEnglish` applies the Snowball English
/// (Porter-family) stemmer; `None` leaves tokens untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StemmerKind {
    #[default]
    None,
    PorterEnglish,
}

impl StemmerKind {
    pub fn name(self) -> &'static str {
        match self {
            StemmerKind::None => "none",
            StemmerKind::PorterEnglish => "porter-english",
        }
    }
}

/// Frozen analyzer configuration.
///
/// Stopword matching happens after lowercasing when `lowercase` is true,
/// and stemming runs last. The token rule itself is not configurable.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub lowercase: bool,
    pub stopwords: BTreeSet<String>,
    pub stemmer: StemmerKind,
}

impl AnalyzerConfig {
    /// Default pipeline: lowercase, no stopwords, no stemming.
    pub fn new() -> AnalyzerConfig {
        AnalyzerConfig {
            lowercase: true,
            stopwords: BTreeSet::new(),
            stemmer: StemmerKind::None,
        }
    }

    /// Reads a stopword file: UTF-8, one token per line, lines trimmed,
    /// empty lines ignored.
    pub fn with_stopword_file(mut self, path: &Path) -> Result<AnalyzerConfig> {
        let file = std::fs::File::open(path)?;
        for line in std::io::BufReader::new(file).lines() {
            let line = line?;
            let word = line.trim();
            if !word.is_empty() {
                self.stopwords.insert(word.to_string());
            }
        }
        Ok(self)
    }

    /// Content digest of the configuration, recorded in the manifest so a
    /// reopened store can prove it is running the same pipeline.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"token_rule=alnum-runs-v1\x00");
        hasher.update(format!("lowercase={}\x00", self.lowercase));
        hasher.update(format!("stemmer={}\x00", self.stemmer.name()));
        for word in &self.stopwords {
            hasher.update(word.as_bytes());
            hasher.update(b"\x0a");
        }
        hex::encode(hasher.finalize())
    }
}

/// Unicode simple lowercase: every code point maps to exactly one code
/// point. This differs from the full mapping only for U+0130, which would
/// otherwise expand to two code points.
fn simple_lowercase(c: char) -> char {
    if c == '\u{0130}' {
        'i'
    } else {
        c.to_lowercase().next().unwrap_or(c)
    }
}

/// Splits `text` into tokens: maximal runs of alphanumeric code points
/// (Unicode categories L* and N*); everything else separates. Lowercasing,
/// stopword removal, and stemming follow in that order. Token order
/// preserves input order; empty input yields an empty sequence.
pub fn analyze(text: &str, config: &AnalyzerConfig) -> Vec<Token> {
    let stemmer = match config.stemmer {
        StemmerKind::None => None,
        StemmerKind::PorterEnglish => Some(rust_stemmers::Stemmer::create(
            rust_stemmers::Algorithm::English,
        )),
    };
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars().chain(std::iter::once(' ')) {
        if c.is_alphanumeric() {
            current.push(if config.lowercase {
                simple_lowercase(c)
            } else {
                c
            });
            continue;
        }
        if current.is_empty() {
            continue;
        }
        let token = std::mem::take(&mut current);
        if config.stopwords.contains(&token) {
            continue;
        }
        match &stemmer {
            Some(s) => tokens.push(s.stem(&token).into_owned()),
            None => tokens.push(token),
        }
    }
    tokens
}
