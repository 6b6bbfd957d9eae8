//! Domain types shared by both retrieval engines.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Logical batch clock. Starts at 0 on an empty store and advances by
/// exactly 1 per applied batch; all time-travel queries are expressed
/// against it. Comparisons use the integer value only; an informational
/// wall-clock string may be recorded alongside by the versioned store.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub fn value(self) -> u64 {
        self.0
    }

    /// The timestamp the next batch will be applied at.
    pub fn next(self) -> Timestamp {
        Timestamp(self.0 + 1)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// BM25 parameters plus the result-list depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringParams {
    /// Term-frequency saturation.
    pub k1: f64,
    /// Document-length normalization strength, in [0, 1].
    pub b: f64,
    /// Result list depth (top-k).
    pub k: usize,
}

impl Default for ScoringParams {
    fn default() -> Self {
        ScoringParams {
            k1: 1.2,
            b: 0.75,
            k: 20,
        }
    }
}

impl ScoringParams {
    pub fn with_k(self, k: usize) -> Self {
        ScoringParams { k, ..self }
    }
}

/// One entry of a ranked list: external document name plus its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub name: String,
    pub score: f64,
}

/// Ordered retrieval result. Engine outputs hold scores non-increasing,
/// ties ordered by ascending document name, no duplicate names, and at
/// most `k` entries. A tie-corrected list (see the reproducer) may carry
/// one inversion per applied swap, bounded by the correction epsilon.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<ScoredDoc>,
}

impl RankedList {
    /// Builds a ranked list from raw (name, score) pairs: sorts by
    /// descending score with ascending-name tie-break and keeps the
    /// top `k` entries.
    pub fn from_scores(scores: Vec<(String, f64)>, k: usize) -> RankedList {
        let mut entries: Vec<ScoredDoc> = scores
            .into_iter()
            .map(|(name, score)| ScoredDoc { name, score })
            .collect();
        entries.sort_unstable_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.name.cmp(&b.name))
        });
        entries.truncate(k);
        RankedList { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Document names in rank order.
    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ScoredDoc> {
        self.entries.iter()
    }
}

/// Corpus-level statistics at some store state: document count and mean
/// exact document length. `avgdl` is 0 exactly when the corpus is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_docs: u64,
    pub avgdl: f64,
}

impl CorpusStats {
    /// Mean computed as an exact integer sum divided once, so that both
    /// engines and any oracle derive bit-identical values.
    pub fn from_totals(n_docs: u64, total_len: u64) -> CorpusStats {
        let avgdl = if n_docs == 0 {
            0.0
        } else {
            total_len as f64 / n_docs as f64
        };
        CorpusStats { n_docs, avgdl }
    }
}
