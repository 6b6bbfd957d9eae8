//! Batch synchronization types: the delta the live index emits and the
//! versioned store consumes, plus per-batch timing statistics.
//!
//! The orchestration itself — analyze once, apply to the live index,
//! apply the delta to the versioned store, persist — lives in
//! [`crate::system::System::ingest_batch`], which advances the logical
//! clock exactly once per successful batch.

use crate::error::{Error, Result};
use crate::live_index::encode_len;
use crate::types::Timestamp;
use std::collections::BTreeMap;
use std::collections::HashSet;

/// One document's contribution to a batch: the new revision's term
/// frequencies and lengths, and whether it overwrote an earlier revision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocDelta {
    pub name: String,
    /// Positive term counts of the new revision, ordered by term so that
    /// downstream id assignment is deterministic.
    pub term_freqs: BTreeMap<String, u32>,
    pub exact_len: u32,
    pub approx_len_code: u8,
    pub replaced: bool,
}

/// Everything one batch did, addressed to the versioned store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchDelta {
    pub ts: Timestamp,
    pub upserts: Vec<DocDelta>,
    pub deletes: Vec<String>,
}

impl BatchDelta {
    /// Shape checks: distinct names across upserts and deletes, positive
    /// term counts, and lengths consistent with the frequency maps.
    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for up in &self.upserts {
            if !names.insert(up.name.as_str()) {
                return Err(Error::InvalidDelta(format!(
                    "name {} appears twice in batch",
                    up.name
                )));
            }
            let mut token_total = 0u64;
            for (term, &tf) in &up.term_freqs {
                if tf == 0 {
                    return Err(Error::InvalidDelta(format!(
                        "zero term frequency for {term:?} in {}",
                        up.name
                    )));
                }
                token_total += u64::from(tf);
            }
            if token_total != u64::from(up.exact_len) {
                return Err(Error::InvalidDelta(format!(
                    "exact_len {} of {} does not match term frequencies summing to {token_total}",
                    up.exact_len, up.name
                )));
            }
            if up.approx_len_code != encode_len(up.exact_len) {
                return Err(Error::InvalidDelta(format!(
                    "approx length code of {} does not encode {}",
                    up.name, up.exact_len
                )));
            }
        }
        for name in &self.deletes {
            if !names.insert(name.as_str()) {
                return Err(Error::InvalidDelta(format!(
                    "name {name} appears twice in batch"
                )));
            }
        }
        Ok(())
    }
}

/// Timing and progress record for one ingested batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    pub ts: Timestamp,
    /// Documents upserted in this batch.
    pub docs_in: u64,
    /// Live indexing time including analysis, milliseconds.
    pub live_ms: f64,
    /// Versioned-store apply time, milliseconds.
    pub sync_ms: f64,
    /// Documents upserted over the life of the store (version count).
    pub cumulative_docs: u64,
}
