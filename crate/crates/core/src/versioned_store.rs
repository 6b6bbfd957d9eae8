//! The versioned columnar engine: interval-versioned document and term
//! relations from which N, df, and avgdl can be recomputed for any past
//! batch timestamp, plus time-filtered BM25 over those statistics.
//!
//! Nothing derived is precomputed or cached: counts, document frequencies,
//! and mean lengths come from column scans at query time, and updates
//! locate the version rows they must close by scanning the name column.
//! The only lookup structure is a term → posting-run directory, rebuilt
//! from the raw columns on load. Query and batch-apply cost therefore
//! grows with corpus size while the live index stays flat, matching the
//! asymmetric behavior this engine is meant to exhibit.

use crate::analysis::{analyze, AnalyzerConfig};
use crate::error::{Error, Result};
use crate::ingest::BatchDelta;
use crate::live_index::decode_len;
use crate::scoring::{bm25_term, idf, length_factor};
use crate::types::{CorpusStats, RankedList, ScoringParams, Timestamp};
use std::collections::HashMap;
use std::sync::Arc;

pub type VersionId = u64;
pub type TermId = u64;

/// One immutable row of the Documents relation: a single revision of a
/// logical document with its half-open validity interval
/// `[valid_from, valid_to)`. The only permitted mutation is closing an
/// open `valid_to`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentVersion {
    pub version_id: VersionId,
    pub name: String,
    pub valid_from: Timestamp,
    pub valid_to: Option<Timestamp>,
    pub exact_len: u32,
    pub approx_len_code: u8,
}

impl DocumentVersion {
    /// `valid_from <= ts && (valid_to absent || valid_to > ts)`.
    pub fn valid_at(&self, ts: Timestamp) -> bool {
        interval_valid_at(self.valid_from.0, self.valid_to.map(|t| t.0), ts.0)
    }
}

fn interval_valid_at(from: u64, to: Option<u64>, ts: u64) -> bool {
    from <= ts && to.map_or(true, |t| t > ts)
}

/// A dictionary row: term string and its stable id. Ids are assigned once
/// in first-seen order and never reused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictEntry {
    pub term_id: TermId,
    pub term: String,
}

/// A Terms-relation row: (term, document version, term frequency).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermPosting {
    pub term_id: TermId,
    pub version_id: VersionId,
    pub tf: u32,
}

/// Contiguous run of rows for one term in the posting columns.
#[derive(Debug, Clone, Copy)]
struct PostingRun {
    start: u32,
    len: u32,
}

/// Everything one batch appended or closed. A batch's appends occupy
/// contiguous tails of the dictionary, version, and posting columns, so
/// ranges identify them without copying rows out; the storage layer reads
/// the rows back through the store when persisting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppliedBatch {
    pub ts: Timestamp,
    pub new_terms: std::ops::Range<TermId>,
    pub closed: Vec<(VersionId, Timestamp)>,
    pub new_versions: std::ops::Range<VersionId>,
    pub new_postings: std::ops::Range<u64>,
}

/// Documents relation stored as parallel append-only columns. `valid_to`
/// is the one column that gets written in place, and only from `None` to
/// a timestamp.
#[derive(Default)]
struct DocColumns {
    names: Vec<String>,
    valid_from: Vec<u64>,
    valid_to: Vec<Option<u64>>,
    exact_len: Vec<u32>,
    approx_len_code: Vec<u8>,
}

impl DocColumns {
    fn len(&self) -> usize {
        self.names.len()
    }

    fn reserve(&mut self, n: usize) {
        self.names.reserve(n);
        self.valid_from.reserve(n);
        self.valid_to.reserve(n);
        self.exact_len.reserve(n);
        self.approx_len_code.reserve(n);
    }

    fn push(&mut self, name: String, from: u64, exact_len: u32, code: u8) -> VersionId {
        self.names.push(name);
        self.valid_from.push(from);
        self.valid_to.push(None);
        self.exact_len.push(exact_len);
        self.approx_len_code.push(code);
        (self.len() - 1) as VersionId
    }

    fn row(&self, vid: VersionId) -> DocumentVersion {
        let i = vid as usize;
        DocumentVersion {
            version_id: vid,
            name: self.names[i].clone(),
            valid_from: Timestamp(self.valid_from[i]),
            valid_to: self.valid_to[i].map(Timestamp),
            exact_len: self.exact_len[i],
            approx_len_code: self.approx_len_code[i],
        }
    }

    /// Scans the name and valid_to columns for the open version of
    /// `name`. Deliberately a full column scan: no name index exists.
    fn open_version_of(&self, name: &str) -> Option<VersionId> {
        for i in 0..self.len() {
            if self.valid_to[i].is_none() && self.names[i] == name {
                return Some(i as VersionId);
            }
        }
        None
    }
}

/// Terms relation as parallel append-only columns plus the per-term run
/// directory.
#[derive(Default)]
struct PostingColumns {
    term_ids: Vec<TermId>,
    version_ids: Vec<VersionId>,
    tfs: Vec<u32>,
    runs: Vec<Vec<PostingRun>>,
}

impl PostingColumns {
    fn len(&self) -> usize {
        self.term_ids.len()
    }

    fn reserve(&mut self, n: usize) {
        self.term_ids.reserve(n);
        self.version_ids.reserve(n);
        self.tfs.reserve(n);
    }

    fn row(&self, i: usize) -> TermPosting {
        TermPosting {
            term_id: self.term_ids[i],
            version_id: self.version_ids[i],
            tf: self.tfs[i],
        }
    }

    fn push(&mut self, p: TermPosting) {
        let row = self.len() as u32;
        self.term_ids.push(p.term_id);
        self.version_ids.push(p.version_id);
        self.tfs.push(p.tf);
        let runs = &mut self.runs[p.term_id as usize];
        match runs.last_mut() {
            Some(run) if run.start + run.len == row => run.len += 1,
            _ => runs.push(PostingRun { start: row, len: 1 }),
        }
    }

    fn rows_of(&self, tid: TermId) -> impl Iterator<Item = (VersionId, u32)> + '_ {
        self.runs[tid as usize].iter().flat_map(move |run| {
            (run.start..run.start + run.len)
                .map(move |row| (self.version_ids[row as usize], self.tfs[row as usize]))
        })
    }
}

/// The versioned columnstore engine.
///
/// Same concurrency contract as the live index: `apply_batch` is the
/// single writer, every `*_at` read takes `&self`.
pub struct VersionedStore {
    analyzer: Arc<AnalyzerConfig>,
    clock: Timestamp,
    docs: DocColumns,
    dict: Vec<String>,
    term_ids: HashMap<String, TermId>,
    postings: PostingColumns,
    /// Informational ISO-8601 wall clock per applied batch (index ts-1),
    /// not persisted.
    wall_clocks: Vec<String>,
}

impl VersionedStore {
    pub fn new(analyzer: Arc<AnalyzerConfig>) -> VersionedStore {
        VersionedStore {
            analyzer,
            clock: Timestamp::ZERO,
            docs: DocColumns::default(),
            dict: Vec::new(),
            term_ids: HashMap::new(),
            postings: PostingColumns::default(),
            wall_clocks: Vec::new(),
        }
    }

    pub fn clock(&self) -> Timestamp {
        self.clock
    }

    /// Informational wall-clock string recorded when `ts` was applied.
    pub fn wall_clock_of(&self, ts: Timestamp) -> Option<&str> {
        if ts.0 == 0 {
            return None;
        }
        self.wall_clocks.get(ts.0 as usize - 1).map(|s| s.as_str())
    }

    pub fn version_count(&self) -> u64 {
        self.docs.len() as u64
    }

    pub fn posting_count(&self) -> u64 {
        self.postings.len() as u64
    }

    pub fn dict_len(&self) -> u64 {
        self.dict.len() as u64
    }

    pub fn term_id(&self, term: &str) -> Option<TermId> {
        self.term_ids.get(term).copied()
    }

    pub fn term(&self, tid: TermId) -> Option<&str> {
        self.dict.get(tid as usize).map(|s| s.as_str())
    }

    /// Materializes one row of the Documents relation.
    pub fn version(&self, vid: VersionId) -> Option<DocumentVersion> {
        if (vid as usize) < self.docs.len() {
            Some(self.docs.row(vid))
        } else {
            None
        }
    }

    /// Iterates all version rows in append order.
    pub fn versions(&self) -> impl Iterator<Item = DocumentVersion> + '_ {
        (0..self.docs.len() as VersionId).map(|vid| self.docs.row(vid))
    }

    /// Iterates the raw posting rows in append order.
    pub fn postings(&self) -> impl Iterator<Item = TermPosting> + '_ {
        (0..self.postings.len()).map(|row| self.postings.row(row))
    }

    /// Posting rows in an append-order range, as identified by an
    /// [`AppliedBatch`].
    pub fn postings_in(
        &self,
        range: std::ops::Range<u64>,
    ) -> impl Iterator<Item = TermPosting> + '_ {
        range.map(|row| self.postings.row(row as usize))
    }

    fn check_not_future(&self, ts: Timestamp) -> Result<()> {
        if ts > self.clock {
            return Err(Error::FutureTimestamp {
                requested: ts.0,
                clock: self.clock.0,
            });
        }
        Ok(())
    }

    /// Applies one synchronized batch: closes the open versions of every
    /// updated or deleted name at `delta.ts`, then appends new versions,
    /// dictionary entries, and postings. All-or-nothing: every failure is
    /// detected before the first mutation.
    pub fn apply_batch(&mut self, delta: &BatchDelta) -> Result<AppliedBatch> {
        let expected = self.clock.next();
        if delta.ts != expected {
            return Err(Error::OutOfOrderBatch {
                got: delta.ts.0,
                expected: expected.0,
            });
        }
        delta.validate()?;

        // Locate every open version that this batch closes (column scans).
        let mut closed: Vec<(VersionId, Timestamp)> = Vec::new();
        for up in &delta.upserts {
            match self.docs.open_version_of(&up.name) {
                Some(vid) => {
                    if !up.replaced {
                        return Err(Error::InvalidDelta(format!(
                            "upsert of {} not flagged as replacement but an open version exists",
                            up.name
                        )));
                    }
                    closed.push((vid, delta.ts));
                }
                None => {
                    if up.replaced {
                        return Err(Error::InvalidDelta(format!(
                            "upsert of {} flagged as replacement but no open version exists",
                            up.name
                        )));
                    }
                }
            }
        }
        for name in &delta.deletes {
            // A delete of an unknown name is a no-op by contract.
            if let Some(vid) = self.docs.open_version_of(name) {
                closed.push((vid, delta.ts));
            }
        }

        // Mutation phase: nothing below can fail.
        for &(vid, ts) in &closed {
            self.docs.valid_to[vid as usize] = Some(ts.0);
        }
        let first_tid = self.dict.len() as TermId;
        let first_vid = self.docs.len() as VersionId;
        let first_posting = self.postings.len() as u64;
        let posting_count: usize = delta.upserts.iter().map(|u| u.term_freqs.len()).sum();
        self.docs.reserve(delta.upserts.len());
        let mut batch_postings = Vec::with_capacity(posting_count);
        for up in &delta.upserts {
            let vid = self.docs.push(
                up.name.clone(),
                delta.ts.0,
                up.exact_len,
                up.approx_len_code,
            );
            for (term, &tf) in &up.term_freqs {
                let tid = match self.term_ids.get(term) {
                    Some(&tid) => tid,
                    None => {
                        let tid = self.dict.len() as TermId;
                        self.dict.push(term.clone());
                        self.term_ids.insert(term.clone(), tid);
                        self.postings.runs.push(Vec::new());
                        tid
                    }
                };
                batch_postings.push(TermPosting {
                    term_id: tid,
                    version_id: vid,
                    tf,
                });
            }
        }
        batch_postings.sort_unstable_by_key(|p| (p.term_id, p.version_id));
        self.postings.reserve(batch_postings.len());
        for &p in &batch_postings {
            self.postings.push(p);
        }
        self.clock = delta.ts;
        self.wall_clocks
            .push(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true));
        Ok(AppliedBatch {
            ts: delta.ts,
            new_terms: first_tid..self.dict.len() as TermId,
            closed,
            new_versions: first_vid..self.docs.len() as VersionId,
            new_postings: first_posting..self.postings.len() as u64,
        })
    }

    /// Replay path for [`crate::storage`]: re-applies persisted rows
    /// without re-deriving them. Caller guarantees the rows came from the
    /// logs in append order; referential errors surface as corruption.
    pub(crate) fn replay_dict(&mut self, entry: &DictEntry) -> std::result::Result<(), String> {
        if entry.term_id != self.dict.len() as TermId {
            return Err(format!(
                "dict id {} out of order, expected {}",
                entry.term_id,
                self.dict.len()
            ));
        }
        if self.term_ids.contains_key(&entry.term) {
            return Err(format!("duplicate dictionary term {:?}", entry.term));
        }
        self.dict.push(entry.term.clone());
        self.term_ids.insert(entry.term.clone(), entry.term_id);
        self.postings.runs.push(Vec::new());
        Ok(())
    }

    pub(crate) fn replay_version(
        &mut self,
        vid: VersionId,
        name: &str,
        from: Timestamp,
        exact_len: u32,
        code: u8,
    ) -> std::result::Result<(), String> {
        if vid != self.docs.len() as VersionId {
            return Err(format!(
                "version id {} out of order, expected {}",
                vid,
                self.docs.len()
            ));
        }
        self.docs.push(name.to_string(), from.0, exact_len, code);
        Ok(())
    }

    pub(crate) fn replay_close(
        &mut self,
        vid: VersionId,
        to: Timestamp,
    ) -> std::result::Result<(), String> {
        let Some(slot) = self.docs.valid_to.get_mut(vid as usize) else {
            return Err(format!("close record targets unknown version {vid}"));
        };
        if slot.is_some() {
            return Err(format!("close record targets already-closed version {vid}"));
        }
        if to.0 <= self.docs.valid_from[vid as usize] {
            return Err(format!(
                "close at {} not after valid_from {} of version {vid}",
                to.0, self.docs.valid_from[vid as usize]
            ));
        }
        *slot = Some(to.0);
        Ok(())
    }

    pub(crate) fn replay_posting(&mut self, p: TermPosting) -> std::result::Result<(), String> {
        if p.term_id as usize >= self.dict.len() {
            return Err(format!("posting references unknown term id {}", p.term_id));
        }
        if p.version_id as usize >= self.docs.len() {
            return Err(format!(
                "posting references unknown version id {}",
                p.version_id
            ));
        }
        if p.tf == 0 {
            return Err("posting with zero term frequency".to_string());
        }
        self.postings.push(p);
        Ok(())
    }

    pub(crate) fn set_clock(&mut self, clock: Timestamp) {
        self.clock = clock;
        self.wall_clocks = vec![String::new(); clock.0 as usize];
    }

    /// Documents alive at `ts`, by a scan of the validity columns.
    pub fn n_docs_at(&self, ts: Timestamp) -> Result<u64> {
        self.check_not_future(ts)?;
        let mut n = 0u64;
        for i in 0..self.docs.len() {
            if interval_valid_at(self.docs.valid_from[i], self.docs.valid_to[i], ts.0) {
                n += 1;
            }
        }
        Ok(n)
    }

    /// Number of distinct documents valid at `ts` containing `term`; 0
    /// for unknown terms. Recomputed from the posting columns on every
    /// call — nothing is precomputed.
    pub fn df_at(&self, term: &str, ts: Timestamp) -> Result<u64> {
        self.check_not_future(ts)?;
        let Some(&tid) = self.term_ids.get(term) else {
            return Ok(0);
        };
        Ok(self.df_of_tid(tid, ts))
    }

    fn df_of_tid(&self, tid: TermId, ts: Timestamp) -> u64 {
        let mut df = 0u64;
        for (vid, _) in self.postings.rows_of(tid) {
            let i = vid as usize;
            if interval_valid_at(self.docs.valid_from[i], self.docs.valid_to[i], ts.0) {
                df += 1;
            }
        }
        df
    }

    /// Mean exact length over documents valid at `ts`; 0 when none.
    pub fn avgdl_at(&self, ts: Timestamp) -> Result<f64> {
        Ok(self.stats_at(ts)?.avgdl)
    }

    pub fn stats_at(&self, ts: Timestamp) -> Result<CorpusStats> {
        self.check_not_future(ts)?;
        let mut n = 0u64;
        let mut total = 0u64;
        for i in 0..self.docs.len() {
            if interval_valid_at(self.docs.valid_from[i], self.docs.valid_to[i], ts.0) {
                n += 1;
                total += u64::from(self.docs.exact_len[i]);
            }
        }
        Ok(CorpusStats::from_totals(n, total))
    }

    /// Top-k BM25 restricted to the corpus state at `ts`: N, df, and
    /// avgdl are all recomputed for that timestamp and only postings of
    /// versions valid then contribute. All arithmetic in double
    /// precision; ranking rule identical to the live engine.
    pub fn search_at(
        &self,
        query: &str,
        ts: Timestamp,
        params: &ScoringParams,
    ) -> Result<RankedList> {
        self.check_not_future(ts)?;
        let tokens = analyze(query, &self.analyzer);
        if tokens.is_empty() {
            return Ok(RankedList::default());
        }
        let stats = self.stats_at(ts)?;
        if stats.n_docs == 0 {
            return Ok(RankedList::default());
        }
        let mut acc: HashMap<VersionId, f64> = HashMap::new();
        for token in &tokens {
            let Some(&tid) = self.term_ids.get(token.as_str()) else {
                continue;
            };
            let df = self.df_of_tid(tid, ts);
            if df == 0 {
                continue;
            }
            let idf = idf(stats.n_docs, df);
            for (vid, tf) in self.postings.rows_of(tid) {
                let i = vid as usize;
                if !interval_valid_at(self.docs.valid_from[i], self.docs.valid_to[i], ts.0) {
                    continue;
                }
                let dl = decode_len(self.docs.approx_len_code[i]);
                let lf = length_factor(params.b, dl, stats.avgdl);
                *acc.entry(vid).or_insert(0.0) += bm25_term(idf, tf, params.k1, lf);
            }
        }
        let scores = acc
            .into_iter()
            .map(|(vid, score)| (self.docs.names[vid as usize].clone(), score))
            .collect();
        Ok(RankedList::from_scores(scores, params.k))
    }

    /// Checks the version-chain invariant for every name: pairwise
    /// disjoint `[valid_from, valid_to)` intervals and at most one open
    /// version.
    pub fn check_version_chains(&self) -> Result<()> {
        let mut by_name: HashMap<&str, Vec<(u64, Option<u64>)>> = HashMap::new();
        for i in 0..self.docs.len() {
            if let Some(to) = self.docs.valid_to[i] {
                if to <= self.docs.valid_from[i] {
                    return Err(Error::InvariantViolation(format!(
                        "version {i} has valid_to {to} <= valid_from {}",
                        self.docs.valid_from[i]
                    )));
                }
            }
            by_name
                .entry(self.docs.names[i].as_str())
                .or_default()
                .push((self.docs.valid_from[i], self.docs.valid_to[i]));
        }
        for (name, mut intervals) in by_name {
            intervals.sort_unstable();
            let open = intervals.iter().filter(|(_, to)| to.is_none()).count();
            if open > 1 {
                return Err(Error::InvariantViolation(format!(
                    "document {name} has {open} open versions"
                )));
            }
            for pair in intervals.windows(2) {
                let (prev_from, prev_to) = pair[0];
                let (next_from, _) = pair[1];
                match prev_to {
                    Some(to) if to <= next_from => {}
                    _ => {
                        return Err(Error::InvariantViolation(format!(
                            "document {name} has overlapping versions \
                             [{prev_from},{prev_to:?}) and [{next_from},..)"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
