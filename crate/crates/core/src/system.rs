//! The assembled hybrid system: live index, versioned store, query
//! registry, and storage behind one handle.
//!
//! All writes funnel through [`System::ingest_batch`] and
//! [`System::register`], which keep the two engines and the logs in step.
//! Reads borrow `&self`, so any number of searches and resolutions can
//! run between writes.

use crate::analysis::{analyze, AnalyzerConfig};
use crate::error::{Error, Result};
use crate::ingest::{BatchDelta, BatchStats};
use crate::live_index::LiveIndex;
use crate::query_store::{QueryRecord, QueryStore};
use crate::reproducer::{self, ResolveReport, DEFAULT_TIE_EPSILON};
use crate::storage::Storage;
use crate::types::{CorpusStats, RankedList, ScoringParams, Timestamp};
use crate::versioned_store::{TermId, VersionId, VersionedStore};
use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

/// Creation-time configuration. Ignored when opening an existing store:
/// the manifest recorded at creation is authoritative, keeping the
/// analyzer and scoring parameters frozen for the life of the index.
#[derive(Debug, Clone, Default)]
pub struct SystemOptions {
    pub analyzer: AnalyzerConfig,
    pub scoring: ScoringParams,
}

impl SystemOptions {
    pub fn new() -> SystemOptions {
        SystemOptions {
            analyzer: AnalyzerConfig::new(),
            scoring: ScoringParams::default(),
        }
    }
}

/// Summary returned by [`System::verify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyReport {
    pub clock: Timestamp,
    pub versions: u64,
    pub postings: u64,
    pub dict_entries: u64,
    pub queries: u64,
    pub live_docs: u64,
}

pub struct System {
    analyzer: Arc<AnalyzerConfig>,
    scoring: ScoringParams,
    live: LiveIndex,
    versioned: VersionedStore,
    queries: QueryStore,
    storage: Storage,
}

impl std::fmt::Debug for System {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("System")
            .field("dir", &self.storage.dir())
            .field("clock", &self.versioned.clock())
            .field("live_docs", &self.live.n_docs())
            .finish_non_exhaustive()
    }
}

impl System {
    /// Opens (or creates) a store with the default analyzer and scoring
    /// parameters.
    pub fn open(dir: impl AsRef<Path>) -> Result<System> {
        System::open_with(dir, SystemOptions::new())
    }

    /// Opens `dir`, replaying the versioned store from its logs and
    /// rebuilding the live index from the versions valid at the manifest
    /// clock. A freshly opened system answers every operation exactly as
    /// the pre-restart system did.
    pub fn open_with(dir: impl AsRef<Path>, options: SystemOptions) -> Result<System> {
        let (storage, versioned, queries) =
            Storage::open(dir.as_ref(), options.analyzer, options.scoring)?;
        let analyzer = Arc::new(storage.manifest().analyzer.config.clone());
        let scoring = storage.manifest().scoring;
        let live = rebuild_live(&versioned, analyzer.clone());
        Ok(System {
            analyzer,
            scoring,
            live,
            versioned,
            queries,
            storage,
        })
    }

    pub fn dir(&self) -> &Path {
        self.storage.dir()
    }

    pub fn clock(&self) -> Timestamp {
        self.versioned.clock()
    }

    pub fn analyzer(&self) -> &Arc<AnalyzerConfig> {
        &self.analyzer
    }

    /// Store-wide scoring parameters (k1, b, default k).
    pub fn scoring(&self) -> ScoringParams {
        self.scoring
    }

    pub fn live(&self) -> &LiveIndex {
        &self.live
    }

    pub fn versioned(&self) -> &VersionedStore {
        &self.versioned
    }

    pub fn queries(&self) -> &QueryStore {
        &self.queries
    }

    fn params(&self, k: Option<usize>) -> ScoringParams {
        match k {
            Some(k) => self.scoring.with_k(k),
            None => self.scoring,
        }
    }

    /// Ingests one batch through both engines: analyzes each text once,
    /// applies the postings to the live index, applies the derived delta
    /// to the versioned store at clock+1, and commits the batch to disk.
    /// The clock advances exactly once per successful call.
    ///
    /// Duplicate names are rejected before anything is touched. Errors
    /// after that point (storage I/O) leave the in-memory state ahead of
    /// disk; callers must drop the handle and reopen.
    pub fn ingest_batch(
        &mut self,
        upserts: Vec<(String, String)>,
        deletes: Vec<String>,
    ) -> Result<BatchStats> {
        let mut names = HashSet::with_capacity(upserts.len() + deletes.len());
        for (name, _) in &upserts {
            if !names.insert(name.clone()) {
                return Err(Error::DuplicateName(name.clone()));
            }
        }
        for name in &deletes {
            if !names.insert(name.clone()) {
                return Err(Error::DuplicateName(name.clone()));
            }
        }
        let ts = self.versioned.clock().next();

        let live_start = Instant::now();
        let analyzed: Vec<(String, Vec<String>)> = upserts
            .into_iter()
            .map(|(name, text)| {
                let tokens = analyze(&text, &self.analyzer);
                (name, tokens)
            })
            .collect();
        let docs_in = analyzed.len() as u64;
        let doc_deltas = self.live.upsert_batch(analyzed)?;
        for name in &deletes {
            self.live.delete_doc(name);
        }
        let live_ms = millis_since(live_start);

        let delta = BatchDelta {
            ts,
            upserts: doc_deltas,
            deletes,
        };
        let sync_start = Instant::now();
        let applied = self.versioned.apply_batch(&delta)?;
        let sync_ms = millis_since(sync_start);

        self.storage.commit_batch(&self.versioned, &applied)?;
        Ok(BatchStats {
            ts,
            docs_in,
            live_ms,
            sync_ms,
            cumulative_docs: self.versioned.version_count(),
        })
    }

    /// Current-state top-k search on the live engine.
    pub fn search(&self, query: &str, k: Option<usize>) -> RankedList {
        self.live.search(query, &self.params(k))
    }

    /// Point-in-time search on the versioned engine; defaults to the most
    /// recent state when no timestamp is given.
    pub fn time_travel_search(
        &self,
        query: &str,
        ts: Option<Timestamp>,
        k: Option<usize>,
    ) -> Result<RankedList> {
        reproducer::time_travel_search(&self.versioned, query, ts, &self.params(k))
    }

    pub fn current_stats(&self) -> CorpusStats {
        self.live.current_stats()
    }

    /// Registers an executed query with its ranked list; returns the pid.
    /// Registering an identical (query, timestamp, result) triple again
    /// returns the same pid without duplicating the record.
    pub fn register(
        &mut self,
        query_text: &str,
        k: usize,
        exec_ts: Timestamp,
        list: &RankedList,
        creator: Option<String>,
        description: Option<String>,
    ) -> Result<String> {
        if exec_ts > self.clock() {
            return Err(Error::FutureTimestamp {
                requested: exec_ts.0,
                clock: self.clock().0,
            });
        }
        let record = QueryRecord::new(
            query_text.to_string(),
            k,
            exec_ts,
            list,
            creator,
            description,
        );
        let pid = record.pid.clone();
        if self.queries.get(&pid).is_none() {
            self.storage.append_query(&record)?;
            self.queries.insert_if_absent(record);
        }
        Ok(pid)
    }

    /// Executes a live search at the current clock and registers it for
    /// citation. Returns the pid together with the list it identifies.
    pub fn cite(
        &mut self,
        query: &str,
        k: Option<usize>,
        creator: Option<String>,
        description: Option<String>,
    ) -> Result<(String, RankedList)> {
        let params = self.params(k);
        let list = self.live.search(query, &params);
        let exec_ts = self.clock();
        let pid = self.register(query, params.k, exec_ts, &list, creator, description)?;
        Ok((pid, list))
    }

    /// Resolves a pid to its original ranked list: re-executes on the
    /// versioned store at the stored timestamp, verifies the hash, and
    /// applies near-tie correction if needed.
    pub fn resolve(&self, pid: &str, epsilon: Option<f64>) -> Result<ResolveReport> {
        let record = self
            .queries
            .get(pid)
            .ok_or_else(|| Error::UnknownPid(pid.to_string()))?;
        reproducer::resolve(
            &self.versioned,
            record,
            &self.scoring,
            epsilon.unwrap_or(DEFAULT_TIE_EPSILON),
        )
    }

    /// On-disk footprint of the versioned store's index logs.
    pub fn store_log_bytes(&self) -> Result<u64> {
        self.storage.index_log_bytes()
    }

    /// Re-checks every cross-engine invariant: version chains, document
    /// counts, token totals, and per-term document frequencies at the
    /// current clock.
    pub fn verify(&self) -> Result<VerifyReport> {
        self.versioned.check_version_chains()?;
        let clock = self.clock();
        let n_versioned = self.versioned.n_docs_at(clock)?;
        if n_versioned != self.live.n_docs() {
            return Err(Error::InvariantViolation(format!(
                "document count mismatch: versioned {} vs live {}",
                n_versioned,
                self.live.n_docs()
            )));
        }
        let total: u64 = self
            .versioned
            .versions()
            .filter(|v| v.valid_at(clock))
            .map(|v| u64::from(v.exact_len))
            .sum();
        if total != self.live.total_token_count() {
            return Err(Error::InvariantViolation(format!(
                "token total mismatch: versioned {} vs live {}",
                total,
                self.live.total_token_count()
            )));
        }
        for tid in 0..self.versioned.dict_len() {
            let term = self.versioned.term(tid).expect("dense dictionary");
            let df_versioned = self.versioned.df_at(term, clock)?;
            let df_live = self.live.df(term);
            if df_versioned != df_live {
                return Err(Error::InvariantViolation(format!(
                    "df mismatch for {term:?}: versioned {df_versioned} vs live {df_live}"
                )));
            }
        }
        for (term, df_live) in self.live.term_dfs() {
            if self.versioned.term_id(term).is_none() {
                return Err(Error::InvariantViolation(format!(
                    "live term {term:?} (df {df_live}) missing from dictionary"
                )));
            }
        }
        Ok(VerifyReport {
            clock,
            versions: self.versioned.version_count(),
            postings: self.versioned.posting_count(),
            dict_entries: self.versioned.dict_len(),
            queries: self.queries.len() as u64,
            live_docs: self.live.n_docs(),
        })
    }
}

fn millis_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Reconstructs the live index from the versions that are open at the
/// versioned store's clock.
fn rebuild_live(versioned: &VersionedStore, analyzer: Arc<AnalyzerConfig>) -> LiveIndex {
    let mut live = LiveIndex::new(analyzer);
    let open: Vec<_> = versioned
        .versions()
        .filter(|v| v.valid_to.is_none())
        .collect();
    let open_ids: HashSet<VersionId> = open.iter().map(|v| v.version_id).collect();
    let mut by_vid: HashMap<VersionId, Vec<(TermId, u32)>> = HashMap::new();
    for p in versioned.postings() {
        if open_ids.contains(&p.version_id) {
            by_vid
                .entry(p.version_id)
                .or_default()
                .push((p.term_id, p.tf));
        }
    }
    for v in &open {
        let terms: Vec<(&str, u32)> = by_vid
            .remove(&v.version_id)
            .unwrap_or_default()
            .into_iter()
            .map(|(tid, tf)| (versioned.term(tid).expect("posting term"), tf))
            .collect();
        live.restore_doc(&v.name, &terms, v.exact_len);
    }
    live
}
