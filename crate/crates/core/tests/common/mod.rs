//! Shared test infrastructure: a brute-force double-precision oracle for
//! corpus statistics and ranking, deterministic history generation, and
//! comparison helpers. The oracle deliberately re-derives everything from
//! first principles — full scans over its own version table and an
//! independent 4-significant-bit length truncation — so it shares no code
//! path with the engines it checks.

use chronidx_core::analysis::{analyze, AnalyzerConfig};
use chronidx_core::ingest::BatchDelta;
use chronidx_core::live_index::LiveIndex;
use chronidx_core::types::RankedList;
use chronidx_core::versioned_store::VersionedStore;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

// ---------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------

pub struct OracleVersion {
    pub name: String,
    pub tokens: Vec<String>,
    pub from: u64,
    pub to: Option<u64>,
}

/// Mirror of the versioned semantics built independently: a flat version
/// table applied batch by batch, with every statistic recomputed by a
/// linear scan.
pub struct Oracle {
    pub versions: Vec<OracleVersion>,
    pub clock: u64,
    analyzer: AnalyzerConfig,
}

/// Independent statement of the lossy length rule: keep the 4 most
/// significant bits, zero the rest.
pub fn oracle_approx_len(len: u32) -> u32 {
    if len < 16 {
        return len;
    }
    let shift = 32 - len.leading_zeros() - 4;
    (len >> shift) << shift
}

impl Oracle {
    pub fn new() -> Oracle {
        Oracle {
            versions: Vec::new(),
            clock: 0,
            analyzer: AnalyzerConfig::new(),
        }
    }

    pub fn apply(&mut self, upserts: &[(String, String)], deletes: &[String]) {
        self.clock += 1;
        let ts = self.clock;
        for (name, text) in upserts {
            self.close_open(name, ts);
            self.versions.push(OracleVersion {
                name: name.clone(),
                tokens: analyze(text, &self.analyzer),
                from: ts,
                to: None,
            });
        }
        for name in deletes {
            self.close_open(name, ts);
        }
    }

    fn close_open(&mut self, name: &str, ts: u64) {
        for v in &mut self.versions {
            if v.name == name && v.to.is_none() {
                v.to = Some(ts);
            }
        }
    }

    fn valid(v: &OracleVersion, ts: u64) -> bool {
        v.from <= ts && v.to.map_or(true, |t| t > ts)
    }

    pub fn n_docs_at(&self, ts: u64) -> u64 {
        self.versions.iter().filter(|v| Self::valid(v, ts)).count() as u64
    }

    pub fn df_at(&self, term: &str, ts: u64) -> u64 {
        self.versions
            .iter()
            .filter(|v| Self::valid(v, ts) && v.tokens.iter().any(|t| t == term))
            .count() as u64
    }

    pub fn avgdl_at(&self, ts: u64) -> f64 {
        let valid: Vec<_> = self.versions.iter().filter(|v| Self::valid(v, ts)).collect();
        if valid.is_empty() {
            return 0.0;
        }
        let total: u64 = valid.iter().map(|v| v.tokens.len() as u64).sum();
        total as f64 / valid.len() as f64
    }

    /// Every term alive at `ts`, for probing.
    pub fn terms_at(&self, ts: u64) -> BTreeSet<String> {
        self.versions
            .iter()
            .filter(|v| Self::valid(v, ts))
            .flat_map(|v| v.tokens.iter().cloned())
            .collect()
    }

    /// Full double-precision ranking (not truncated) at `ts`, straight
    /// from the scoring definition.
    pub fn search_at(&self, query: &str, ts: u64, k1: f64, b: f64) -> Vec<(String, f64)> {
        let tokens = analyze(query, &self.analyzer);
        if tokens.is_empty() {
            return Vec::new();
        }
        let valid: Vec<&OracleVersion> =
            self.versions.iter().filter(|v| Self::valid(v, ts)).collect();
        if valid.is_empty() {
            return Vec::new();
        }
        let n = valid.len() as f64;
        let total: u64 = valid.iter().map(|v| v.tokens.len() as u64).sum();
        let avgdl = total as f64 / n;
        let mut ranked = Vec::new();
        for v in &valid {
            let mut score = 0.0;
            let mut matched = false;
            for t in &tokens {
                let tf = v.tokens.iter().filter(|x| *x == t).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = valid
                    .iter()
                    .filter(|w| w.tokens.iter().any(|x| x == t))
                    .count() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                let dl = f64::from(oracle_approx_len(v.tokens.len() as u32));
                score += idf * tf / (tf + k1 * (1.0 - b + b * dl / avgdl));
                matched = true;
            }
            if matched {
                ranked.push((v.name.clone(), score));
            }
        }
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked
    }
}

// ---------------------------------------------------------------------
// In-memory pairing of the two engines (no storage underneath)
// ---------------------------------------------------------------------

pub struct MemSystem {
    pub live: LiveIndex,
    pub versioned: VersionedStore,
    analyzer: Arc<AnalyzerConfig>,
}

impl MemSystem {
    pub fn new() -> MemSystem {
        let analyzer = Arc::new(AnalyzerConfig::new());
        MemSystem {
            live: LiveIndex::new(analyzer.clone()),
            versioned: VersionedStore::new(analyzer.clone()),
            analyzer,
        }
    }

    pub fn ingest(&mut self, upserts: &[(String, String)], deletes: &[String]) {
        let analyzed = upserts
            .iter()
            .map(|(name, text)| (name.clone(), analyze(text, &self.analyzer)))
            .collect();
        let doc_deltas = self.live.upsert_batch(analyzed).expect("distinct names");
        for name in deletes {
            self.live.delete_doc(name);
        }
        let delta = BatchDelta {
            ts: self.versioned.clock().next(),
            upserts: doc_deltas,
            deletes: deletes.to_vec(),
        };
        self.versioned.apply_batch(&delta).expect("valid batch");
    }
}

// ---------------------------------------------------------------------
// Ranking comparison
// ---------------------------------------------------------------------

/// Asserts a top-k engine list agrees with a full oracle ranking: same
/// order except inside runs of consecutive oracle entries whose adjacent
/// score gaps are below `eps` (where floating-point noise may permute
/// legitimately), and per-document scores within `score_tol` of the
/// oracle's.
pub fn assert_ranking_equiv(
    tag: &str,
    engine: &RankedList,
    oracle_full: &[(String, f64)],
    k: usize,
    eps: f64,
    score_tol: f64,
) {
    let n = k.min(oracle_full.len());
    assert_eq!(
        engine.len(),
        n,
        "{tag}: engine returned {} entries, oracle implies {n}",
        engine.len()
    );
    let mut block_start = 0;
    while block_start < n {
        let mut block_end = block_start + 1;
        while block_end < oracle_full.len()
            && (oracle_full[block_end - 1].1 - oracle_full[block_end].1).abs() < eps
        {
            block_end += 1;
        }
        let block: HashSet<&str> = oracle_full[block_start..block_end]
            .iter()
            .map(|(name, _)| name.as_str())
            .collect();
        for rank in block_start..block_end.min(n) {
            assert!(
                block.contains(engine.entries[rank].name.as_str()),
                "{tag}: rank {rank} holds {:?}, outside the oracle tie block {:?}",
                engine.entries[rank].name,
                block
            );
        }
        block_start = block_end;
    }
    for entry in engine.iter() {
        let oracle_score = oracle_full
            .iter()
            .find(|(name, _)| *name == entry.name)
            .map(|(_, s)| *s)
            .unwrap_or_else(|| panic!("{tag}: {:?} not in oracle ranking", entry.name));
        assert!(
            (entry.score - oracle_score).abs() <= score_tol,
            "{tag}: score of {:?} diverges: engine {} vs oracle {}",
            entry.name,
            entry.score,
            oracle_score
        );
    }
}

// ---------------------------------------------------------------------
// Deterministic randomized histories
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct HistoryParams {
    pub seed: u64,
    pub batches: usize,
    pub docs_per_batch: usize,
    pub vocab: usize,
    pub max_len: usize,
    /// Probability that an upsert targets an existing document.
    pub update_frac: f64,
    /// Probability that an alive document gets deleted in a batch.
    pub delete_frac: f64,
}

pub type Batch = (Vec<(String, String)>, Vec<String>);

/// Builds a randomized but reproducible batch history with inserts,
/// updates, deletes (including the occasional unknown-name delete), and
/// some zero-token documents. Total distinct documents stay ≤ 500.
pub fn generate_history(p: &HistoryParams) -> Vec<Batch> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let vocab: Vec<String> = (0..p.vocab as u64)
        .map(chronidx_core::synth::pseudo_word)
        .collect();
    let mut alive: Vec<String> = Vec::new();
    let mut created = 0usize;
    let mut batches = Vec::with_capacity(p.batches);
    for _ in 0..p.batches {
        let mut upserts: Vec<(String, String)> = Vec::new();
        let mut used: HashSet<String> = HashSet::new();
        let n_up = rng.gen_range(0..=p.docs_per_batch);
        for _ in 0..n_up {
            let want_update = !alive.is_empty() && (rng.gen::<f64>() < p.update_frac || created >= 500);
            let name = if want_update {
                alive[rng.gen_range(0..alive.len())].clone()
            } else if created < 500 {
                created += 1;
                format!("d{:04}", created)
            } else {
                continue;
            };
            if !used.insert(name.clone()) {
                continue;
            }
            let len = rng.gen_range(0..=p.max_len);
            let text = (0..len)
                .map(|_| vocab[rng.gen_range(0..vocab.len())].as_str())
                .collect::<Vec<_>>()
                .join(" ");
            upserts.push((name, text));
        }
        let mut deletes = Vec::new();
        for name in alive.clone() {
            if used.contains(&name) {
                continue;
            }
            if rng.gen::<f64>() < p.delete_frac {
                used.insert(name.clone());
                deletes.push(name);
            }
        }
        if rng.gen::<f64>() < 0.1 {
            let ghost = format!("ghost{:03}", rng.gen_range(0..1000));
            if !used.contains(&ghost) {
                deletes.push(ghost);
            }
        }
        for (name, _) in &upserts {
            if !alive.contains(name) {
                alive.push(name.clone());
            }
        }
        alive.retain(|name| !deletes.contains(name));
        batches.push((upserts, deletes));
    }
    batches
}

// ---------------------------------------------------------------------
// Rank statistics
// ---------------------------------------------------------------------

/// Spearman rank correlation of a series against its index order, with
/// average ranks for ties.
pub fn spearman_vs_index(values: &[f64]) -> f64 {
    let n = values.len();
    assert!(n >= 2);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j - 1) as f64 / 2.0 + 1.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg_rank;
        }
        i = j;
    }
    let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
    pearson(&xs, &ranks)
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx).powi(2);
        vy += (y - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}
