//! Measurement harness: runs query sets against both engines after each
//! ingested batch and flattens the observations into CSV rows.
//!
//! Per (batch, query set) row it records mean per-query latency for each
//! engine, the largest live-vs-versioned score difference, the mean gap
//! between consecutive ranks, the number of rankings that disagree beyond
//! the near-tie allowance, and the number of benign near-tie swaps needed
//! to align the rest.

use crate::error::{Error, Result};
use crate::ingest::BatchStats;
use crate::live_index::LiveIndex;
use crate::system::System;
use crate::types::RankedList;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Query-set sizes used when sampling from the dictionary: 1-, 2-, 5-,
/// and 10-term queries.
pub const DEFAULT_SET_SIZES: [usize; 4] = [1, 2, 5, 10];

/// Minimum document frequency for a term to be sampled into a generated
/// query; keeps result lists from degenerating to one or two entries.
const MIN_SAMPLED_DF: u64 = 5;

/// One bench.csv row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub ts: u64,
    pub cum_docs: u64,
    pub live_ms: f64,
    pub sync_ms: f64,
    /// Terms per query in this set.
    pub qset: usize,
    pub live_q_ms: f64,
    pub vcbr_q_ms: f64,
    pub max_score_diff: f64,
    pub mean_consec_gap: f64,
    pub rank_mismatches: u64,
    pub corrections: u64,
    pub store_bytes: u64,
    pub live_index_bytes: u64,
}

pub const CSV_HEADER: &str = "ts,cum_docs,live_ms,sync_ms,qset,live_q_ms,vcbr_q_ms,\
max_score_diff,mean_consec_gap,rank_mismatches,corrections,store_bytes,live_index_bytes";

impl BenchRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{:.3},{:.3},{},{:.4},{:.4},{:.3e},{:.3e},{},{},{},{}",
            self.ts,
            self.cum_docs,
            self.live_ms,
            self.sync_ms,
            self.qset,
            self.live_q_ms,
            self.vcbr_q_ms,
            self.max_score_diff,
            self.mean_consec_gap,
            self.rank_mismatches,
            self.corrections,
            self.store_bytes,
            self.live_index_bytes,
        )
    }
}

/// A set of same-length queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySet {
    pub terms_per_query: usize,
    pub queries: Vec<String>,
}

/// Samples query sets from the live dictionary with a fixed seed,
/// preferring terms with df ≥ 5 (falling back to the whole dictionary).
/// Candidates are sorted before sampling so the outcome depends only on
/// the indexed corpus and the seed.
pub fn sample_query_sets(live: &LiveIndex, seed: u64, per_set: usize) -> Result<Vec<QuerySet>> {
    let mut frequent: Vec<&str> = live
        .term_dfs()
        .filter(|&(_, df)| df >= MIN_SAMPLED_DF)
        .map(|(t, _)| t)
        .collect();
    if frequent.is_empty() {
        frequent = live.term_dfs().map(|(t, _)| t).collect();
    }
    if frequent.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    frequent.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = Vec::with_capacity(DEFAULT_SET_SIZES.len());
    for &terms_per_query in &DEFAULT_SET_SIZES {
        let mut queries = Vec::with_capacity(per_set);
        for _ in 0..per_set {
            let query = if frequent.len() >= terms_per_query {
                frequent
                    .choose_multiple(&mut rng, terms_per_query)
                    .copied()
                    .collect::<Vec<_>>()
                    .join(" ")
            } else {
                (0..terms_per_query)
                    .map(|_| *frequent.choose(&mut rng).expect("non-empty"))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            queries.push(query);
        }
        sets.push(QuerySet {
            terms_per_query,
            queries,
        });
    }
    Ok(sets)
}

/// Parses a queries file: one query per line, optionally tagged with its
/// set as `"<n>|<query>"`. Untagged lines are grouped by their whitespace
/// token count. Sets come back ordered by term count.
pub fn parse_query_sets(text: &str) -> Result<Vec<QuerySet>> {
    let mut sets: std::collections::BTreeMap<usize, Vec<String>> = Default::default();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (bucket, query) = match line.split_once('|') {
            Some((tag, rest)) => match tag.trim().parse::<usize>() {
                Ok(n) if n >= 1 => (n, rest.trim().to_string()),
                _ => (line.split_whitespace().count(), line.to_string()),
            },
            None => (line.split_whitespace().count(), line.to_string()),
        };
        if !query.is_empty() {
            sets.entry(bucket).or_default().push(query);
        }
    }
    if sets.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    Ok(sets
        .into_iter()
        .map(|(terms_per_query, queries)| QuerySet {
            terms_per_query,
            queries,
        })
        .collect())
}

/// How one query's rankings relate across the two engines.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RankingComparison {
    /// Largest |live − versioned| score difference over shared documents.
    pub max_score_diff: f64,
    /// Sum and count of adjacent score gaps in the versioned list.
    pub gap_sum: f64,
    pub gap_pairs: u64,
    /// Near-tie adjacent swaps needed to align the versioned order with
    /// the live order.
    pub swaps: u64,
    /// True when the orders differ beyond non-overlapping near-tie swaps
    /// (or the lists disagree on membership).
    pub mismatched: bool,
}

/// Compares a live and a versioned ranking for the same query. Order
/// differences are attributed to near-ties when the versioned scores of
/// the flipped pair are closer than `epsilon`; anything else counts as a
/// mismatch.
pub fn compare_rankings(live: &RankedList, vcbr: &RankedList, epsilon: f64) -> RankingComparison {
    let mut cmp = RankingComparison::default();
    for pair in vcbr.entries.windows(2) {
        cmp.gap_sum += (pair[0].score - pair[1].score).abs();
        cmp.gap_pairs += 1;
    }
    for entry in &vcbr.entries {
        if let Some(other) = live.entries.iter().find(|e| e.name == entry.name) {
            let diff = (entry.score - other.score).abs();
            cmp.max_score_diff = cmp.max_score_diff.max(diff);
        }
    }
    if live.len() != vcbr.len() {
        cmp.mismatched = true;
        return cmp;
    }
    let mut i = 0;
    while i < vcbr.len() {
        if live.entries[i].name == vcbr.entries[i].name {
            i += 1;
            continue;
        }
        let swappable = i + 1 < vcbr.len()
            && vcbr.entries[i + 1].name == live.entries[i].name
            && vcbr.entries[i].name == live.entries[i + 1].name
            && (vcbr.entries[i].score - vcbr.entries[i + 1].score).abs() < epsilon;
        if swappable {
            cmp.swaps += 1;
            i += 2;
        } else {
            cmp.mismatched = true;
            return cmp;
        }
    }
    cmp
}

/// Runs every query set on both engines at the current clock and builds
/// one row per set, attaching the batch timings.
pub fn bench_batch_rows(
    system: &System,
    stats: &BatchStats,
    sets: &[QuerySet],
    epsilon: f64,
) -> Result<Vec<BenchRow>> {
    let store_bytes = system.store_log_bytes()?;
    let live_index_bytes = system.live().approx_bytes();
    let clock = system.clock();
    let mut rows = Vec::with_capacity(sets.len());
    for set in sets {
        let mut live_lists = Vec::with_capacity(set.queries.len());
        let live_start = Instant::now();
        for q in &set.queries {
            live_lists.push(system.search(q, None));
        }
        let live_q_ms = live_start.elapsed().as_secs_f64() * 1e3 / set.queries.len() as f64;

        let mut vcbr_lists = Vec::with_capacity(set.queries.len());
        let vcbr_start = Instant::now();
        for q in &set.queries {
            vcbr_lists.push(system.time_travel_search(q, Some(clock), None)?);
        }
        let vcbr_q_ms = vcbr_start.elapsed().as_secs_f64() * 1e3 / set.queries.len() as f64;

        let mut max_score_diff = 0.0f64;
        let mut gap_sum = 0.0;
        let mut gap_pairs = 0u64;
        let mut rank_mismatches = 0u64;
        let mut corrections = 0u64;
        for (live, vcbr) in live_lists.iter().zip(&vcbr_lists) {
            let cmp = compare_rankings(live, vcbr, epsilon);
            max_score_diff = max_score_diff.max(cmp.max_score_diff);
            gap_sum += cmp.gap_sum;
            gap_pairs += cmp.gap_pairs;
            corrections += cmp.swaps;
            if cmp.mismatched {
                rank_mismatches += 1;
            }
        }
        rows.push(BenchRow {
            ts: stats.ts.value(),
            cum_docs: stats.cumulative_docs,
            live_ms: stats.live_ms,
            sync_ms: stats.sync_ms,
            qset: set.terms_per_query,
            live_q_ms,
            vcbr_q_ms,
            max_score_diff,
            mean_consec_gap: if gap_pairs == 0 {
                0.0
            } else {
                gap_sum / gap_pairs as f64
            },
            rank_mismatches,
            corrections,
            store_bytes,
            live_index_bytes,
        });
    }
    Ok(rows)
}
