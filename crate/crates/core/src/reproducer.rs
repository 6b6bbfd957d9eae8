//! Re-executes registered queries on the versioned store, verifies the
//! result hash, and repairs the rare rank swaps caused by the two
//! engines' floating-point divergence.
//!
//! A registered list comes from the single-precision live engine; the
//! re-execution runs in double precision. When two neighbouring documents
//! score within [`DEFAULT_TIE_EPSILON`] of each other, the engines may
//! legitimately order them differently. Correction searches the space of
//! non-overlapping adjacent swaps among such near-tie pairs — smallest
//! total gap first — for the permutation that reproduces the stored hash,
//! and fails loudly rather than guess when the tie structure is too wide.

use crate::error::{Error, Result};
use crate::query_store::{canonical_hash, QueryRecord};
use crate::types::{RankedList, ScoringParams, Timestamp};
use crate::versioned_store::VersionedStore;

/// Score gap below which two adjacent results count as a near-tie.
/// Sits between the observed cross-engine divergence (~1e-5) and the
/// typical gap between consecutive ranks (~1e-2).
pub const DEFAULT_TIE_EPSILON: f64 = 1e-4;

/// Maximum number of near-tie candidate pairs before correction refuses
/// to search.
pub const MAX_TIE_CANDIDATES: usize = 16;

/// Maximum number of swap combinations tried during correction.
pub const MAX_TIE_PERMUTATIONS: usize = 256;

/// Outcome of resolving a pid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolveReport {
    pub pid: String,
    /// The reproduced list; hash-equal to the stored one when
    /// `verified` is true.
    pub list: RankedList,
    pub verified: bool,
    pub corrected: bool,
    /// Applied swaps as 1-based (rank, rank+1) pairs.
    pub swaps_applied: Vec<(usize, usize)>,
    /// Largest score gap among swapped pairs: the observed upper bound on
    /// the engines' divergence for this resolution. 0 when no correction
    /// was needed.
    pub max_cross_engine_gap: f64,
}

/// Near-tie correction: finds the combination of non-overlapping adjacent
/// swaps among pairs closer than `epsilon` whose canonical hash matches
/// `target_hash`. Combinations are tried in order of increasing total
/// gap, at most [`MAX_TIE_PERMUTATIONS`] of them. Only ever permutes
/// within candidate pairs, so the document multiset is preserved.
pub fn correct_ties(
    list: &RankedList,
    target_hash: &str,
    epsilon: f64,
) -> Result<(RankedList, Vec<(usize, usize)>)> {
    let computed = canonical_hash(list);
    debug_assert_ne!(computed, target_hash, "caller verified already");
    // Candidate pair i swaps ranks i+1 and i+2 (0-based entries i, i+1).
    let candidates: Vec<(usize, f64)> = list
        .entries
        .windows(2)
        .enumerate()
        .filter_map(|(i, pair)| {
            let gap = (pair[0].score - pair[1].score).abs();
            (gap < epsilon).then_some((i, gap))
        })
        .collect();
    if candidates.len() > MAX_TIE_CANDIDATES {
        return Err(Error::AmbiguousTieStructure {
            candidates: candidates.len(),
            limit: MAX_TIE_CANDIDATES,
        });
    }
    // All subsets of pairwise non-overlapping candidates, cheapest first.
    let mut combos: Vec<(f64, u32)> = Vec::new();
    for mask in 1u32..(1 << candidates.len()) {
        let mut last_pos: Option<usize> = None;
        let mut total = 0.0;
        let mut ok = true;
        for (bit, &(pos, gap)) in candidates.iter().enumerate() {
            if mask & (1 << bit) == 0 {
                continue;
            }
            if let Some(prev) = last_pos {
                if pos - prev < 2 {
                    ok = false;
                    break;
                }
            }
            last_pos = Some(pos);
            total += gap;
        }
        if ok {
            combos.push((total, mask));
        }
    }
    combos.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    combos.truncate(MAX_TIE_PERMUTATIONS);

    for &(_, mask) in &combos {
        let mut permuted = list.clone();
        let mut swaps = Vec::new();
        for (bit, &(pos, _)) in candidates.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                permuted.entries.swap(pos, pos + 1);
                swaps.push((pos + 1, pos + 2));
            }
        }
        if canonical_hash(&permuted) == target_hash {
            return Ok((permuted, swaps));
        }
    }
    Err(Error::VerificationFailed {
        stored: target_hash.to_string(),
        computed,
    })
}

/// Resolves a stored query record: re-executes it on the versioned store
/// at its original execution timestamp, verifies the canonical hash, and
/// applies near-tie correction when the plain re-execution does not
/// match.
pub fn resolve(
    versioned: &VersionedStore,
    record: &QueryRecord,
    base_params: &ScoringParams,
    epsilon: f64,
) -> Result<ResolveReport> {
    let params = base_params.with_k(record.k);
    let list = versioned.search_at(&record.query_text, record.exec_ts, &params)?;
    if canonical_hash(&list) == record.result_hash {
        return Ok(ResolveReport {
            pid: record.pid.clone(),
            list,
            verified: true,
            corrected: false,
            swaps_applied: Vec::new(),
            max_cross_engine_gap: 0.0,
        });
    }
    let (corrected, swaps) = correct_ties(&list, &record.result_hash, epsilon)?;
    let max_gap = swaps
        .iter()
        .map(|&(rank, _)| {
            (corrected.entries[rank - 1].score - corrected.entries[rank].score).abs()
        })
        .fold(0.0, f64::max);
    Ok(ResolveReport {
        pid: record.pid.clone(),
        list: corrected,
        verified: true,
        corrected: true,
        swaps_applied: swaps,
        max_cross_engine_gap: max_gap,
    })
}

/// Point-in-time query without registration or verification. With no
/// timestamp given, queries the most recent state.
pub fn time_travel_search(
    versioned: &VersionedStore,
    query: &str,
    ts: Option<Timestamp>,
    params: &ScoringParams,
) -> Result<RankedList> {
    versioned.search_at(query, ts.unwrap_or_else(|| versioned.clock()), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ScoredDoc;

    fn list_of(pairs: &[(&str, f64)]) -> RankedList {
        RankedList {
            entries: pairs
                .iter()
                .map(|&(name, score)| ScoredDoc {
                    name: name.into(),
                    score,
                })
                .collect(),
        }
    }

    fn hash_of_names(names: &[&str]) -> String {
        canonical_hash(&list_of(
            &names.iter().map(|&n| (n, 0.0)).collect::<Vec<_>>(),
        ))
    }

    #[test]
    fn corrects_a_single_near_tie_swap() {
        let list = list_of(&[("a", 0.5), ("b", 0.30001), ("c", 0.30000)]);
        let target = hash_of_names(&["a", "c", "b"]);
        let (corrected, swaps) = correct_ties(&list, &target, 1e-4).unwrap();
        assert_eq!(corrected.names(), vec!["a", "c", "b"]);
        assert_eq!(swaps, vec![(2, 3)]);
    }

    #[test]
    fn fails_without_candidate_pairs() {
        let list = list_of(&[("a", 0.5), ("b", 0.3)]);
        let target = hash_of_names(&["b", "a"]);
        let err = correct_ties(&list, &target, 1e-4).unwrap_err();
        assert!(matches!(err, Error::VerificationFailed { .. }));
    }

    #[test]
    fn fails_when_no_swap_combination_matches() {
        // Candidate exists but the target hash names a different multiset.
        let list = list_of(&[("a", 0.5), ("b", 0.50001)]);
        let target = hash_of_names(&["a", "z"]);
        let err = correct_ties(&list, &target, 1e-3).unwrap_err();
        assert!(matches!(err, Error::VerificationFailed { .. }));
    }

    #[test]
    fn applies_multiple_non_overlapping_swaps() {
        let list = list_of(&[
            ("a", 0.900000),
            ("b", 0.899999),
            ("c", 0.5),
            ("d", 0.400000),
            ("e", 0.399999),
        ]);
        let target = hash_of_names(&["b", "a", "c", "e", "d"]);
        let (corrected, swaps) = correct_ties(&list, &target, 1e-4).unwrap();
        assert_eq!(corrected.names(), vec!["b", "a", "c", "e", "d"]);
        assert_eq!(swaps, vec![(1, 2), (4, 5)]);
    }

    #[test]
    fn prefers_the_cheapest_matching_combination() {
        // Two overlapping candidates; only one swap can apply at a time.
        let list = list_of(&[("a", 0.400002), ("b", 0.400001), ("c", 0.4)]);
        let target = hash_of_names(&["a", "c", "b"]);
        let (_, swaps) = correct_ties(&list, &target, 1e-4).unwrap();
        assert_eq!(swaps, vec![(2, 3)]);
    }

    #[test]
    fn refuses_ambiguous_tie_structures() {
        let entries: Vec<(String, f64)> = (0..20)
            .map(|i| (format!("d{i:02}"), 1.0 - i as f64 * 1e-6))
            .collect();
        let list = RankedList {
            entries: entries
                .iter()
                .map(|(n, s)| ScoredDoc {
                    name: n.clone(),
                    score: *s,
                })
                .collect(),
        };
        let err = correct_ties(&list, &hash_of_names(&["x"]), 1e-4).unwrap_err();
        assert!(matches!(err, Error::AmbiguousTieStructure { .. }));
    }
}
