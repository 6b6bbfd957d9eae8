//! The fast in-memory inverted index serving current-state top-k BM25
//! queries.
//!
//! Two deliberate lossy mechanisms mirror production full-text engines:
//! document lengths are normalized through a one-byte code that keeps only
//! the 4 most significant bits ([`encode_len`]), and scores are computed
//! with single-precision term weights and accumulation. The versioned
//! store computes the same formula in double precision, so the two engines
//! diverge by the small floating-point margins the reproducer is built to
//! absorb.

use crate::analysis::{analyze, AnalyzerConfig, Token};
use crate::error::{Error, Result};
use crate::ingest::DocDelta;
use crate::scoring::{idf, length_factor};
use crate::types::{CorpusStats, RankedList, ScoringParams};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

/// Encodes a document length into a one-byte code preserving its 4 most
/// significant bits. Lengths below 8 are stored verbatim (subnormal
/// range); otherwise the code packs a 3-bit mantissa with an implicit
/// leading 1 and a shift field of `bit_length - 4 + 1`.
pub fn encode_len(len: u32) -> u8 {
    debug_assert!(len < 1 << 31);
    if len < 8 {
        return len as u8;
    }
    let bit_length = 32 - len.leading_zeros();
    let shift = bit_length - 3; // (bit_length - 4) + 1
    let mantissa = (len >> (bit_length - 4)) & 0b111;
    ((shift << 3) | mantissa) as u8
}

/// Inverse of [`encode_len`]: returns the largest value with at most 4
/// significant bits that is ≤ the encoded length. Exact for lengths ≤ 15.
pub fn decode_len(code: u8) -> u32 {
    if code < 8 {
        return code as u32;
    }
    let shift = (code >> 3) as u32;
    let mantissa = (code & 0b111) as u32;
    (mantissa | 0b1000) << (shift - 1)
}

type TermId = u32;
type Slot = u32;

#[derive(Debug)]
struct LiveDoc {
    name: String,
    exact_len: u32,
    approx_len_code: u8,
    /// (term, tf) pairs of this revision, kept for posting removal on
    /// update or delete.
    terms: Vec<(TermId, u32)>,
}

/// In-memory inverted index over the current document revisions only.
///
/// Single writer, multiple readers: mutation requires `&mut self`, reads
/// take `&self`, so the borrow checker enforces the concurrency contract.
pub struct LiveIndex {
    analyzer: Arc<AnalyzerConfig>,
    term_ids: HashMap<String, TermId>,
    term_names: Vec<String>,
    /// Per term: slot → tf for every current document containing it. The
    /// map length is the term's document frequency.
    postings: Vec<HashMap<Slot, u32>>,
    docs: Vec<Option<LiveDoc>>,
    by_name: HashMap<String, Slot>,
    free_slots: Vec<Slot>,
    total_len: u64,
}

impl LiveIndex {
    pub fn new(analyzer: Arc<AnalyzerConfig>) -> LiveIndex {
        LiveIndex {
            analyzer,
            term_ids: HashMap::new(),
            term_names: Vec::new(),
            postings: Vec::new(),
            docs: Vec::new(),
            by_name: HashMap::new(),
            free_slots: Vec::new(),
            total_len: 0,
        }
    }

    pub fn analyzer(&self) -> &Arc<AnalyzerConfig> {
        &self.analyzer
    }

    /// Number of currently indexed documents.
    pub fn n_docs(&self) -> u64 {
        self.by_name.len() as u64
    }

    pub fn contains(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    /// Current document frequency of an exact (already analyzed) term.
    pub fn df(&self, term: &str) -> u64 {
        match self.term_ids.get(term) {
            Some(&tid) => self.postings[tid as usize].len() as u64,
            None => 0,
        }
    }

    /// All terms with a non-zero document frequency, with their df.
    pub fn term_dfs(&self) -> impl Iterator<Item = (&str, u64)> {
        self.term_names
            .iter()
            .zip(self.postings.iter())
            .filter(|(_, p)| !p.is_empty())
            .map(|(t, p)| (t.as_str(), p.len() as u64))
    }

    /// Total token count over current documents.
    pub fn total_token_count(&self) -> u64 {
        self.total_len
    }

    pub fn current_stats(&self) -> CorpusStats {
        CorpusStats::from_totals(self.n_docs(), self.total_len)
    }

    /// Replaces (or inserts) every document in the batch and reports, per
    /// document, the new revision's term-frequency map, lengths, and
    /// whether an earlier revision was overwritten. Rejects the whole
    /// batch on a duplicate name; otherwise application is total.
    pub fn upsert_batch(&mut self, docs: Vec<(String, Vec<Token>)>) -> Result<Vec<DocDelta>> {
        let mut seen = HashSet::with_capacity(docs.len());
        for (name, _) in &docs {
            if !seen.insert(name.as_str().to_owned()) {
                return Err(Error::DuplicateName(name.clone()));
            }
        }
        let mut deltas = Vec::with_capacity(docs.len());
        for (name, tokens) in docs {
            let exact_len = tokens.len() as u32;
            let mut term_freqs: BTreeMap<String, u32> = BTreeMap::new();
            for token in tokens {
                *term_freqs.entry(token).or_insert(0) += 1;
            }
            let replaced = self.remove_if_present(&name);
            self.insert_doc(&name, &term_freqs, exact_len);
            deltas.push(DocDelta {
                name,
                term_freqs,
                exact_len,
                approx_len_code: encode_len(exact_len),
                replaced,
            });
        }
        Ok(deltas)
    }

    /// Removes a document; returns whether it existed.
    pub fn delete_doc(&mut self, name: &str) -> bool {
        self.remove_if_present(name)
    }

    /// Rebuilds a document from already-aggregated statistics, used when
    /// reconstructing the live index from the versioned store on open.
    pub(crate) fn restore_doc(&mut self, name: &str, term_freqs: &[(&str, u32)], exact_len: u32) {
        debug_assert!(!self.by_name.contains_key(name));
        let map: BTreeMap<String, u32> = term_freqs
            .iter()
            .map(|&(t, tf)| (t.to_string(), tf))
            .collect();
        self.insert_doc(name, &map, exact_len);
    }

    fn remove_if_present(&mut self, name: &str) -> bool {
        let Some(slot) = self.by_name.remove(name) else {
            return false;
        };
        let doc = self.docs[slot as usize].take().expect("live slot occupied");
        for (tid, _) in &doc.terms {
            self.postings[*tid as usize].remove(&slot);
        }
        self.total_len -= u64::from(doc.exact_len);
        self.free_slots.push(slot);
        true
    }

    fn insert_doc(&mut self, name: &str, term_freqs: &BTreeMap<String, u32>, exact_len: u32) {
        let slot = match self.free_slots.pop() {
            Some(slot) => slot,
            None => {
                self.docs.push(None);
                (self.docs.len() - 1) as Slot
            }
        };
        let mut terms = Vec::with_capacity(term_freqs.len());
        for (term, &tf) in term_freqs {
            debug_assert!(tf >= 1);
            let tid = self.intern(term);
            self.postings[tid as usize].insert(slot, tf);
            terms.push((tid, tf));
        }
        self.docs[slot as usize] = Some(LiveDoc {
            name: name.to_string(),
            exact_len,
            approx_len_code: encode_len(exact_len),
            terms,
        });
        self.by_name.insert(name.to_string(), slot);
        self.total_len += u64::from(exact_len);
    }

    fn intern(&mut self, term: &str) -> TermId {
        if let Some(&tid) = self.term_ids.get(term) {
            return tid;
        }
        let tid = self.term_names.len() as TermId;
        self.term_names.push(term.to_string());
        self.term_ids.insert(term.to_string(), tid);
        self.postings.push(HashMap::new());
        tid
    }

    /// Top-k BM25 over the current corpus state.
    ///
    /// Per query-token occurrence, each matching document accumulates
    /// `idf * tf / (tf + k1 * (1 - b + b * dl / avgdl))` where `dl` is the
    /// decoded approximate length and `avgdl` the mean exact length. The
    /// idf and length factors are rounded to single precision before
    /// multiplying, and accumulation is single precision.
    pub fn search(&self, query: &str, params: &ScoringParams) -> RankedList {
        let tokens = analyze(query, &self.analyzer);
        if tokens.is_empty() {
            return RankedList::default();
        }
        let stats = self.current_stats();
        let k1 = params.k1 as f32;
        let mut acc: HashMap<Slot, f32> = HashMap::new();
        for token in &tokens {
            let Some(&tid) = self.term_ids.get(token.as_str()) else {
                continue;
            };
            let postings = &self.postings[tid as usize];
            if postings.is_empty() {
                continue;
            }
            let idf = idf(stats.n_docs, postings.len() as u64) as f32;
            for (&slot, &tf) in postings {
                let doc = self.docs[slot as usize].as_ref().expect("posting slot");
                let dl = decode_len(doc.approx_len_code);
                let lf = length_factor(params.b, dl, stats.avgdl) as f32;
                let tf = tf as f32;
                let weight = tf / (tf + k1 * lf);
                *acc.entry(slot).or_insert(0.0) += idf * weight;
            }
        }
        let scores = acc
            .into_iter()
            .map(|(slot, score)| {
                let doc = self.docs[slot as usize].as_ref().expect("scored slot");
                (doc.name.clone(), f64::from(score))
            })
            .collect();
        RankedList::from_scores(scores, params.k)
    }

    /// Rough in-memory footprint of the index structures, for the storage
    /// comparison in the benchmark harness.
    pub fn approx_bytes(&self) -> u64 {
        use std::mem::size_of;
        let mut bytes = 0u64;
        for term in &self.term_names {
            // once in the term table, once as a lookup key
            bytes += 2 * (size_of::<String>() + term.len()) as u64;
            bytes += size_of::<TermId>() as u64;
        }
        for postings in &self.postings {
            bytes += size_of::<HashMap<Slot, u32>>() as u64;
            bytes += (postings.len() * size_of::<(Slot, u32)>()) as u64;
        }
        for doc in self.docs.iter().flatten() {
            // doc table entry plus the by-name key
            bytes += 2 * (size_of::<String>() + doc.name.len()) as u64;
            bytes += (size_of::<LiveDoc>() - size_of::<String>()) as u64;
            bytes += (doc.terms.len() * size_of::<(TermId, u32)>()) as u64;
            bytes += size_of::<Slot>() as u64;
        }
        bytes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index_with(docs: &[(&str, &str)]) -> LiveIndex {
        let analyzer = Arc::new(AnalyzerConfig::new());
        let mut index = LiveIndex::new(analyzer.clone());
        let batch = docs
            .iter()
            .map(|(name, text)| (name.to_string(), analyze(text, &analyzer)))
            .collect();
        index.upsert_batch(batch).unwrap();
        index
    }

    fn three_doc_corpus() -> LiveIndex {
        index_with(&[
            ("d1", "apple banana apple"),
            ("d2", "banana cherry"),
            ("d3", "cherry apple cherry cherry"),
        ])
    }

    #[test]
    fn encode_len_examples() {
        assert_eq!(decode_len(encode_len(0)), 0);
        assert_eq!(decode_len(encode_len(7)), 7);
        assert_eq!(decode_len(encode_len(16)), 16);
        assert_eq!(decode_len(encode_len(17)), 16);
        assert_eq!(decode_len(encode_len(100)), 96);
        assert_eq!(decode_len(encode_len(1000)), 960);
        assert_eq!(decode_len(encode_len((1 << 31) - 1)), 15 << 27);
    }

    // Independent oracle: enumerate every value representable with at
    // most 4 significant bits and pick the greatest one ≤ x.
    fn greatest_4bit_value_le(x: u32) -> u32 {
        let mut values: Vec<u32> = (0u32..8).collect();
        for mantissa in 8u32..16 {
            let mut shift = 0;
            loop {
                let v = (mantissa as u64) << shift;
                if v > u64::from(u32::MAX) / 2 {
                    break;
                }
                values.push(v as u32);
                shift += 1;
            }
        }
        values.sort_unstable();
        values.dedup();
        let idx = values.partition_point(|&v| v <= x);
        values[idx - 1]
    }

    #[test]
    fn encode_decode_exhaustive_under_2_pow_16() {
        for x in 0u32..(1 << 16) {
            let decoded = decode_len(encode_len(x));
            assert_eq!(decoded, greatest_4bit_value_le(x), "x={x}");
            assert!(decoded <= x);
            if x <= 15 {
                assert_eq!(decoded, x);
            }
        }
    }

    #[test]
    fn search_matches_hand_computed_scores() {
        let index = three_doc_corpus();
        let list = index.search("apple", &ScoringParams::default());
        assert_eq!(list.names(), vec!["d1", "d3"]);
        assert!((list.entries[0].score - 0.293752).abs() < 1e-5);
        assert!((list.entries[1].score - 0.188001).abs() < 1e-5);
    }

    #[test]
    fn unseen_term_and_empty_query_yield_empty_lists() {
        let index = three_doc_corpus();
        assert!(index
            .search("durian", &ScoringParams::default())
            .is_empty());
        assert!(index.search("", &ScoringParams::default()).is_empty());
        assert!(index.search("!!!", &ScoringParams::default()).is_empty());
    }

    #[test]
    fn current_stats_track_upserts_and_deletes() {
        let mut index = three_doc_corpus();
        let stats = index.current_stats();
        assert_eq!((stats.n_docs, stats.avgdl), (3, 3.0));
        assert!(index.delete_doc("d2"));
        let stats = index.current_stats();
        assert_eq!((stats.n_docs, stats.avgdl), (2, 3.5));
        assert!(!index.delete_doc("d2"));
        assert_eq!(
            LiveIndex::new(Arc::new(AnalyzerConfig::new()))
                .current_stats()
                .n_docs,
            0
        );
    }

    #[test]
    fn reupserting_identical_document_is_a_noop_for_search() {
        let mut index = three_doc_corpus();
        let before = index.search("apple cherry", &ScoringParams::default());
        let analyzer = index.analyzer().clone();
        let deltas = index
            .upsert_batch(vec![(
                "d3".into(),
                analyze("cherry apple cherry cherry", &analyzer),
            )])
            .unwrap();
        assert!(deltas[0].replaced);
        let after = index.search("apple cherry", &ScoringParams::default());
        assert_eq!(before, after);
    }

    #[test]
    fn duplicate_name_in_batch_rejects_without_partial_application() {
        let mut index = three_doc_corpus();
        let err = index
            .upsert_batch(vec![
                ("x".into(), vec!["one".into()]),
                ("x".into(), vec!["two".into()]),
            ])
            .unwrap_err();
        assert!(matches!(err, Error::DuplicateName(_)));
        assert!(!index.contains("x"));
        assert_eq!(index.n_docs(), 3);
    }

    #[test]
    fn df_counts_distinct_documents() {
        let index = three_doc_corpus();
        assert_eq!(index.df("apple"), 2);
        assert_eq!(index.df("cherry"), 2);
        assert_eq!(index.df("banana"), 2);
        assert_eq!(index.df("durian"), 0);
    }

    #[test]
    fn zero_token_documents_are_allowed_and_never_match()
    {
        let mut index = three_doc_corpus();
        index
            .upsert_batch(vec![("empty".into(), Vec::new())])
            .unwrap();
        assert_eq!(index.n_docs(), 4);
        assert!(index.contains("empty"));
        let list = index.search("apple banana cherry", &ScoringParams::default());
        assert!(!list.names().contains(&"empty"));
    }
}
