//! Hybrid retrieval with reproducible ranked lists.
//!
//! A fast in-memory inverted index answers live top-k BM25 queries while
//! a versioned columnar store keeps every historical state of the corpus
//! statistics. Executed queries can be registered under a persistent
//! identifier; resolving that identifier later — after arbitrary corpus
//! evolution — re-executes the query against the store state at the
//! original timestamp, verifies the result hash, and returns the
//! identical ranked list.
//!
//! Entry point: [`System`], which owns both engines, the query registry,
//! and the append-only storage underneath them.

pub mod analysis;
pub mod bench;
pub mod error;
pub mod ingest;
pub mod live_index;
pub mod query_store;
pub mod reproducer;
pub mod scoring;
pub mod storage;
pub mod synth;
pub mod system;
pub mod types;
pub mod versioned_store;

pub use analysis::{analyze, AnalyzerConfig, StemmerKind, Token};
pub use error::{Error, Result};
pub use ingest::{BatchDelta, BatchStats, DocDelta};
pub use live_index::{decode_len, encode_len, LiveIndex};
pub use query_store::{canonical_hash, derive_pid, QueryRecord, QueryStore};
pub use reproducer::{correct_ties, ResolveReport, DEFAULT_TIE_EPSILON};
pub use system::{System, SystemOptions, VerifyReport};
pub use types::{CorpusStats, RankedList, ScoredDoc, ScoringParams, Timestamp};
pub use versioned_store::{DocumentVersion, VersionedStore};
