//! Registry of executed queries: persistent identifiers, execution
//! timestamps, result hashes, and citation metadata. A registered query
//! can later be re-executed against the versioned store and verified
//! against the stored hash.

use crate::types::{RankedList, Timestamp};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;

/// SHA-256 over the UTF-8 document names of the list in rank order,
/// joined by a single LF with no trailing LF; lowercase hex. Scores are
/// excluded on purpose — they differ across engines by design.
pub fn canonical_hash(list: &RankedList) -> String {
    let mut hasher = Sha256::new();
    for (i, entry) in list.entries.iter().enumerate() {
        if i > 0 {
            hasher.update(b"\n");
        }
        hasher.update(entry.name.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Content-derived persistent identifier:
/// `"pid:"` + first 20 hex chars of
/// `SHA-256(query_text ‖ 0x00 ‖ decimal(exec_ts) ‖ 0x00 ‖ result_hash)`.
/// The same (query, timestamp, result hash) triple always yields the same
/// pid, so registration is idempotent without any coordination.
pub fn derive_pid(query_text: &str, exec_ts: Timestamp, result_hash: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(query_text.as_bytes());
    hasher.update([0u8]);
    hasher.update(exec_ts.value().to_string().as_bytes());
    hasher.update([0u8]);
    hasher.update(result_hash.as_bytes());
    let digest = hex::encode(hasher.finalize());
    format!("pid:{}", &digest[..20])
}

/// One persisted query registration. Serialized field names match the
/// on-disk queries.jsonl schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub pid: String,
    #[serde(rename = "query")]
    pub query_text: String,
    pub k: usize,
    pub exec_ts: Timestamp,
    pub result_hash: String,
    pub n_results: usize,
    pub creator: Option<String>,
    pub description: Option<String>,
    #[serde(rename = "created")]
    pub created_wall_clock: String,
}

impl QueryRecord {
    pub fn new(
        query_text: String,
        k: usize,
        exec_ts: Timestamp,
        list: &RankedList,
        creator: Option<String>,
        description: Option<String>,
    ) -> QueryRecord {
        let result_hash = canonical_hash(list);
        let pid = derive_pid(&query_text, exec_ts, &result_hash);
        QueryRecord {
            pid,
            query_text,
            k,
            exec_ts,
            result_hash,
            n_results: list.len(),
            creator,
            description,
            created_wall_clock: chrono::Utc::now()
                .to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        }
    }
}

/// In-memory view of the query registry. Durability is handled by the
/// storage layer, which feeds records back in on open.
#[derive(Default)]
pub struct QueryStore {
    records: Vec<QueryRecord>,
    by_pid: HashMap<String, usize>,
}

impl QueryStore {
    pub fn new() -> QueryStore {
        QueryStore::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, pid: &str) -> Option<&QueryRecord> {
        self.by_pid.get(pid).map(|&i| &self.records[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &QueryRecord> {
        self.records.iter()
    }

    /// Inserts unless the pid is already present; returns whether the
    /// record was new. Re-registering the same triple keeps the first
    /// record.
    pub fn insert_if_absent(&mut self, record: QueryRecord) -> bool {
        if self.by_pid.contains_key(&record.pid) {
            return false;
        }
        self.by_pid.insert(record.pid.clone(), self.records.len());
        self.records.push(record);
        true
    }
}
