//! Durable append-only persistence with full state reconstruction.
//!
//! Layout (all UTF-8 JSON Lines):
//!   manifest.json   single JSON object, the commit point
//!   dict.jsonl      {"tid": int, "term": str}
//!   docs.jsonl      {"vid": int, "name": str, "from": int, "len": int, "alen": int}
//!                   for new versions; {"close": vid, "to": int} for
//!                   interval closures
//!   postings.jsonl  {"tid": int, "vid": int, "tf": int}
//!   queries.jsonl   one query registration per line
//!
//! Logs are appended and fsynced first; the manifest (carrying the clock
//! and per-log record counts) is atomically replaced last, so a crash
//! between the two leaves an uncommitted tail that open() discards. A log
//! shorter than its manifest count is reported as a corrupt store with
//! the failing file and line. The live index is never persisted: open()
//! rebuilds it from the versions valid at the manifest clock, so the two
//! engines cannot drift across restarts.

use crate::analysis::AnalyzerConfig;
use crate::error::{Error, Result};
use crate::query_store::{QueryRecord, QueryStore};
use crate::types::{ScoringParams, Timestamp};
use crate::versioned_store::{AppliedBatch, DictEntry, TermPosting, VersionedStore};
use serde::{Deserialize, Serialize};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DICT_LOG: &str = "dict.jsonl";
pub const DOCS_LOG: &str = "docs.jsonl";
pub const POSTINGS_LOG: &str = "postings.jsonl";
pub const QUERIES_LOG: &str = "queries.jsonl";
pub const BENCH_CSV: &str = "bench.csv";

pub const FORMAT_VERSION: u32 = 1;

/// Per-log committed record counts. Anything beyond these counts is an
/// uncommitted tail.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogCounts {
    pub versions: u64,
    pub closes: u64,
    pub postings: u64,
    pub dict_entries: u64,
    pub queries: u64,
}

/// Analyzer parameters plus their digest, so a reopened store can prove
/// it runs the exact pipeline the index was built with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzerSection {
    pub digest: String,
    #[serde(flatten)]
    pub config: AnalyzerConfig,
}

/// The commit point of the store.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub clock: Timestamp,
    pub analyzer: AnalyzerSection,
    pub scoring: ScoringParams,
    pub counts: LogCounts,
}

#[derive(Serialize, Deserialize)]
struct DictRecord {
    tid: u64,
    term: String,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DocRecord {
    Version {
        vid: u64,
        name: String,
        from: u64,
        len: u32,
        alen: u8,
    },
    Close {
        close: u64,
        to: u64,
    },
}

#[derive(Serialize, Deserialize)]
struct PostingRecord {
    tid: u64,
    vid: u64,
    tf: u32,
}

/// Open store directory: append handles plus the current manifest.
pub struct Storage {
    dir: PathBuf,
    manifest: Manifest,
    dict_log: File,
    docs_log: File,
    postings_log: File,
    queries_log: File,
}

impl Storage {
    /// Opens `dir`, creating a fresh store when the directory is absent
    /// or empty. For an existing store the logs are replayed into a
    /// [`VersionedStore`] and [`QueryStore`]; `analyzer` and `scoring`
    /// only apply at creation — afterwards the manifest is authoritative.
    pub fn open(
        dir: &Path,
        analyzer: AnalyzerConfig,
        scoring: ScoringParams,
    ) -> Result<(Storage, VersionedStore, QueryStore)> {
        let manifest_path = dir.join(MANIFEST_FILE);
        if !manifest_path.exists() {
            for log in [DICT_LOG, DOCS_LOG, POSTINGS_LOG, QUERIES_LOG] {
                if dir.join(log).exists() {
                    return Err(Error::corrupt(
                        MANIFEST_FILE,
                        1,
                        format!("manifest missing but {log} exists"),
                    ));
                }
            }
            return Storage::create(dir, analyzer, scoring);
        }

        let manifest_text = fs::read_to_string(&manifest_path)?;
        let manifest: Manifest = serde_json::from_str(&manifest_text)
            .map_err(|e| Error::corrupt(MANIFEST_FILE, e.line() as u64, e.to_string()))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::corrupt(
                MANIFEST_FILE,
                1,
                format!("unsupported format version {}", manifest.format_version),
            ));
        }
        if manifest.analyzer.config.digest() != manifest.analyzer.digest {
            return Err(Error::corrupt(
                MANIFEST_FILE,
                1,
                "analyzer digest does not match analyzer parameters",
            ));
        }

        let shared = Arc::new(manifest.analyzer.config.clone());
        let mut versioned = VersionedStore::new(shared);
        versioned.set_clock(manifest.clock);
        let clock = manifest.clock.0;

        let dict: Vec<DictRecord> = read_committed(dir, DICT_LOG, manifest.counts.dict_entries)?;
        for (i, rec) in dict.iter().enumerate() {
            versioned
                .replay_dict(&DictEntry {
                    term_id: rec.tid,
                    term: rec.term.clone(),
                })
                .map_err(|reason| Error::corrupt(DICT_LOG, i as u64 + 1, reason))?;
        }

        let doc_records: Vec<DocRecord> = read_committed(
            dir,
            DOCS_LOG,
            manifest.counts.versions + manifest.counts.closes,
        )?;
        let (mut versions_seen, mut closes_seen) = (0u64, 0u64);
        for (i, rec) in doc_records.iter().enumerate() {
            let line = i as u64 + 1;
            match rec {
                DocRecord::Version {
                    vid,
                    name,
                    from,
                    len,
                    alen,
                } => {
                    versions_seen += 1;
                    if *from == 0 || *from > clock {
                        return Err(Error::corrupt(
                            DOCS_LOG,
                            line,
                            format!("valid_from {from} outside 1..={clock}"),
                        ));
                    }
                    versioned
                        .replay_version(*vid, name, Timestamp(*from), *len, *alen)
                        .map_err(|reason| Error::corrupt(DOCS_LOG, line, reason))?;
                }
                DocRecord::Close { close, to } => {
                    closes_seen += 1;
                    if *to > clock {
                        return Err(Error::corrupt(
                            DOCS_LOG,
                            line,
                            format!("valid_to {to} beyond clock {clock}"),
                        ));
                    }
                    versioned
                        .replay_close(*close, Timestamp(*to))
                        .map_err(|reason| Error::corrupt(DOCS_LOG, line, reason))?;
                }
            }
        }
        if versions_seen != manifest.counts.versions || closes_seen != manifest.counts.closes {
            return Err(Error::corrupt(
                DOCS_LOG,
                doc_records.len() as u64,
                format!(
                    "record mix {versions_seen} versions + {closes_seen} closes \
                     does not match manifest counts {} + {}",
                    manifest.counts.versions, manifest.counts.closes
                ),
            ));
        }

        let postings: Vec<PostingRecord> =
            read_committed(dir, POSTINGS_LOG, manifest.counts.postings)?;
        for (i, rec) in postings.iter().enumerate() {
            versioned
                .replay_posting(TermPosting {
                    term_id: rec.tid,
                    version_id: rec.vid,
                    tf: rec.tf,
                })
                .map_err(|reason| Error::corrupt(POSTINGS_LOG, i as u64 + 1, reason))?;
        }

        let query_records: Vec<QueryRecord> =
            read_committed(dir, QUERIES_LOG, manifest.counts.queries)?;
        let mut queries = QueryStore::new();
        for (i, rec) in query_records.into_iter().enumerate() {
            let line = i as u64 + 1;
            if rec.result_hash.len() != 64
                || !rec.result_hash.bytes().all(|b| b.is_ascii_hexdigit())
            {
                return Err(Error::corrupt(QUERIES_LOG, line, "malformed result hash"));
            }
            if rec.n_results > rec.k {
                return Err(Error::corrupt(
                    QUERIES_LOG,
                    line,
                    format!("n_results {} exceeds k {}", rec.n_results, rec.k),
                ));
            }
            if rec.exec_ts.0 > clock {
                return Err(Error::corrupt(
                    QUERIES_LOG,
                    line,
                    format!("exec_ts {} beyond clock {clock}", rec.exec_ts),
                ));
            }
            if !queries.insert_if_absent(rec) {
                return Err(Error::corrupt(QUERIES_LOG, line, "duplicate pid"));
            }
        }

        let storage = Storage {
            dir: dir.to_path_buf(),
            manifest,
            dict_log: open_append(dir, DICT_LOG)?,
            docs_log: open_append(dir, DOCS_LOG)?,
            postings_log: open_append(dir, POSTINGS_LOG)?,
            queries_log: open_append(dir, QUERIES_LOG)?,
        };
        Ok((storage, versioned, queries))
    }

    fn create(
        dir: &Path,
        analyzer: AnalyzerConfig,
        scoring: ScoringParams,
    ) -> Result<(Storage, VersionedStore, QueryStore)> {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            clock: Timestamp::ZERO,
            analyzer: AnalyzerSection {
                digest: analyzer.digest(),
                config: analyzer.clone(),
            },
            scoring,
            counts: LogCounts::default(),
        };
        let mut storage = Storage {
            dir: dir.to_path_buf(),
            manifest,
            dict_log: open_append(dir, DICT_LOG)?,
            docs_log: open_append(dir, DOCS_LOG)?,
            postings_log: open_append(dir, POSTINGS_LOG)?,
            queries_log: open_append(dir, QUERIES_LOG)?,
        };
        storage.write_manifest()?;
        let versioned = VersionedStore::new(Arc::new(analyzer));
        Ok((storage, versioned, QueryStore::new()))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Persists one applied batch, reading the appended rows back through
    /// the store: log appends and fsyncs first, manifest replacement
    /// last. The manifest update is the commit point; on an I/O failure
    /// the batch is absent after reopen.
    pub fn commit_batch(&mut self, store: &VersionedStore, applied: &AppliedBatch) -> Result<()> {
        debug_assert_eq!(applied.ts, self.manifest.clock.next());
        let mut dict_buf = String::new();
        for tid in applied.new_terms.clone() {
            push_line(
                &mut dict_buf,
                &DictRecord {
                    tid,
                    term: store.term(tid).expect("new term in dict").to_string(),
                },
            );
        }
        let mut docs_buf = String::new();
        for &(vid, to) in &applied.closed {
            push_line(&mut docs_buf, &DocRecord::Close { close: vid, to: to.0 });
        }
        for vid in applied.new_versions.clone() {
            let v = store.version(vid).expect("new version in store");
            push_line(
                &mut docs_buf,
                &DocRecord::Version {
                    vid: v.version_id,
                    name: v.name,
                    from: v.valid_from.0,
                    len: v.exact_len,
                    alen: v.approx_len_code,
                },
            );
        }
        let mut postings_buf = String::new();
        for p in store.postings_in(applied.new_postings.clone()) {
            push_line(
                &mut postings_buf,
                &PostingRecord {
                    tid: p.term_id,
                    vid: p.version_id,
                    tf: p.tf,
                },
            );
        }

        append_and_sync(&mut self.dict_log, &dict_buf)?;
        append_and_sync(&mut self.docs_log, &docs_buf)?;
        append_and_sync(&mut self.postings_log, &postings_buf)?;

        self.manifest.clock = applied.ts;
        self.manifest.counts.dict_entries += applied.new_terms.end - applied.new_terms.start;
        self.manifest.counts.closes += applied.closed.len() as u64;
        self.manifest.counts.versions += applied.new_versions.end - applied.new_versions.start;
        self.manifest.counts.postings += applied.new_postings.end - applied.new_postings.start;
        self.write_manifest()
    }

    /// Persists one query registration, following the same
    /// append-then-commit protocol as batches.
    pub fn append_query(&mut self, record: &QueryRecord) -> Result<()> {
        let mut buf = String::new();
        push_line(&mut buf, record);
        append_and_sync(&mut self.queries_log, &buf)?;
        self.manifest.counts.queries += 1;
        self.write_manifest()
    }

    /// On-disk footprint of the index-bearing logs (dictionary, document
    /// versions, postings).
    pub fn index_log_bytes(&self) -> Result<u64> {
        let mut total = 0;
        for log in [DICT_LOG, DOCS_LOG, POSTINGS_LOG] {
            total += fs::metadata(self.dir.join(log))?.len();
        }
        Ok(total)
    }

    fn write_manifest(&mut self) -> Result<()> {
        let tmp = self.dir.join("manifest.json.tmp");
        let data = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        let mut f = File::create(&tmp)?;
        f.write_all(&data)?;
        f.write_all(b"\n")?;
        f.sync_data()?;
        fs::rename(&tmp, self.dir.join(MANIFEST_FILE))?;
        File::open(&self.dir)?.sync_all()?;
        Ok(())
    }
}

fn open_append(dir: &Path, name: &str) -> Result<File> {
    Ok(OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join(name))?)
}

fn push_line<T: Serialize>(buf: &mut String, record: &T) {
    buf.push_str(&serde_json::to_string(record).expect("log record serializes"));
    buf.push('\n');
}

fn append_and_sync(log: &mut File, buf: &str) -> Result<()> {
    if buf.is_empty() {
        return Ok(());
    }
    log.write_all(buf.as_bytes())?;
    log.sync_data()?;
    Ok(())
}

/// Reads exactly `committed` records from a log, then discards any
/// uncommitted tail left behind by an interrupted commit. A log shorter
/// than the committed count, a non-terminated record, or a parse failure
/// is a corrupt store.
fn read_committed<T: serde::de::DeserializeOwned>(
    dir: &Path,
    name: &str,
    committed: u64,
) -> Result<Vec<T>> {
    let path = dir.join(name);
    if !path.exists() {
        if committed == 0 {
            return Ok(Vec::new());
        }
        return Err(Error::corrupt(name, 1, "log file missing"));
    }
    let mut reader = BufReader::new(File::open(&path)?);
    let mut records = Vec::with_capacity(committed as usize);
    let mut offset = 0u64;
    let mut line = String::new();
    for line_no in 1..=committed {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            return Err(Error::corrupt(
                name,
                line_no,
                format!(
                    "log ends after {} records but manifest commits {committed}",
                    line_no - 1
                ),
            ));
        }
        if !line.ends_with('\n') {
            return Err(Error::corrupt(name, line_no, "record is not newline-terminated"));
        }
        offset += n as u64;
        let record: T = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::corrupt(name, line_no, e.to_string()))?;
        records.push(record);
    }
    let file_len = fs::metadata(&path)?.len();
    if file_len > offset {
        // Uncommitted tail from an interrupted commit: discard it so
        // later appends stay line-aligned.
        let f = OpenOptions::new().write(true).open(&path)?;
        f.set_len(offset)?;
        f.sync_data()?;
    }
    Ok(records)
}
