//! Append-only, hash-chained snapshot ledger.
//!
//! One canonical-JSON record per line. Each record carries the SHA-256 of
//! its payload (`content_hash`) and a chain link (`prev_hash`): the digest
//! of the previous record's `content_hash` concatenated with its
//! `prev_hash`; the first record links to 64 zeros. Existing bytes are never
//! rewritten, so any modification of committed records is detectable by
//! re-walking the chain.
//!
//! Writes go through an advisory exclusive file lock (single writer);
//! committed records may be read concurrently.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use fs2::FileExt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{sha256_hex, GENESIS_HASH};

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("ledger I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("ledger is locked by another writer: {0}")]
    Locked(PathBuf),
    #[error("record {seq} is corrupt: {detail}")]
    CorruptRecord { seq: u64, detail: String },
    #[error("record ordering violated for case `{case_id}`: {detail}")]
    OrderViolation { case_id: String, detail: String },
    #[error("case `{0}` already has a snapshot record")]
    DuplicateSnapshot(String),
}

/// What a ledger record stores for its case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    SnapshotR0,
    ActionLog,
    FinalR1,
}

impl std::fmt::Display for RecordKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RecordKind::SnapshotR0 => "snapshot_r0",
            RecordKind::ActionLog => "action_log",
            RecordKind::FinalR1 => "final_r1",
        };
        f.write_str(s)
    }
}

/// One committed ledger line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub seq: u64,
    pub record_kind: RecordKind,
    pub case_id: String,
    /// Canonical JSON payload, stored verbatim; `content_hash` is computed
    /// over exactly these bytes.
    pub payload: String,
    pub content_hash: String,
    pub prev_hash: String,
}

impl LedgerRecord {
    /// The link value the *next* record must carry as its `prev_hash`.
    pub fn chain_hash(&self) -> String {
        sha256_hex(format!("{}{}", self.content_hash, self.prev_hash).as_bytes())
    }
}

/// Write handle over a ledger file. Holds the advisory exclusive lock for
/// its lifetime and keeps the committed records in memory for ordering
/// checks.
pub struct Ledger {
    path: PathBuf,
    file: File,
    records: Vec<LedgerRecord>,
}

impl Ledger {
    /// Opens (or creates) a ledger for appending. Fails if another writer
    /// holds the lock or if the existing content does not parse.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LedgerError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .create(true)
            .append(true)
            .open(&path)?;
        file.try_lock_exclusive()
            .map_err(|_| LedgerError::Locked(path.clone()))?;
        let mut content = String::new();
        file.seek(SeekFrom::Start(0))?;
        file.read_to_string(&mut content)?;
        let records = parse_records(content.lines())?;
        Ok(Self {
            path,
            file,
            records,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    /// Committed size in bytes; the rollback point for command-scoped
    /// ingestion.
    pub fn byte_len(&self) -> Result<u64, LedgerError> {
        Ok(self.file.metadata()?.len())
    }

    /// Discards everything appended after `len` bytes. Only used to roll a
    /// failed command back to its starting point; committed history from
    /// before the command is never touched.
    pub fn truncate_to(&mut self, len: u64) -> Result<(), LedgerError> {
        self.file.set_len(len)?;
        self.file.seek(SeekFrom::Start(0))?;
        let mut content = String::new();
        self.file.read_to_string(&mut content)?;
        self.records = parse_records(content.lines())?;
        Ok(())
    }

    /// Appends one record. The payload must already be canonical JSON; the
    /// sequence number and both hashes are derived here.
    pub fn append(
        &mut self,
        record_kind: RecordKind,
        case_id: &str,
        payload: String,
    ) -> Result<&LedgerRecord, LedgerError> {
        self.check_case_order(record_kind, case_id)?;

        let prev_hash = match self.records.last() {
            Some(last) => last.chain_hash(),
            None => GENESIS_HASH.to_owned(),
        };
        let record = LedgerRecord {
            seq: self.records.len() as u64,
            record_kind,
            case_id: case_id.to_owned(),
            content_hash: sha256_hex(payload.as_bytes()),
            payload,
            prev_hash,
        };

        let mut line = serde_json::to_string(&serde_json::to_value(&record).expect("record"))
            .expect("record line");
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    /// Per-case ordering rules: exactly one snapshot, which precedes the
    /// optional action log, which precedes the final report; nothing may
    /// follow the final report.
    fn check_case_order(&self, kind: RecordKind, case_id: &str) -> Result<(), LedgerError> {
        let existing: Vec<RecordKind> = self
            .records
            .iter()
            .filter(|r| r.case_id == case_id)
            .map(|r| r.record_kind)
            .collect();
        let violation = |detail: &str| -> LedgerError {
            LedgerError::OrderViolation {
                case_id: case_id.to_owned(),
                detail: detail.to_owned(),
            }
        };
        match kind {
            RecordKind::SnapshotR0 => {
                if existing.contains(&RecordKind::SnapshotR0) {
                    return Err(LedgerError::DuplicateSnapshot(case_id.to_owned()));
                }
                if !existing.is_empty() {
                    return Err(violation("snapshot_r0 must be the first record of a case"));
                }
            }
            RecordKind::ActionLog => {
                if !existing.contains(&RecordKind::SnapshotR0) {
                    return Err(violation("action_log before snapshot_r0"));
                }
                if existing.contains(&RecordKind::ActionLog) {
                    return Err(violation("second action_log for the case"));
                }
                if existing.contains(&RecordKind::FinalR1) {
                    return Err(violation("action_log after final_r1"));
                }
            }
            RecordKind::FinalR1 => {
                if !existing.contains(&RecordKind::SnapshotR0) {
                    return Err(violation("final_r1 before snapshot_r0"));
                }
                if existing.contains(&RecordKind::FinalR1) {
                    return Err(violation("second final_r1 for the case"));
                }
            }
        }
        Ok(())
    }
}

/// Result of walking the full chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub valid: bool,
    pub records_checked: u64,
    pub first_invalid_seq: Option<u64>,
    pub detail: Option<String>,
}

impl VerificationReport {
    fn ok(records_checked: u64) -> Self {
        Self {
            valid: true,
            records_checked,
            first_invalid_seq: None,
            detail: None,
        }
    }

    fn invalid(seq: u64, records_checked: u64, detail: String) -> Self {
        Self {
            valid: false,
            records_checked,
            first_invalid_seq: Some(seq),
            detail: Some(detail),
        }
    }
}

/// Recomputes every content hash and chain link in the file and reports the
/// first divergence, if any. Unparseable lines, including lines that are
/// not valid UTF-8, surface as [`LedgerError::CorruptRecord`] carrying the
/// offending line's sequence position.
pub fn verify_chain(path: impl AsRef<Path>) -> Result<VerificationReport, LedgerError> {
    let bytes = std::fs::read(path.as_ref())?;
    let mut chunks: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    if chunks.last().is_some_and(|last| last.is_empty()) {
        chunks.pop();
    }

    let mut expected_prev = GENESIS_HASH.to_owned();
    let mut checked = 0u64;
    for (index, chunk) in chunks.into_iter().enumerate() {
        let seq = index as u64;
        let line = std::str::from_utf8(chunk).map_err(|e| LedgerError::CorruptRecord {
            seq,
            detail: format!("record is not valid UTF-8: {e}"),
        })?;
        if line.trim().is_empty() {
            return Err(LedgerError::CorruptRecord {
                seq,
                detail: "blank line inside ledger".to_owned(),
            });
        }
        let record: LedgerRecord =
            serde_json::from_str(line).map_err(|e| LedgerError::CorruptRecord {
                seq,
                detail: format!("unparseable record: {e}"),
            })?;

        if record.seq != seq {
            return Ok(VerificationReport::invalid(
                seq,
                checked,
                format!("sequence gap: stored seq {} at position {seq}", record.seq),
            ));
        }
        let recomputed = sha256_hex(record.payload.as_bytes());
        if recomputed != record.content_hash {
            return Ok(VerificationReport::invalid(
                seq,
                checked,
                format!(
                    "content hash mismatch: stored {}, recomputed {recomputed}",
                    record.content_hash
                ),
            ));
        }
        if record.prev_hash != expected_prev {
            return Ok(VerificationReport::invalid(
                seq,
                checked,
                format!(
                    "chain link mismatch: stored prev_hash {}, expected {expected_prev}",
                    record.prev_hash
                ),
            ));
        }
        if record.case_id != embedded_case_id(&record)? {
            return Ok(VerificationReport::invalid(
                seq,
                checked,
                "record case_id disagrees with the case_id embedded in the payload".to_owned(),
            ));
        }
        expected_prev = record.chain_hash();
        checked += 1;
    }
    Ok(VerificationReport::ok(checked))
}

/// Reads all records without taking the writer lock.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<LedgerRecord>, LedgerError> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    parse_records(lines.iter().map(|s| s.as_str()))
}

fn parse_records<'a>(
    lines: impl Iterator<Item = &'a str>,
) -> Result<Vec<LedgerRecord>, LedgerError> {
    let mut records = Vec::new();
    for (index, line) in lines.enumerate() {
        if line.trim().is_empty() {
            return Err(LedgerError::CorruptRecord {
                seq: index as u64,
                detail: "blank line inside ledger".to_owned(),
            });
        }
        let record: LedgerRecord =
            serde_json::from_str(line).map_err(|e| LedgerError::CorruptRecord {
                seq: index as u64,
                detail: format!("unparseable record: {e}"),
            })?;
        records.push(record);
    }
    Ok(records)
}

fn embedded_case_id(record: &LedgerRecord) -> Result<String, LedgerError> {
    let payload: serde_json::Value =
        serde_json::from_str(&record.payload).map_err(|e| LedgerError::CorruptRecord {
            seq: record.seq,
            detail: format!("unparseable payload: {e}"),
        })?;
    payload
        .get("case_id")
        .and_then(|v| v.as_str())
        .map(str::to_owned)
        .ok_or_else(|| LedgerError::CorruptRecord {
            seq: record.seq,
            detail: "payload lacks a case_id".to_owned(),
        })
}
