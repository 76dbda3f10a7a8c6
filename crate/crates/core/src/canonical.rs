//! Canonical JSON serialization and content digests for the ledger.
//!
//! Canonical form: object keys sorted lexicographically, strings composed to
//! NFC, compact separators, and no floating-point numbers anywhere (report
//! payloads are purely textual). Two semantically equal payloads therefore
//! serialize to identical bytes and hash identically on every platform.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CanonicalError {
    #[error("payload is not serializable: {0}")]
    Serialize(String),
    #[error("payload contains a non-integer number; canonical payloads are float-free")]
    FloatInPayload,
}

/// Serializes a value into canonical JSON text.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, CanonicalError> {
    let value =
        serde_json::to_value(value).map_err(|e| CanonicalError::Serialize(e.to_string()))?;
    let normalized = normalize_value(value)?;
    // serde_json's default map preserves sorted key order (BTreeMap-backed),
    // so plain compact serialization of the Value tree is canonical.
    serde_json::to_string(&normalized).map_err(|e| CanonicalError::Serialize(e.to_string()))
}

fn normalize_value(value: Value) -> Result<Value, CanonicalError> {
    Ok(match value {
        Value::String(s) => Value::String(s.nfc().collect()),
        Value::Array(items) => Value::Array(
            items
                .into_iter()
                .map(normalize_value)
                .collect::<Result<_, _>>()?,
        ),
        Value::Object(map) => {
            let mut out = serde_json::Map::new();
            for (k, v) in map {
                out.insert(k.nfc().collect(), normalize_value(v)?);
            }
            Value::Object(out)
        }
        Value::Number(n) => {
            if n.as_i64().is_none() && n.as_u64().is_none() {
                return Err(CanonicalError::FloatInPayload);
            }
            Value::Number(n)
        }
        other => other,
    })
}

/// Lowercase hex SHA-256 digest (64 characters).
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// The all-zero previous-hash value used by the first ledger record.
pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";
