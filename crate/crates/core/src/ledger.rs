//! Append-only hash-chained event log.
//!
//! Entry `n` commits to entry `n-1` through `prev_hash`; entry 0 links to the
//! all-zero digest. The entry hash is
//!
//! ```text
//! SHA-256( index as u64 big-endian (8 bytes)
//!       || prev_hash (32 raw bytes)
//!       || entry type name in ASCII, e.g. "BolSealed"
//!       || payload_hash (32 raw bytes) )
//! ```
//!
//! The type name is the only variable-length field and sits between two
//! fixed-width ones, so the concatenation is unambiguous.
//!
//! The export format is one canonical-JSON entry per line in index order, the
//! payload carried as a string holding its exact canonical bytes.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::canonical;
use crate::digest::Digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntryType {
    BolCreated,
    ObservationRecorded,
    BolSealed,
}

impl EntryType {
    pub fn name(self) -> &'static str {
        match self {
            EntryType::BolCreated => "BolCreated",
            EntryType::ObservationRecorded => "ObservationRecorded",
            EntryType::BolSealed => "BolSealed",
        }
    }
}

impl fmt::Display for EntryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerEntry {
    pub index: u64,
    pub prev_hash: Digest,
    pub entry_type: EntryType,
    #[serde(with = "utf8_payload")]
    pub payload: Vec<u8>,
    pub payload_hash: Digest,
    pub entry_hash: Digest,
}

mod utf8_payload {
    use super::*;

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        let text = std::str::from_utf8(bytes).map_err(serde::ser::Error::custom)?;
        s.serialize_str(text)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        Ok(String::deserialize(d)?.into_bytes())
    }
}

pub fn entry_hash(index: u64, prev_hash: &Digest, entry_type: EntryType, payload_hash: &Digest) -> Digest {
    Digest::sha256_parts(&[
        &index.to_be_bytes(),
        prev_hash.as_bytes(),
        entry_type.name().as_bytes(),
        payload_hash.as_bytes(),
    ])
}

impl LedgerEntry {
    /// Builds the entry that follows `prev` (or the genesis entry).
    pub fn next(prev: Option<&LedgerEntry>, entry_type: EntryType, payload: Vec<u8>) -> Self {
        Self::after(prev.map(|p| (p.index, p.entry_hash)), entry_type, payload)
    }

    /// Builds the entry that follows the entry with the given index and hash.
    pub fn after(head: Option<(u64, Digest)>, entry_type: EntryType, payload: Vec<u8>) -> Self {
        let (index, prev_hash) = match head {
            Some((i, h)) => (i + 1, h),
            None => (0, Digest::ZERO),
        };
        let payload_hash = Digest::sha256(&payload);
        let entry_hash = entry_hash(index, &prev_hash, entry_type, &payload_hash);
        Self { index, prev_hash, entry_type, payload, payload_hash, entry_hash }
    }

    /// Store key for the entry at `index`; zero-padded so key order is index order.
    pub fn key(index: u64) -> String {
        format!("lg_{index:020}")
    }

    pub fn to_line(&self) -> Result<Vec<u8>, canonical::CanonicalError> {
        canonical::to_vec(self)
    }

    pub fn payload_json(&self) -> Option<serde_json::Value> {
        serde_json::from_slice(&self.payload).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChainReport {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_bad_index: Option<u64>,
    pub entries: u64,
}

/// Recomputes every hash and link; reports the smallest offending position.
pub fn verify_chain(entries: &[LedgerEntry]) -> ChainReport {
    let mut prev = Digest::ZERO;
    for (pos, e) in entries.iter().enumerate() {
        let pos = pos as u64;
        let good = e.index == pos
            && e.prev_hash == prev
            && Digest::sha256(&e.payload) == e.payload_hash
            && entry_hash(e.index, &e.prev_hash, e.entry_type, &e.payload_hash) == e.entry_hash;
        if !good {
            return ChainReport { ok: false, first_bad_index: Some(pos), entries: entries.len() as u64 };
        }
        prev = e.entry_hash;
    }
    ChainReport { ok: true, first_bad_index: None, entries: entries.len() as u64 }
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("entry {0} has a payload that is not UTF-8")]
    Payload(u64),
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
}

pub fn write_export<W: Write>(entries: &[LedgerEntry], mut out: W) -> Result<(), ExportError> {
    for e in entries {
        let line = e.to_line().map_err(|_| ExportError::Payload(e.index))?;
        out.write_all(&line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_export<R: BufRead>(input: R) -> Result<Vec<LedgerEntry>, ExportError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| ExportError::Parse { line: i + 1, source })?);
    }
    Ok(out)
}
