//! Durable keyed records with secondary indexes.
//!
//! The store keeps every record in memory and persists writes through a
//! [`Journal`]. Writes are grouped into batches; a batch is one journal line
//! and is either entirely applied or not at all. The file journal syncs each
//! line before the write is acknowledged, and on open it replays the log and
//! drops a torn trailing line left by a crash mid-write.
//!
//! Two secondary indexes are maintained alongside every write: record name
//! (for prefix scans) and referenced ids (for where-used lookups). What a
//! record names and references is decided by an [`Indexer`], so the store
//! itself never parses record bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::canonical;

pub const JOURNAL_FILE: &str = "journal.ndjson";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RecordKind {
    Component,
    Assembly,
    Bom,
    Bol,
    LedgerEntry,
}

impl RecordKind {
    /// Kind implied by a key's prefix.
    pub fn of_key(key: &str) -> Option<Self> {
        let (prefix, _) = key.split_once('_')?;
        Some(match prefix {
            "ds" | "af" => RecordKind::Component,
            "as" => RecordKind::Assembly,
            "bom" => RecordKind::Bom,
            "bol" => RecordKind::Bol,
            "lg" => RecordKind::LedgerEntry,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredRecord {
    pub key: String,
    pub kind: RecordKind,
    pub bytes: Vec<u8>,
    pub revision: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no record with key {0}")]
    NotFound(String),
    #[error("revision conflict on {key}: expected {expected}, current {actual}")]
    RevisionConflict { key: String, expected: u64, actual: u64 },
    #[error("key {0:?} has no known kind prefix")]
    InvalidKey(String),
    #[error("storage i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("journal is corrupt: {0}")]
    Corrupt(String),
}

/// One write in a batch.
#[derive(Debug, Clone)]
pub struct Put {
    pub key: String,
    pub bytes: Vec<u8>,
    pub expected_revision: Option<u64>,
}

impl Put {
    pub fn new(key: impl Into<String>, bytes: Vec<u8>) -> Self {
        Self { key: key.into(), bytes, expected_revision: None }
    }

    pub fn expecting(mut self, revision: u64) -> Self {
        self.expected_revision = Some(revision);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalWrite {
    pub key: String,
    pub revision: u64,
    #[serde(with = "hex_bytes")]
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalBatch {
    pub writes: Vec<JournalWrite>,
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Where committed batches go. Implementations must make a batch durable
/// before `append` returns `Ok`.
pub trait Journal: Send + Sync {
    fn load(&mut self) -> Result<Vec<JournalBatch>, StoreError>;
    fn append(&mut self, batch: &JournalBatch) -> Result<(), StoreError>;
}

/// Volatile journal for tests and scratch stores.
#[derive(Debug, Default)]
pub struct MemoryJournal;

impl Journal for MemoryJournal {
    fn load(&mut self) -> Result<Vec<JournalBatch>, StoreError> {
        Ok(Vec::new())
    }

    fn append(&mut self, _batch: &JournalBatch) -> Result<(), StoreError> {
        Ok(())
    }
}

/// Newline-delimited journal in a data directory.
#[derive(Debug)]
pub struct FileJournal {
    path: PathBuf,
    file: File,
}

impl FileJournal {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        fs::create_dir_all(dir.as_ref())?;
        let path = dir.as_ref().join(JOURNAL_FILE);
        let file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Journal for FileJournal {
    fn load(&mut self) -> Result<Vec<JournalBatch>, StoreError> {
        let mut raw = Vec::new();
        self.file.seek(SeekFrom::Start(0))?;
        self.file.read_to_end(&mut raw)?;

        let mut batches = Vec::new();
        let mut good_len = 0usize;
        let mut rest = &raw[..];
        while !rest.is_empty() {
            let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
                break; // torn tail: never acknowledged
            };
            let line = &rest[..nl];
            match serde_json::from_slice::<JournalBatch>(line) {
                Ok(batch) => batches.push(batch),
                // A complete but unreadable final line is a torn write that
                // happened to end in a newline byte.
                Err(_) if good_len + nl + 1 == raw.len() => break,
                Err(e) => {
                    return Err(StoreError::Corrupt(format!("line at byte {good_len}: {e}")));
                }
            }
            good_len += nl + 1;
            rest = &rest[nl + 1..];
        }
        if good_len < raw.len() {
            self.file.set_len(good_len as u64)?;
            self.file.sync_data()?;
        }
        Ok(batches)
    }

    fn append(&mut self, batch: &JournalBatch) -> Result<(), StoreError> {
        let mut line = canonical::to_vec(batch).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }
}

/// What a record contributes to the secondary indexes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IndexTerms {
    pub name: Option<String>,
    pub references: BTreeSet<String>,
}

pub trait Indexer: Send + Sync {
    fn terms(&self, kind: RecordKind, bytes: &[u8]) -> IndexTerms;
}

/// Indexes nothing.
#[derive(Debug, Default)]
pub struct NoIndex;

impl Indexer for NoIndex {
    fn terms(&self, _kind: RecordKind, _bytes: &[u8]) -> IndexTerms {
        IndexTerms::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScanFilter {
    All,
    NamePrefix(String),
    /// Records whose serialized form references this id.
    References(String),
}

pub struct Store {
    journal: Box<dyn Journal>,
    indexer: Box<dyn Indexer>,
    records: BTreeMap<String, StoredRecord>,
    terms: BTreeMap<String, IndexTerms>,
    names: BTreeSet<(RecordKind, String, String)>,
    refs: BTreeMap<String, BTreeSet<String>>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("records", &self.records.len()).finish_non_exhaustive()
    }
}

impl Store {
    /// Opens a store over `journal`, replaying whatever it already holds.
    pub fn open(mut journal: Box<dyn Journal>, indexer: Box<dyn Indexer>) -> Result<Self, StoreError> {
        let batches = journal.load()?;
        let mut store = Self {
            journal,
            indexer,
            records: BTreeMap::new(),
            terms: BTreeMap::new(),
            names: BTreeSet::new(),
            refs: BTreeMap::new(),
        };
        for batch in batches {
            for w in batch.writes {
                let current = store.revision(&w.key);
                if w.revision != current + 1 {
                    return Err(StoreError::Corrupt(format!(
                        "{} jumps from revision {current} to {}",
                        w.key, w.revision
                    )));
                }
                store.apply(w)?;
            }
        }
        Ok(store)
    }

    pub fn in_memory(indexer: Box<dyn Indexer>) -> Self {
        Self::open(Box::new(MemoryJournal), indexer).expect("memory journal cannot fail")
    }

    pub fn open_dir(dir: impl AsRef<Path>, indexer: Box<dyn Indexer>) -> Result<Self, StoreError> {
        Self::open(Box::new(FileJournal::open(dir)?), indexer)
    }

    /// Current revision of `key`; 0 when absent.
    pub fn revision(&self, key: &str) -> u64 {
        self.records.get(key).map_or(0, |r| r.revision)
    }

    pub fn put(&mut self, key: &str, bytes: Vec<u8>, expected_revision: Option<u64>) -> Result<u64, StoreError> {
        let put = Put { key: key.to_owned(), bytes, expected_revision };
        Ok(self.commit(vec![put])?[0])
    }

    /// Applies all puts atomically; returns the new revision of each.
    pub fn commit(&mut self, puts: Vec<Put>) -> Result<Vec<u64>, StoreError> {
        if puts.is_empty() {
            return Ok(Vec::new());
        }
        let mut pending: BTreeMap<&str, u64> = BTreeMap::new();
        let mut writes = Vec::with_capacity(puts.len());
        for put in &puts {
            if RecordKind::of_key(&put.key).is_none() {
                return Err(StoreError::InvalidKey(put.key.clone()));
            }
            let current = pending.get(put.key.as_str()).copied().unwrap_or_else(|| self.revision(&put.key));
            if let Some(expected) = put.expected_revision {
                if expected != current {
                    return Err(StoreError::RevisionConflict { key: put.key.clone(), expected, actual: current });
                }
            }
            pending.insert(&put.key, current + 1);
            writes.push(JournalWrite { key: put.key.clone(), revision: current + 1, bytes: put.bytes.clone() });
        }
        let batch = JournalBatch { writes };
        self.journal.append(&batch)?;
        let revisions = batch.writes.iter().map(|w| w.revision).collect();
        for w in batch.writes {
            self.apply(w)?;
        }
        Ok(revisions)
    }

    fn apply(&mut self, w: JournalWrite) -> Result<(), StoreError> {
        let kind = RecordKind::of_key(&w.key).ok_or_else(|| StoreError::InvalidKey(w.key.clone()))?;
        if let Some(old) = self.terms.remove(&w.key) {
            if let Some(name) = old.name {
                self.names.remove(&(kind, name, w.key.clone()));
            }
            for r in old.references {
                if let Some(set) = self.refs.get_mut(&r) {
                    set.remove(&w.key);
                }
            }
        }
        let terms = self.indexer.terms(kind, &w.bytes);
        if let Some(name) = &terms.name {
            self.names.insert((kind, name.clone(), w.key.clone()));
        }
        for r in &terms.references {
            self.refs.entry(r.clone()).or_default().insert(w.key.clone());
        }
        self.terms.insert(w.key.clone(), terms);
        self.records.insert(w.key.clone(), StoredRecord { key: w.key, kind, bytes: w.bytes, revision: w.revision });
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<&StoredRecord, StoreError> {
        self.records.get(key).ok_or_else(|| StoreError::NotFound(key.to_owned()))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.records.contains_key(key)
    }

    /// Records of `kind` matching `filter`, in ascending key order.
    pub fn scan(&self, kind: RecordKind, filter: &ScanFilter) -> Vec<&StoredRecord> {
        let keys: Vec<&String> = match filter {
            ScanFilter::All => {
                return self.records.values().filter(|r| r.kind == kind).collect();
            }
            ScanFilter::NamePrefix(prefix) => {
                let mut keys: Vec<&String> = self
                    .names
                    .range((kind, prefix.clone(), String::new())..)
                    .take_while(|(k, name, _)| *k == kind && name.starts_with(prefix.as_str()))
                    .map(|(_, _, key)| key)
                    .collect();
                keys.sort();
                keys
            }
            ScanFilter::References(id) => {
                self.refs.get(id).into_iter().flatten().filter(|key| RecordKind::of_key(key) == Some(kind)).collect()
            }
        };
        keys.into_iter().map(|k| &self.records[k]).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Treats bytes as `name|ref,ref,...`.
    struct PipeIndexer;

    impl Indexer for PipeIndexer {
        fn terms(&self, _kind: RecordKind, bytes: &[u8]) -> IndexTerms {
            let text = String::from_utf8_lossy(bytes);
            let (name, refs) = text.split_once('|').unwrap_or((&text, ""));
            IndexTerms {
                name: Some(name.to_owned()),
                references: refs.split(',').filter(|s| !s.is_empty()).map(str::to_owned).collect(),
            }
        }
    }

    const K1: &str = "as_00000000000000000000000000000001";
    const K2: &str = "as_00000000000000000000000000000002";

    #[test]
    fn first_put_is_revision_one() {
        let mut s = Store::in_memory(Box::new(NoIndex));
        assert_eq!(s.put(K1, b"x".to_vec(), None).unwrap(), 1);
        assert_eq!(s.put(K1, b"y".to_vec(), Some(1)).unwrap(), 2);
        assert_eq!(s.get(K1).unwrap().bytes, b"y");
    }

    #[test]
    fn stale_expected_revision_conflicts() {
        let mut s = Store::in_memory(Box::new(NoIndex));
        s.put(K1, b"a".to_vec(), None).unwrap();
        s.put(K1, b"b".to_vec(), None).unwrap();
        let err = s.put(K1, b"c".to_vec(), Some(1)).unwrap_err();
        assert!(matches!(err, StoreError::RevisionConflict { expected: 1, actual: 2, .. }));
        assert_eq!(s.get(K1).unwrap().bytes, b"b");
    }

    #[test]
    fn failed_batch_leaves_nothing_behind() {
        let mut s = Store::in_memory(Box::new(NoIndex));
        s.put(K1, b"a".to_vec(), None).unwrap();
        let err = s.commit(vec![Put::new(K2, b"new".to_vec()), Put::new(K1, b"b".to_vec()).expecting(7)]).unwrap_err();
        assert!(matches!(err, StoreError::RevisionConflict { .. }));
        assert!(!s.contains(K2));
    }

    #[test]
    fn unknown_key_and_prefix() {
        let mut s = Store::in_memory(Box::new(NoIndex));
        assert!(matches!(s.get(K1), Err(StoreError::NotFound(_))));
        assert!(matches!(s.put("zz_1", vec![], None), Err(StoreError::InvalidKey(_))));
    }

    #[test]
    fn scan_on_empty_store_is_empty() {
        let s = Store::in_memory(Box::new(PipeIndexer));
        assert!(s.scan(RecordKind::Bom, &ScanFilter::All).is_empty());
        assert!(s.scan(RecordKind::Bom, &ScanFilter::NamePrefix("H".into())).is_empty());
    }

    #[test]
    fn indexes_follow_overwrites() {
        let mut s = Store::in_memory(Box::new(PipeIndexer));
        s.put(K1, b"HPC Congestion|ds_1".to_vec(), None).unwrap();
        s.put(K2, b"HPC Other|ds_2".to_vec(), None).unwrap();
        let hits = |s: &Store, f| s.scan(RecordKind::Assembly, &f).iter().map(|r| r.key.clone()).collect::<Vec<_>>();
        assert_eq!(hits(&s, ScanFilter::NamePrefix("HPC".into())), vec![K1, K2]);
        assert_eq!(hits(&s, ScanFilter::References("ds_1".into())), vec![K1]);

        s.put(K1, b"Renamed|ds_2".to_vec(), None).unwrap();
        assert_eq!(hits(&s, ScanFilter::NamePrefix("HPC".into())), vec![K2]);
        assert!(hits(&s, ScanFilter::References("ds_1".into())).is_empty());
        assert_eq!(hits(&s, ScanFilter::References("ds_2".into())), vec![K1, K2]);
        // kind filter applies to the reference index too
        assert!(s.scan(RecordKind::Bom, &ScanFilter::References("ds_2".into())).is_empty());
    }

    #[test]
    fn file_store_survives_reopen_and_drops_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut s = Store::open_dir(dir.path(), Box::new(NoIndex)).unwrap();
            s.put(K1, vec![0, 255, 10, 13], None).unwrap();
            s.put(K1, vec![1, 2, 3], None).unwrap();
            s.put(K2, b"two".to_vec(), None).unwrap();
        }
        let path = dir.path().join(JOURNAL_FILE);
        let intact = fs::read(&path).unwrap();
        let mut torn = intact.clone();
        torn.extend_from_slice(br#"{"writes":[{"bytes":"ab","key":"as_0"#);
        fs::write(&path, &torn).unwrap();

        let s = Store::open_dir(dir.path(), Box::new(NoIndex)).unwrap();
        assert_eq!(s.get(K1).unwrap().bytes, vec![1, 2, 3]);
        assert_eq!(s.get(K1).unwrap().revision, 2);
        assert_eq!(s.get(K2).unwrap().bytes, b"two");
        assert_eq!(fs::read(&path).unwrap(), intact);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut s = Store::open_dir(dir.path(), Box::new(NoIndex)).unwrap();
            s.put(K1, b"a".to_vec(), None).unwrap();
        }
        let path = dir.path().join(JOURNAL_FILE);
        let good = fs::read(&path).unwrap();
        let mut bad = b"garbage\n".to_vec();
        bad.extend_from_slice(&good);
        fs::write(&path, bad).unwrap();
        assert!(matches!(Store::open_dir(dir.path(), Box::new(NoIndex)), Err(StoreError::Corrupt(_))));
    }
}
