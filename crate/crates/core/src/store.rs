//! Append-only provenance store with file persistence.
//!
//! One canonical record line per file line, append order = file order,
//! sequence number = 1-based line number. Appends are serialized through
//! `&mut Store`; readers work on immutable [`StoreSnapshot`]s.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::record::{
    canonical_serialize, parse_record, validate_record, ActorRecord, ProvenanceRecord, RecordId,
    RecordKind, Timestamp,
};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("duplicate {kind} record id {id:?}")]
    DuplicateId { kind: RecordKind, id: RecordId },
    #[error("operation {operation:?} references unknown {field} {id:?}")]
    DanglingReference {
        operation: RecordId,
        field: &'static str,
        id: RecordId,
    },
    #[error("no actor record with id {0:?}")]
    ActorNotFound(RecordId),
    #[error("corrupt store file {path:?} at line {line}: {message}")]
    CorruptLine {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("store io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Immutable view of the store at one point in time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreSnapshot {
    pub records: Vec<ProvenanceRecord>,
    pub high_water_mark: u64,
}

impl StoreSnapshot {
    pub fn empty() -> Self {
        StoreSnapshot {
            records: Vec::new(),
            high_water_mark: 0,
        }
    }

    pub fn operations(&self) -> impl Iterator<Item = &crate::record::OperationRecord> {
        self.records.iter().filter_map(|r| r.as_operation())
    }

    /// Records matching every present filter field, in append order.
    pub fn query(&self, filter: &QueryFilter) -> Vec<ProvenanceRecord> {
        self.records
            .iter()
            .filter(|r| filter.matches(r))
            .cloned()
            .collect()
    }

    /// The unique actor record with the given id.
    pub fn resolve_actor(&self, actor_id: &RecordId) -> Result<&ActorRecord, StoreError> {
        self.records
            .iter()
            .filter_map(|r| r.as_actor())
            .find(|a| &a.id == actor_id)
            .ok_or_else(|| StoreError::ActorNotFound(actor_id.clone()))
    }

    pub fn resolve_context(&self, context_id: &RecordId) -> Option<&crate::record::ContextRecord> {
        self.records
            .iter()
            .filter_map(|r| r.as_context())
            .find(|c| &c.id == context_id)
    }
}

/// All fields optional; an empty filter matches everything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryFilter {
    pub actor_id: Option<RecordId>,
    pub context_id: Option<RecordId>,
    pub resource_id: Option<String>,
    /// Inclusive on both ends.
    pub time_range: Option<(Timestamp, Timestamp)>,
    pub kind: Option<RecordKind>,
}

impl QueryFilter {
    pub fn matches(&self, record: &ProvenanceRecord) -> bool {
        if let Some(kind) = self.kind {
            if record.kind() != kind {
                return false;
            }
        }
        if let Some(actor_id) = &self.actor_id {
            let matches = match record {
                ProvenanceRecord::Operation(op) => &op.actor_id == actor_id,
                ProvenanceRecord::Message(m) => &m.actor_id == actor_id,
                ProvenanceRecord::Actor(a) => &a.id == actor_id,
                _ => false,
            };
            if !matches {
                return false;
            }
        }
        if let Some(context_id) = &self.context_id {
            let matches = match record {
                ProvenanceRecord::Operation(op) => &op.context_id == context_id,
                ProvenanceRecord::Context(c) => &c.id == context_id,
                _ => false,
            };
            if !matches {
                return false;
            }
        }
        if let Some(resource_id) = &self.resource_id {
            let matches = match record {
                ProvenanceRecord::Operation(op) => op.resource_id == *resource_id,
                _ => false,
            };
            if !matches {
                return false;
            }
        }
        if let Some((from, to)) = &self.time_range {
            let ts = match record {
                ProvenanceRecord::Operation(op) => Some(op.timestamp),
                ProvenanceRecord::Message(m) => Some(m.timestamp),
                ProvenanceRecord::Preference(p) => Some(p.timestamp),
                _ => None,
            };
            match ts {
                Some(ts) if ts >= *from && ts <= *to => {}
                _ => return false,
            }
        }
        true
    }
}

/// Single-writer append-only store. When opened with a path, every accepted
/// append is flushed to the backing file before `append` returns.
#[derive(Debug)]
pub struct Store {
    records: Vec<ProvenanceRecord>,
    ids: HashSet<(RecordKind, RecordId)>,
    actors: HashMap<RecordId, usize>,
    contexts: HashSet<RecordId>,
    file: Option<File>,
}

impl Store {
    /// Store without persistence, for tests and in-memory pipelines.
    pub fn in_memory() -> Self {
        Store {
            records: Vec::new(),
            ids: HashSet::new(),
            actors: HashMap::new(),
            contexts: HashSet::new(),
            file: None,
        }
    }

    /// Opens (or creates) a file-backed store, replaying any existing lines.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let mut store = Store::in_memory();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line_no = i + 1;
                let line = line?;
                let record = parse_record(&line).map_err(|e| StoreError::CorruptLine {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                })?;
                // Replay through the same admission checks as live appends.
                store.admit(&record).map_err(|e| StoreError::CorruptLine {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                })?;
                // The replayed line must be canonical, otherwise reload would
                // not be an identity.
                let canonical = canonical_serialize(&record).map_err(|e| StoreError::CorruptLine {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                })?;
                if canonical != line {
                    return Err(StoreError::CorruptLine {
                        path: path.to_path_buf(),
                        line: line_no,
                        message: "line is not in canonical form".to_string(),
                    });
                }
                store.commit(record);
            }
        }
        store.file = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(store)
    }

    fn admit(&self, record: &ProvenanceRecord) -> Result<(), StoreError> {
        let violations = validate_record(record);
        if !violations.is_empty() {
            return Err(StoreError::InvalidRecord(violations.join("; ")));
        }
        let key = (record.kind(), record.id().clone());
        if self.ids.contains(&key) {
            return Err(StoreError::DuplicateId {
                kind: key.0,
                id: key.1,
            });
        }
        if let ProvenanceRecord::Operation(op) = record {
            if !self.actors.contains_key(&op.actor_id) {
                return Err(StoreError::DanglingReference {
                    operation: op.id.clone(),
                    field: "actor",
                    id: op.actor_id.clone(),
                });
            }
            if !self.contexts.contains(&op.context_id) {
                return Err(StoreError::DanglingReference {
                    operation: op.id.clone(),
                    field: "context",
                    id: op.context_id.clone(),
                });
            }
        }
        Ok(())
    }

    fn commit(&mut self, record: ProvenanceRecord) {
        self.ids.insert((record.kind(), record.id().clone()));
        match &record {
            ProvenanceRecord::Actor(a) => {
                self.actors.insert(a.id.clone(), self.records.len());
            }
            ProvenanceRecord::Context(c) => {
                self.contexts.insert(c.id.clone());
            }
            _ => {}
        }
        self.records.push(record);
    }

    /// Appends a record and returns its sequence number (1-based).
    pub fn append(&mut self, record: ProvenanceRecord) -> Result<u64, StoreError> {
        self.admit(&record)?;
        if let Some(file) = &mut self.file {
            let line = canonical_serialize(&record)
                .expect("admitted records serialize");
            file.write_all(line.as_bytes())?;
            file.write_all(b"\n")?;
            file.flush()?;
            file.sync_data()?;
        }
        self.commit(record);
        Ok(self.records.len() as u64)
    }

    pub fn len(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn snapshot(&self) -> StoreSnapshot {
        StoreSnapshot {
            records: self.records.clone(),
            high_water_mark: self.records.len() as u64,
        }
    }
}
