//! Single-file persistent store of historical semantics.
//!
//! The store is an append-only JSON-lines log. Each line is a tagged record
//! (`header`, `meta`, `status`, `behavior`, `event` or `snapshot`). A
//! `snapshot` line carries the complete state and supersedes everything before
//! it, so loading replays from the last snapshot. Writes go through `&mut self`
//! (single writer); queries take `&self` and may run concurrently.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::query::Catalog;
use super::{
    validate_map, BehaviorSemantic, EventSemantic, MapMeta, Record, SemanticMap, SemanticQuery,
    StatusSemantic, ValidationReport,
};

const FORMAT: &str = "chansem-store";
const VERSION: u32 = 1;
const DEFAULT_SNAPSHOT_EVERY: usize = 16;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage unavailable at {path}: {source}")]
    Unavailable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("map rejected with {} violation(s):\n{0}", .0.len())]
    InvalidMap(ValidationReport),
    #[error("malformed record on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unknown identifier `{0}`")]
    UnknownId(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

impl StoreError {
    pub(crate) fn unavailable(path: &Path, source: std::io::Error) -> Self {
        StoreError::Unavailable {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Counts of the records contained in a stored map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StoreReceipt {
    pub events: usize,
    pub behaviors: usize,
    pub statuses: usize,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    metas: Vec<MapMeta>,
    statuses: Vec<StatusSemantic>,
    behaviors: Vec<BehaviorSemantic>,
    events: Vec<EventSemantic>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Header { format: String, version: u32 },
    Meta(MapMeta),
    Status(StatusSemantic),
    Behavior(BehaviorSemantic),
    Event(EventSemantic),
    Snapshot(Snapshot),
}

#[derive(Debug)]
pub struct SemanticStore {
    path: PathBuf,
    catalog: Catalog,
    metas: BTreeMap<String, MapMeta>,
    writes_since_snapshot: usize,
    snapshot_every: usize,
}

impl SemanticStore {
    /// Opens the store at `path`, creating an empty log when the file does
    /// not exist yet.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut store = SemanticStore {
            path: path.clone(),
            catalog: Catalog::default(),
            metas: BTreeMap::new(),
            writes_since_snapshot: 0,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
        };
        if path.exists() {
            store.replay()?;
        } else {
            let header = LogLine::Header {
                format: FORMAT.into(),
                version: VERSION,
            };
            store.append(std::iter::once(header))?;
        }
        Ok(store)
    }

    /// Opens an existing store; fails if the file is missing.
    pub fn open_existing(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(StoreError::unavailable(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "store file does not exist"),
            ));
        }
        Self::open(path)
    }

    /// Number of `store` calls between full-state snapshot records.
    pub fn with_snapshot_every(mut self, n: usize) -> Self {
        self.snapshot_every = n.max(1);
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Number of distinct records held.
    pub fn len(&self) -> usize {
        self.catalog.len()
    }

    pub fn is_empty(&self) -> bool {
        self.catalog.len() == 0
    }

    pub fn metas(&self) -> impl Iterator<Item = &MapMeta> {
        self.metas.values()
    }

    pub fn get(&self, id: &str) -> Option<Record> {
        self.catalog.get(id)
    }

    /// Persists a valid map. Records already present with identical content
    /// are not rewritten, so storing the same map twice is a no-op.
    pub fn store(&mut self, map: &SemanticMap) -> Result<StoreReceipt, StoreError> {
        let report = validate_map(map);
        if !report.is_valid() {
            return Err(StoreError::InvalidMap(report));
        }
        let mut staged = self.catalog.clone();
        let mut lines = Vec::new();
        let meta_changed =
            !map.meta.trace_id.is_empty() && self.metas.get(&map.meta.trace_id) != Some(&map.meta);
        if meta_changed {
            lines.push(LogLine::Meta(map.meta.clone()));
        }
        for r in map.records() {
            if staged.insert(r.clone()) {
                lines.push(match r {
                    Record::Status(s) => LogLine::Status(s),
                    Record::Behavior(b) => LogLine::Behavior(b),
                    Record::Event(e) => LogLine::Event(e),
                });
            }
        }
        if !lines.is_empty() {
            self.append(lines)?;
            self.catalog = staged;
            if meta_changed {
                self.metas
                    .insert(map.meta.trace_id.clone(), map.meta.clone());
            }
            self.writes_since_snapshot += 1;
            if self.writes_since_snapshot >= self.snapshot_every {
                self.snapshot()?;
            }
        }
        Ok(StoreReceipt {
            events: map.events.len(),
            behaviors: map.behaviors.len(),
            statuses: map.statuses.len(),
        })
    }

    /// Appends a full-state snapshot record.
    pub fn snapshot(&mut self) -> Result<(), StoreError> {
        let snap = Snapshot {
            metas: self.metas.values().cloned().collect(),
            statuses: self.catalog.statuses().cloned().collect(),
            behaviors: self.catalog.behaviors().cloned().collect(),
            events: self.catalog.events().cloned().collect(),
        };
        self.append(std::iter::once(LogLine::Snapshot(snap)))?;
        self.writes_since_snapshot = 0;
        Ok(())
    }

    pub fn query(&self, q: &SemanticQuery) -> Result<Vec<Record>, StoreError> {
        self.catalog.query(q)
    }

    /// All stored records as one map (metadata of the first trace, if any).
    pub fn to_map(&self) -> SemanticMap {
        SemanticMap {
            meta: self.metas.values().next().cloned().unwrap_or_default(),
            statuses: self.catalog.statuses().cloned().collect(),
            behaviors: self.catalog.behaviors().cloned().collect(),
            events: self.catalog.events().cloned().collect(),
        }
    }

    fn append(&self, lines: impl IntoIterator<Item = LogLine>) -> Result<(), StoreError> {
        let err = |e| StoreError::unavailable(&self.path, e);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(err)?;
        let mut out = BufWriter::new(file);
        for line in lines {
            serde_json::to_writer(&mut out, &line).map_err(|e| err(e.into()))?;
            out.write_all(b"\n").map_err(err)?;
        }
        out.flush().map_err(err)?;
        out.get_ref().sync_data().map_err(err)
    }

    fn replay(&mut self) -> Result<(), StoreError> {
        let file = File::open(&self.path).map_err(|e| StoreError::unavailable(&self.path, e))?;
        let mut saw_header = false;
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| StoreError::unavailable(&self.path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |message: String| StoreError::Malformed {
                line: n + 1,
                message,
            };
            let rec: LogLine = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            match rec {
                LogLine::Header { format, version } => {
                    if format != FORMAT || version != VERSION {
                        return Err(malformed(format!(
                            "unsupported store format {format} v{version}"
                        )));
                    }
                    saw_header = true;
                }
                _ if !saw_header => return Err(malformed("missing store header".into())),
                LogLine::Meta(m) => {
                    self.metas.insert(m.trace_id.clone(), m);
                }
                LogLine::Status(s) => {
                    self.catalog.insert(Record::Status(s));
                }
                LogLine::Behavior(b) => {
                    self.catalog.insert(Record::Behavior(b));
                }
                LogLine::Event(e) => {
                    self.catalog.insert(Record::Event(e));
                }
                LogLine::Snapshot(snap) => {
                    self.catalog = Catalog::default();
                    self.metas = snap
                        .metas
                        .into_iter()
                        .map(|m| (m.trace_id.clone(), m))
                        .collect();
                    let records = snap
                        .statuses
                        .into_iter()
                        .map(Record::Status)
                        .chain(snap.behaviors.into_iter().map(Record::Behavior))
                        .chain(snap.events.into_iter().map(Record::Event));
                    for r in records {
                        self.catalog.insert(r);
                    }
                    self.writes_since_snapshot = 0;
                }
            }
        }
        if !saw_header {
            return Err(StoreError::Malformed {
                line: 0,
                message: "empty store file".into(),
            });
        }
        Ok(())
    }
}
