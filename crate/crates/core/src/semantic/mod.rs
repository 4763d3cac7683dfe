//! The semantic triple model: statuses, behaviors and events, the map that
//! bundles them, and the persistent store.

mod jsonl;
mod query;
mod store;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use jsonl::{read_map, read_map_from, write_map, write_map_to};
pub use query::{evaluate, RecordType, SemanticQuery};
pub use store::{SemanticStore, StoreError, StoreReceipt};
pub use validate::{validate_map, ValidationReport, Violation, ViolationKind};

/// Immediate description of one cluster in one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusSemantic {
    pub id: String,
    pub label: String,
    /// Member delays [s], strictly ascending.
    pub delays: Vec<f64>,
    /// Member amplitude magnitudes [linear], index-aligned with `delays`.
    pub amplitudes: Vec<f64>,
    pub source_cluster: String,
    pub snapshot_time: f64,
}

impl StatusSemantic {
    pub fn min_delay(&self) -> Option<f64> {
        self.delays.first().copied()
    }

    pub fn max_delay(&self) -> Option<f64> {
        self.delays.last().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    Approach,
    MoveAway,
    Appear,
    Disappear,
    Accelerate,
    Decelerate,
    Static,
}

impl BehaviorKind {
    pub const ALL: [BehaviorKind; 7] = [
        BehaviorKind::Approach,
        BehaviorKind::MoveAway,
        BehaviorKind::Appear,
        BehaviorKind::Disappear,
        BehaviorKind::Accelerate,
        BehaviorKind::Decelerate,
        BehaviorKind::Static,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BehaviorKind::Approach => "approach",
            BehaviorKind::MoveAway => "move_away",
            BehaviorKind::Appear => "appear",
            BehaviorKind::Disappear => "disappear",
            BehaviorKind::Accelerate => "accelerate",
            BehaviorKind::Decelerate => "decelerate",
            BehaviorKind::Static => "static",
        }
    }

    /// The kind observed when the same motion is played backwards in time.
    pub fn reversed(self) -> Self {
        match self {
            BehaviorKind::Approach => BehaviorKind::MoveAway,
            BehaviorKind::MoveAway => BehaviorKind::Approach,
            BehaviorKind::Appear => BehaviorKind::Disappear,
            BehaviorKind::Disappear => BehaviorKind::Appear,
            BehaviorKind::Accelerate => BehaviorKind::Decelerate,
            BehaviorKind::Decelerate => BehaviorKind::Accelerate,
            BehaviorKind::Static => BehaviorKind::Static,
        }
    }
}

impl fmt::Display for BehaviorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BehaviorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BehaviorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown behavior kind `{s}`"))
    }
}

/// Motion pattern of one trajectory over a delay-time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSemantic {
    pub id: String,
    pub kind: BehaviorKind,
    /// t_n [s]
    pub start_time: f64,
    /// T_n [s]
    pub duration: f64,
    /// τ_n [s]
    pub delay_start: f64,
    /// D_n [s]
    pub delay_coverage: f64,
    pub statuses: Vec<String>,
    pub trajectory: String,
}

impl BehaviorSemantic {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }

    pub fn delay_end(&self) -> f64 {
        self.delay_start + self.delay_coverage
    }
}

/// Composition of behaviors (level 0) or of lower-level events (level ≥ 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSemantic {
    pub id: String,
    pub label: String,
    pub level: u32,
    pub start_time: f64,
    pub duration: f64,
    pub behaviors: Vec<String>,
    pub sub_events: Vec<String>,
}

impl EventSemantic {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }
}

/// Scene/trace description carried alongside the semantics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MapMeta {
    pub trace_id: String,
    /// Snapshot rate [Hz].
    pub snapshot_rate: f64,
    /// Carrier frequency [Hz].
    pub carrier: f64,
    /// Sounding bandwidth [Hz].
    pub bandwidth: f64,
    pub n_tones: usize,
}

/// The full channel semantics `{E, B, S}` of one trace.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SemanticMap {
    pub meta: MapMeta,
    pub events: Vec<EventSemantic>,
    pub behaviors: Vec<BehaviorSemantic>,
    pub statuses: Vec<StatusSemantic>,
}

impl SemanticMap {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty() && self.behaviors.is_empty() && self.statuses.is_empty()
    }

    pub fn status(&self, id: &str) -> Option<&StatusSemantic> {
        self.statuses.iter().find(|s| s.id == id)
    }

    pub fn behavior(&self, id: &str) -> Option<&BehaviorSemantic> {
        self.behaviors.iter().find(|b| b.id == id)
    }

    pub fn event(&self, id: &str) -> Option<&EventSemantic> {
        self.events.iter().find(|e| e.id == id)
    }

    pub fn records(&self) -> impl Iterator<Item = Record> + '_ {
        self.statuses
            .iter()
            .cloned()
            .map(Record::Status)
            .chain(self.behaviors.iter().cloned().map(Record::Behavior))
            .chain(self.events.iter().cloned().map(Record::Event))
    }
}

/// One semantic record of any level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Status(StatusSemantic),
    Behavior(BehaviorSemantic),
    Event(EventSemantic),
}

impl Record {
    pub fn id(&self) -> &str {
        match self {
            Record::Status(s) => &s.id,
            Record::Behavior(b) => &b.id,
            Record::Event(e) => &e.id,
        }
    }

    pub fn record_type(&self) -> RecordType {
        match self {
            Record::Status(_) => RecordType::Status,
            Record::Behavior(_) => RecordType::Behavior,
            Record::Event(_) => RecordType::Event,
        }
    }

    /// Time span `[start, end]`; a status is an instant.
    pub fn span(&self) -> (f64, f64) {
        match self {
            Record::Status(s) => (s.snapshot_time, s.snapshot_time),
            Record::Behavior(b) => (b.start_time, b.end_time()),
            Record::Event(e) => (e.start_time, e.end_time()),
        }
    }

    pub fn start_time(&self) -> f64 {
        self.span().0
    }
}

/// Smallest `duration` such that `start + duration >= end` holds in floating
/// point.
pub(crate) fn covering_length(start: f64, end: f64) -> f64 {
    let mut len = (end - start).max(0.0);
    while start + len < end {
        len = len.next_up();
    }
    len
}
