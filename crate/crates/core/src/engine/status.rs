//! Status semantics: labeling clusters by delay association.

use serde::{Deserialize, Serialize};

use super::RuleError;
use crate::clustering::Cluster;
use crate::scene::PathTruth;
use crate::semantic::StatusSemantic;
use crate::{delay_to_distance, ids};

pub const UNKNOWN_LABEL: &str = "unknown";

/// Default gate between a cluster centroid and the nearest true path [s].
pub const DEFAULT_TRUTH_GATE_S: f64 = 5e-9;

/// One association window. Exactly one of `delay` [s] or `distance` [m]
/// must be given; `time` [s] defaults to the whole trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<[f64; 2]>,
}

impl LabelEntry {
    pub fn matches(&self, delay: f64, t: f64) -> bool {
        let inside = |w: [f64; 2], x: f64| w[0] <= x && x <= w[1];
        let range = match (self.delay, self.distance) {
            (Some(w), _) => inside(w, delay),
            (None, Some(w)) => inside(w, delay_to_distance(delay)),
            (None, None) => false,
        };
        range && self.time.map_or(true, |w| inside(w, t))
    }
}

/// User-supplied association of delay (or distance) windows to labels.
/// The first matching entry wins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelMap {
    pub entries: Vec<LabelEntry>,
}

impl LabelMap {
    pub fn from_json(text: &str) -> Result<Self, RuleError> {
        let map: LabelMap =
            serde_json::from_str(text).map_err(|e| RuleError::Parse(e.to_string()))?;
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        let ordered = |w: Option<[f64; 2]>| w.map_or(true, |[lo, hi]| lo <= hi);
        for (i, e) in self.entries.iter().enumerate() {
            let bad = if e.label.is_empty() {
                Some("empty label")
            } else if e.delay.is_some() == e.distance.is_some() {
                Some("exactly one of delay or distance is required")
            } else if !ordered(e.delay) || !ordered(e.distance) || !ordered(e.time) {
                Some("window bounds out of order")
            } else {
                None
            };
            if let Some(reason) = bad {
                return Err(RuleError::InvalidLabelMap(format!("entry {i}: {reason}")));
            }
        }
        Ok(())
    }

    pub fn lookup(&self, delay: f64, t: f64) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.matches(delay, t))
            .map(|e| e.label.as_str())
    }
}

/// Source of labels for status characterization.
#[derive(Debug, Clone, Copy)]
pub enum Association<'a> {
    Labels(&'a LabelMap),
    /// Simulator ground truth for the cluster's snapshot; the nearest true
    /// delay within `gate` wins.
    Truth {
        paths: &'a [PathTruth],
        gate: f64,
    },
}

impl Association<'_> {
    pub fn label_for(&self, delay: f64, t: f64) -> Option<&str> {
        match *self {
            Association::Labels(map) => map.lookup(delay, t),
            Association::Truth { paths, gate } => paths
                .iter()
                .map(|p| ((p.delay - delay).abs(), p))
                .filter(|(d, _)| *d <= gate)
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, p)| p.label.as_str()),
        }
    }
}

/// Labels one cluster. Clusters without a matching association are
/// labeled [`UNKNOWN_LABEL`].
pub fn characterize_status(cluster: &Cluster, assoc: Association<'_>) -> StatusSemantic {
    let label = assoc
        .label_for(cluster.centroid_delay, cluster.snapshot_time)
        .unwrap_or(UNKNOWN_LABEL)
        .to_string();

    // Members are delay-sorted; collapse exact duplicates to keep delays
    // strictly ascending.
    let mut delays: Vec<f64> = Vec::with_capacity(cluster.members.len());
    let mut amplitudes: Vec<f64> = Vec::with_capacity(cluster.members.len());
    for m in &cluster.members {
        let a = m.amplitude.abs();
        if delays.last() == Some(&m.delay) {
            let last = amplitudes.last_mut().unwrap();
            *last = last.max(a);
        } else {
            delays.push(m.delay.max(0.0));
            amplitudes.push(a);
        }
    }

    StatusSemantic {
        id: ids::derive("status", &[&cluster.id]),
        label,
        delays,
        amplitudes,
        source_cluster: cluster.id.clone(),
        snapshot_time: cluster.snapshot_time,
    }
}
