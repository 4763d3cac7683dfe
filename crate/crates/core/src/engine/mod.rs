//! Derivation of status, behavior and event semantics.

mod behavior;
mod events;
mod status;

use std::collections::HashMap;

use rayon::prelude::*;

pub use behavior::{behavior_label, classify_behavior, drift_profile, BehaviorThresholds};
pub use events::{
    compose_events, EventRule, LabeledKind, Pattern, RuleError, RuleSet, DEFAULT_MAX_SEQ_GAP_S,
};
pub use status::{
    characterize_status, Association, LabelEntry, LabelMap, DEFAULT_TRUTH_GATE_S, UNKNOWN_LABEL,
};

use crate::semantic::{validate_map, MapMeta, SemanticMap, StatusSemantic, StoreError};
use crate::tracking::Trajectory;

/// The rule set shipped as default.
pub const DEFAULT_RULES: &str = include_str!("../../../../rules/street.json");

pub fn default_rules() -> RuleSet {
    RuleSet::from_json(DEFAULT_RULES).expect("bundled rule set is valid")
}

/// Assembles statuses, trajectory behaviors and composed events into a
/// validated map.
///
/// Trajectory samples are joined to statuses through their cluster id;
/// samples without a status are skipped.
pub fn build_semantic_map(
    meta: MapMeta,
    mut statuses: Vec<StatusSemantic>,
    trajectories: &[Trajectory],
    rules: &RuleSet,
    thresholds: &BehaviorThresholds,
) -> Result<SemanticMap, StoreError> {
    let interval = 1.0 / meta.snapshot_rate;
    let by_cluster: HashMap<&str, &StatusSemantic> = statuses
        .iter()
        .map(|s| (s.source_cluster.as_str(), s))
        .collect();

    let behaviors: Vec<_> = trajectories
        .par_iter()
        .map(|tr| {
            let mut kept = tr.clone();
            kept.samples
                .retain(|s| by_cluster.contains_key(s.cluster.as_str()));
            let members: Vec<&StatusSemantic> = kept
                .samples
                .iter()
                .map(|s| by_cluster[s.cluster.as_str()])
                .collect();
            classify_behavior(&kept, &members, thresholds, interval)
        })
        .flatten_iter()
        .collect();

    let events = compose_events(&behaviors, &statuses, rules, &meta.trace_id);

    statuses.sort_by(|a, b| {
        a.snapshot_time
            .total_cmp(&b.snapshot_time)
            .then(
                a.min_delay()
                    .unwrap_or(0.0)
                    .total_cmp(&b.min_delay().unwrap_or(0.0)),
            )
            .then_with(|| a.id.cmp(&b.id))
    });
    let map = SemanticMap {
        meta,
        events,
        behaviors,
        statuses,
    };
    let report = validate_map(&map);
    if report.is_valid() {
        Ok(map)
    } else {
        Err(StoreError::InvalidMap(report))
    }
}
