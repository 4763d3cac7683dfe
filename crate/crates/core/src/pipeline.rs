//! End-to-end characterization: responses → MPCs → clusters → trajectories
//! → semantics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    k_power_means_restarts, select_k, Cluster, DEFAULT_K_MAX, DEFAULT_RESTARTS,
};
use crate::dsp::{estimate_noise_floor, extract_mpcs, to_cir_windowed, to_pdp, Pdp, Window};
use crate::engine::{
    build_semantic_map, characterize_status, Association, BehaviorThresholds, LabelMap, RuleSet,
    DEFAULT_TRUTH_GATE_S,
};
use crate::semantic::{MapMeta, SemanticMap, StatusSemantic};
use crate::tracking::{track_all, TrackerConfig, Trajectory};
use crate::{ids, Error, Result};

/// Knobs of the characterization stages. Every field has a default, so a
/// partial JSON object is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Tone taper before inversion.
    pub window: Window,
    /// Margin above the median PDP bin for MPC detection [dB].
    pub noise_margin_db: f64,
    /// Detection floor relative to the strongest bin [dB below peak].
    pub dynamic_range_db: f64,
    pub interpolate: bool,
    /// Fixed cluster count; automatic selection when absent.
    pub k: Option<usize>,
    pub k_max: usize,
    pub restarts: usize,
    pub seed: u64,
    pub tracker: TrackerConfig,
    pub behavior: BehaviorThresholds,
    /// Gate for ground-truth association [s].
    pub truth_gate: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window: Window::BlackmanHarris,
            noise_margin_db: 15.0,
            dynamic_range_db: 60.0,
            interpolate: true,
            k: None,
            k_max: DEFAULT_K_MAX,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            tracker: TrackerConfig::default(),
            behavior: BehaviorThresholds::default(),
            truth_gate: DEFAULT_TRUTH_GATE_S,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.noise_margin_db.is_finite() && self.noise_margin_db >= 0.0) {
            return bad(format!(
                "noise margin must be >= 0 dB, got {}",
                self.noise_margin_db
            ));
        }
        if !(self.dynamic_range_db > 0.0) {
            return bad(format!(
                "dynamic range must be > 0 dB, got {}",
                self.dynamic_range_db
            ));
        }
        if self.k == Some(0) {
            return bad("k must be >= 1".into());
        }
        if self.k_max == 0 || self.restarts == 0 {
            return bad("k_max and restarts must be >= 1".into());
        }
        if !(self.tracker.gate > 0.0) {
            return bad(format!(
                "tracking gate must be > 0, got {}",
                self.tracker.gate
            ));
        }
        if !(self.truth_gate > 0.0) {
            return bad(format!("truth gate must be > 0, got {}", self.truth_gate));
        }
        self.behavior.validate().map_err(Error::Config)
    }
}

/// Per-snapshot intermediate results.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotResult {
    pub pdp: Pdp,
    pub floor: f64,
    pub clusters: Vec<Cluster>,
    pub statuses: Vec<StatusSemantic>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Characterization {
    pub map: SemanticMap,
    pub trajectories: Vec<Trajectory>,
    pub snapshots: Vec<SnapshotResult>,
}

impl Characterization {
    pub fn pdps(&self) -> Vec<Pdp> {
        self.snapshots.iter().map(|s| s.pdp.clone()).collect()
    }
}

/// Processes one snapshot up to its labeled clusters.
pub fn process_snapshot(
    snapshot: &crate::scene::Snapshot,
    index: usize,
    header: &crate::scene::TraceHeader,
    config: &PipelineConfig,
    labels: Option<&LabelMap>,
) -> Result<SnapshotResult> {
    let cir = to_cir_windowed(&snapshot.response, &header.sounding, config.window)?;
    let pdp = to_pdp(&cir);
    let peak = pdp.bins.iter().copied().fold(0.0, f64::max);
    let floor = estimate_noise_floor(&pdp, config.noise_margin_db)?
        .max(peak * 10f64.powf(-config.dynamic_range_db / 10.0));
    let mpcs = extract_mpcs(&pdp, &cir, floor, config.interpolate);

    let mut clusters = if mpcs.is_empty() {
        Vec::new()
    } else if let Some(k) = config.k {
        k_power_means_restarts(&mpcs, k.min(mpcs.len()), config.seed, config.restarts)?.clusters
    } else {
        select_k(
            &mpcs,
            config.k_max,
            config.seed,
            config.restarts,
            pdp.resolution,
        )?
        .clustering
        .clusters
    };
    for (j, c) in clusters.iter_mut().enumerate() {
        c.id = ids::derive("cluster", &[&header.trace_id, &index, &j]);
    }

    let truth = snapshot.truth.as_deref();
    let assoc = match (labels, truth) {
        (Some(map), _) => Association::Labels(map),
        (None, Some(paths)) => Association::Truth {
            paths,
            gate: config.truth_gate,
        },
        (None, None) => Association::Truth {
            paths: &[],
            gate: config.truth_gate,
        },
    };
    let statuses = clusters
        .iter()
        .map(|c| characterize_status(c, assoc))
        .collect();
    Ok(SnapshotResult {
        pdp,
        floor,
        clusters,
        statuses,
    })
}

/// Runs the full pipeline over a trace.
///
/// Labels come from `labels` when given, otherwise from the per-snapshot
/// ground truth carried by the trace; clusters with neither are labeled
/// unknown.
pub fn characterize(
    trace: &crate::scene::SnapshotTrace,
    config: &PipelineConfig,
    rules: &RuleSet,
    labels: Option<&LabelMap>,
) -> Result<Characterization> {
    config.validate()?;
    let header = &trace.header;
    let snapshots: Vec<SnapshotResult> = trace
        .snapshots
        .par_iter()
        .enumerate()
        .map(|(i, s)| process_snapshot(s, i, header, config, labels))
        .collect::<Result<_>>()?;
    log::debug!(
        "{} snapshots, {} clusters",
        snapshots.len(),
        snapshots.iter().map(|s| s.clusters.len()).sum::<usize>()
    );

    let trajectories = track_all(
        config.tracker,
        &header.trace_id,
        snapshots
            .iter()
            .map(|s| (s.pdp.snapshot_time, s.clusters.as_slice())),
    );
    log::debug!("{} trajectories", trajectories.len());

    let meta = MapMeta {
        trace_id: header.trace_id.clone(),
        snapshot_rate: header.snapshot_rate,
        carrier: header.sounding.carrier,
        bandwidth: header.sounding.bandwidth,
        n_tones: header.sounding.n_tones,
    };
    let statuses = snapshots
        .iter()
        .flat_map(|s| s.statuses.iter().cloned())
        .collect();
    let map = build_semantic_map(meta, statuses, &trajectories, rules, &config.behavior)?;
    Ok(Characterization {
        map,
        trajectories,
        snapshots,
    })
}
