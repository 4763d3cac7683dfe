//! Cluster tracking across snapshots.

use serde::{Deserialize, Serialize};

use crate::clustering::{least_squares_slope, Cluster};
use crate::ids;

pub const DEFAULT_GATE_S: f64 = 5e-9;
pub const DEFAULT_MAX_GAP: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub snapshot_time: f64,
    pub cluster: String,
    pub centroid_delay: f64,
    pub total_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub samples: Vec<TrackSample>,
    pub birth_time: f64,
    pub death_time: f64,
    pub lifetime: f64,
    /// Number of interruptions (runs of missed snapshots) inside the track.
    pub gap_count: usize,
}

impl Trajectory {
    fn born(id: String, sample: TrackSample) -> Self {
        let t = sample.snapshot_time;
        Trajectory {
            id,
            samples: vec![sample],
            birth_time: t,
            death_time: t,
            lifetime: 0.0,
            gap_count: 0,
        }
    }

    fn extend(&mut self, sample: TrackSample, after_gap: bool) {
        self.death_time = sample.snapshot_time;
        self.lifetime = self.death_time - self.birth_time;
        if after_gap {
            self.gap_count += 1;
        }
        self.samples.push(sample);
    }

    pub fn last_delay(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.centroid_delay)
    }
}

fn sample_of(time: f64, c: &Cluster) -> TrackSample {
    TrackSample {
        snapshot_time: time,
        cluster: c.id.clone(),
        centroid_delay: c.centroid_delay,
        total_power: c.total_power,
    }
}

/// Greedy nearest-neighbour association on centroid delay.
///
/// Candidate pairs within `gate` are taken in ascending distance order (ties
/// by trajectory, then cluster index); each side is used at most once.
/// Returns `(trajectory index, cluster index)` pairs.
pub fn associate(prev: &[Trajectory], current: &[Cluster], gate: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, tr) in prev.iter().enumerate() {
        let last = tr.last_delay();
        for (j, c) in current.iter().enumerate() {
            let d = (c.centroid_delay - last).abs();
            if d <= gate {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_t = vec![false; prev.len()];
    let mut used_c = vec![false; current.len()];
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !used_t[i] && !used_c[j] {
            used_t[i] = true;
            used_c[j] = true;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Association gate on centroid delay [s].
    pub gate: f64,
    /// Snapshots a trajectory may go unmatched before it is closed.
    pub max_gap: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            gate: DEFAULT_GATE_S,
            max_gap: DEFAULT_MAX_GAP,
        }
    }
}

/// Stateful multi-snapshot tracker.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    scope: String,
    active: Vec<Trajectory>,
    missed: Vec<usize>,
    closed: Vec<Trajectory>,
    born: usize,
}

impl Tracker {
    /// `scope` seeds the trajectory identifiers (e.g. the trace id).
    pub fn new(config: TrackerConfig, scope: impl Into<String>) -> Self {
        Tracker {
            config,
            scope: scope.into(),
            active: Vec::new(),
            missed: Vec::new(),
            closed: Vec::new(),
            born: 0,
        }
    }

    pub fn active(&self) -> &[Trajectory] {
        &self.active
    }

    pub fn closed(&self) -> &[Trajectory] {
        &self.closed
    }

    /// Processes the clusters of one snapshot.
    pub fn step(&mut self, snapshot_time: f64, clusters: &[Cluster]) {
        let matches = associate(&self.active, clusters, self.config.gate);
        let mut matched_t = vec![false; self.active.len()];
        let mut matched_c = vec![false; clusters.len()];
        for &(i, j) in &matches {
            matched_t[i] = true;
            matched_c[j] = true;
            let after_gap = self.missed[i] > 0;
            self.active[i].extend(sample_of(snapshot_time, &clusters[j]), after_gap);
            self.missed[i] = 0;
        }

        let mut keep_t = Vec::with_capacity(self.active.len());
        let mut keep_m = Vec::with_capacity(self.active.len());
        for ((tr, missed), matched) in self
            .active
            .drain(..)
            .zip(self.missed.drain(..))
            .zip(matched_t)
        {
            let missed = if matched { 0 } else { missed + 1 };
            if missed > self.config.max_gap {
                self.closed.push(tr);
            } else {
                keep_t.push(tr);
                keep_m.push(missed);
            }
        }
        self.active = keep_t;
        self.missed = keep_m;

        for (j, c) in clusters.iter().enumerate() {
            if !matched_c[j] {
                let id = ids::derive("trajectory", &[&self.scope, &self.born]);
                self.born += 1;
                self.active
                    .push(Trajectory::born(id, sample_of(snapshot_time, c)));
                self.missed.push(0);
            }
        }
    }

    /// Closes every open trajectory and returns all of them ordered by birth.
    pub fn finish(mut self) -> Vec<Trajectory> {
        self.closed.append(&mut self.active);
        let mut all = self.closed;
        all.sort_by(|a, b| {
            a.birth_time
                .total_cmp(&b.birth_time)
                .then(a.last_delay().total_cmp(&b.last_delay()))
                .then_with(|| a.id.cmp(&b.id))
        });
        all
    }
}

/// Runs a tracker over per-snapshot cluster lists.
pub fn track_all<'a>(
    config: TrackerConfig,
    scope: &str,
    snapshots: impl IntoIterator<Item = (f64, &'a [Cluster])>,
) -> Vec<Trajectory> {
    let mut t = Tracker::new(config, scope);
    for (time, clusters) in snapshots {
        t.step(time, clusters);
    }
    t.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    /// [s]
    pub lifetime: f64,
    /// Least-squares slope of centroid delay [ns/s].
    pub drift_ns_per_s: Option<f64>,
    /// Least-squares slope of total power [dB/s].
    pub fading_db_per_s: Option<f64>,
}

pub fn trajectory_stats(tr: &Trajectory) -> StatsRecord {
    let delay: Vec<(f64, f64)> = tr
        .samples
        .iter()
        .map(|s| (s.snapshot_time, s.centroid_delay * 1e9))
        .collect();
    let power: Vec<(f64, f64)> = tr
        .samples
        .iter()
        .filter(|s| s.total_power > 0.0)
        .map(|s| (s.snapshot_time, 10.0 * s.total_power.log10()))
        .collect();
    StatsRecord {
        lifetime: tr.lifetime,
        drift_ns_per_s: least_squares_slope(&delay),
        fading_db_per_s: least_squares_slope(&power),
    }
}
