//! Geometric scenes of labeled scatterers and the multi-tone sounding
//! simulator that turns them into time-varying frequency responses.

mod synth;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use synth::{run_scene, synthesize_snapshot};

use crate::dsp::FrequencyResponse;

pub const DEFAULT_CARRIER_HZ: f64 = 28e9;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 1e9;
pub const DEFAULT_TONES: usize = 1001;
/// 250 snapshots in 16 s.
pub const DEFAULT_SNAPSHOT_RATE_HZ: f64 = 15.625;
pub const DEFAULT_DURATION_S: f64 = 60.0;
/// 20 km/h.
pub const DEFAULT_SPEED_MPS: f64 = 20.0 / 3.6;
pub const DEFAULT_NOISE_FLOOR_DB: f64 = -80.0;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("time {t} s outside scene [0, {duration}] s")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error(
        "scatterer `{label}` at delay {delay:.3e} s exceeds the unambiguous range {max:.3e} s"
    )]
    AmbiguousDelay { label: String, delay: f64, max: f64 },
    #[error("cannot parse scene: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read scene {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Multi-tone sounding parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoundingConfig {
    /// Carrier frequency [Hz].
    #[serde(default = "default_carrier")]
    pub carrier: f64,
    /// Swept bandwidth [Hz].
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    #[serde(default = "default_tones")]
    pub n_tones: usize,
}

fn default_carrier() -> f64 {
    DEFAULT_CARRIER_HZ
}
fn default_bandwidth() -> f64 {
    DEFAULT_BANDWIDTH_HZ
}
fn default_tones() -> usize {
    DEFAULT_TONES
}

impl Default for SoundingConfig {
    fn default() -> Self {
        SoundingConfig {
            carrier: DEFAULT_CARRIER_HZ,
            bandwidth: DEFAULT_BANDWIDTH_HZ,
            n_tones: DEFAULT_TONES,
        }
    }
}

impl SoundingConfig {
    /// Tone spacing Δf = B/(N−1).
    pub fn tone_spacing(&self) -> f64 {
        self.bandwidth / (self.n_tones as f64 - 1.0)
    }

    /// Largest delay representable without aliasing, 1/Δf.
    pub fn max_unambiguous_delay(&self) -> f64 {
        1.0 / self.tone_spacing()
    }

    /// Frequency of tone `k`; tones are centred on the carrier.
    pub fn tone_frequency(&self, k: usize) -> f64 {
        self.carrier - self.bandwidth / 2.0 + k as f64 * self.tone_spacing()
    }

    /// Delay-grid spacing of the inverse transform, 1/(N·Δf).
    pub fn delay_resolution(&self) -> f64 {
        1.0 / (self.n_tones as f64 * self.tone_spacing())
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.n_tones < 2 {
            return Err(SceneError::Invalid("n_tones must be >= 2".into()));
        }
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(SceneError::Invalid("bandwidth must be > 0".into()));
        }
        if !(self.carrier >= 0.0) || !self.carrier.is_finite() {
            return Err(SceneError::Invalid("carrier must be >= 0".into()));
        }
        Ok(())
    }
}

/// Piecewise-linear plan-view track: waypoints `[t, x, y]` with strictly
/// increasing times. Positions are held constant outside the waypoint span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Track {
    pub waypoints: Vec<[f64; 3]>,
}

impl Track {
    pub fn fixed(x: f64, y: f64) -> Self {
        Track {
            waypoints: vec![[0.0, x, y]],
        }
    }

    pub fn new(waypoints: Vec<[f64; 3]>) -> Self {
        Track { waypoints }
    }

    pub fn position(&self, t: f64) -> [f64; 2] {
        let w = &self.waypoints;
        let first = w[0];
        if t <= first[0] || w.len() == 1 {
            return [first[1], first[2]];
        }
        let last = w[w.len() - 1];
        if t >= last[0] {
            return [last[1], last[2]];
        }
        // first waypoint with time > t
        let i = w.partition_point(|p| p[0] <= t);
        let (a, b) = (w[i - 1], w[i]);
        let u = (t - a[0]) / (b[0] - a[0]);
        [a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2])]
    }

    fn validate(&self, what: &str, duration: f64) -> Result<(), SceneError> {
        let w = &self.waypoints;
        if w.is_empty() {
            return Err(SceneError::Invalid(format!("{what}: empty track")));
        }
        if w.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SceneError::Invalid(format!("{what}: non-finite waypoint")));
        }
        if w.windows(2).any(|p| p[1][0] <= p[0][0]) {
            return Err(SceneError::Invalid(format!(
                "{what}: waypoint times must be strictly increasing"
            )));
        }
        if w.len() > 1 && (w[0][0] > 0.0 || w[w.len() - 1][0] < duration) {
            return Err(SceneError::Invalid(format!(
                "{what}: track must span [0, {duration}] s"
            )));
        }
        Ok(())
    }
}

/// A labeled reflector. `depth_points > 1` spreads the reflector over several
/// point returns spaced `depth_spacing` metres apart along the line of sight,
/// all with the scatterer's amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub label: String,
    /// Reflectivity Γ ∈ (0, 1].
    pub reflectivity: f64,
    pub track: Track,
    #[serde(default = "one")]
    pub depth_points: usize,
    /// [m]
    #[serde(default)]
    pub depth_spacing: f64,
}

fn one() -> usize {
    1
}

impl Scatterer {
    pub fn point(label: impl Into<String>, reflectivity: f64, track: Track) -> Self {
        Scatterer {
            label: label.into(),
            reflectivity,
            track,
            depth_points: 1,
            depth_spacing: 0.0,
        }
    }

    pub fn with_depth(mut self, points: usize, spacing: f64) -> Self {
        self.depth_points = points;
        self.depth_spacing = spacing;
        self
    }

    /// Radial offsets [m] of the point returns relative to the track position.
    pub fn depth_offsets(&self) -> impl Iterator<Item = f64> + '_ {
        let mid = (self.depth_points as f64 - 1.0) / 2.0;
        (0..self.depth_points).map(move |j| (j as f64 - mid) * self.depth_spacing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default = "default_scene_id")]
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub scatterers: Vec<Scatterer>,
    /// Co-located TX/RX track; `None` drives along +x at 20 km/h from the
    /// origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform: Option<Track>,
    #[serde(default)]
    pub sounding: SoundingConfig,
    /// [s]
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// [Hz]
    #[serde(default = "default_rate")]
    pub snapshot_rate: f64,
    /// Per-tone complex noise power [dB re 1]; `None` disables noise.
    #[serde(default = "default_noise")]
    pub noise_floor_db: Option<f64>,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_scene_id() -> String {
    "scene".into()
}
fn default_duration() -> f64 {
    DEFAULT_DURATION_S
}
fn default_rate() -> f64 {
    DEFAULT_SNAPSHOT_RATE_HZ
}
fn default_noise() -> Option<f64> {
    Some(DEFAULT_NOISE_FLOOR_DB)
}

impl Scene {
    /// A scene with default sounding, timing and platform and no noise.
    pub fn new(id: impl Into<String>, scatterers: Vec<Scatterer>) -> Self {
        Scene {
            id: id.into(),
            description: None,
            scatterers,
            platform: None,
            sounding: SoundingConfig::default(),
            duration: DEFAULT_DURATION_S,
            snapshot_rate: DEFAULT_SNAPSHOT_RATE_HZ,
            noise_floor_db: None,
            rng_seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn platform_position(&self, t: f64) -> [f64; 2] {
        match &self.platform {
            Some(track) => track.position(t),
            None => [DEFAULT_SPEED_MPS * t, 0.0],
        }
    }

    /// Number of snapshots emitted by [`run_scene`]: ⌊duration·rate⌋ + 1.
    pub fn snapshot_count(&self) -> usize {
        (self.duration * self.snapshot_rate + 1e-9).floor() as usize + 1
    }

    pub fn snapshot_time(&self, index: usize) -> f64 {
        index as f64 / self.snapshot_rate
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_floor_db.map_or(0.0, |db| 10f64.powf(db / 10.0))
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.sounding.validate()?;
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(SceneError::Invalid("duration must be >= 0".into()));
        }
        if !(self.snapshot_rate > 0.0) || !self.snapshot_rate.is_finite() {
            return Err(SceneError::Invalid("snapshot_rate must be > 0".into()));
        }
        if let Some(db) = self.noise_floor_db {
            if !db.is_finite() {
                return Err(SceneError::Invalid("noise_floor_db must be finite".into()));
            }
        }
        if let Some(track) = &self.platform {
            track.validate("platform", self.duration)?;
        }
        for s in &self.scatterers {
            if !(s.reflectivity > 0.0 && s.reflectivity <= 1.0) {
                return Err(SceneError::Invalid(format!(
                    "scatterer `{}`: reflectivity must lie in (0, 1]",
                    s.label
                )));
            }
            if s.label.is_empty() {
                return Err(SceneError::Invalid("scatterer label is empty".into()));
            }
            if s.depth_points == 0 || !(s.depth_spacing >= 0.0) {
                return Err(SceneError::Invalid(format!(
                    "scatterer `{}`: depth_points must be >= 1 and depth_spacing >= 0",
                    s.label
                )));
            }
            s.track
                .validate(&format!("scatterer `{}`", s.label), self.duration)?;
        }
        Ok(())
    }
}

/// Ground truth of one scatterer at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTruth {
    pub label: String,
    /// Round-trip delay of the scatterer's track position [s].
    pub delay: f64,
    /// Amplitude of each of its point returns [linear].
    pub amplitude: f64,
}

pub type GroundTruth = Vec<PathTruth>;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub response: FrequencyResponse,
    pub truth: Option<GroundTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub trace_id: String,
    pub snapshot_rate: f64,
    pub sounding: SoundingConfig,
}

/// Ordered sequence of snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotTrace {
    pub header: TraceHeader,
    pub snapshots: Vec<Snapshot>,
}

impl SnapshotTrace {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// The first `n` snapshots.
    pub fn truncated(mut self, n: usize) -> Self {
        self.snapshots.truncate(n);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn track_interpolates_and_clamps() {
        let tr = Track::new(vec![[0.0, 0.0, 0.0], [10.0, 10.0, -5.0]]);
        assert_eq!(tr.position(5.0), [5.0, -2.5]);
        assert_eq!(tr.position(-1.0), [0.0, 0.0]);
        assert_eq!(tr.position(11.0), [10.0, -5.0]);
        assert_eq!(Track::fixed(1.0, 2.0).position(100.0), [1.0, 2.0]);
    }

    #[test]
    fn defaults() {
        let s = SoundingConfig::default();
        assert_eq!(s.tone_spacing(), 1e6);
        assert!((s.max_unambiguous_delay() - 1e-6).abs() < 1e-18);
        let scene = Scene::from_json(
            r#"{"scatterers":[{"label":"tree","reflectivity":0.5,"track":[[0,3,4]]}]}"#,
        )
        .unwrap();
        assert_eq!(scene.snapshot_count(), 938);
        assert_eq!(scene.platform_position(3.6), [20.0, 0.0]);
        assert_eq!(scene.noise_floor_db, Some(DEFAULT_NOISE_FLOOR_DB));
    }

    #[test]
    fn snapshot_250_is_16_seconds() {
        let scene = Scene::new("x", vec![]);
        assert_eq!(scene.snapshot_time(250), 16.0);
    }

    #[test]
    fn rejects_bad_reflectivity_and_tracks() {
        let mut scene = Scene::new(
            "x",
            vec![Scatterer::point("a", 1.5, Track::fixed(1.0, 0.0))],
        );
        assert!(scene.validate().is_err());
        scene.scatterers[0].reflectivity = 1.0;
        assert!(scene.validate().is_ok());
        scene.scatterers[0].track = Track::new(vec![[0.0, 1.0, 0.0], [30.0, 2.0, 0.0]]);
        assert!(scene.validate().is_err(), "track shorter than the scene");
        scene.scatterers[0].track = Track::new(vec![[0.0, 1.0, 0.0], [0.0, 2.0, 0.0]]);
        assert!(scene.validate().is_err(), "non-increasing times");
    }
}
