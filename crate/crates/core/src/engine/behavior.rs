//! Behavior semantics from trajectory delay drift.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::clustering::least_squares_slope;
use crate::ids;
use crate::semantic::{covering_length, BehaviorKind, BehaviorSemantic, StatusSemantic};
use crate::tracking::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorThresholds {
    /// Slope window length in snapshot intervals.
    pub window: usize,
    /// Drift magnitude below which a trajectory counts as static [ns/s].
    pub epsilon_ns_per_s: f64,
    /// Drift change rate that triggers accelerate/decelerate [ns/s²].
    pub delta_ns_per_s2: f64,
}

impl Default for BehaviorThresholds {
    fn default() -> Self {
        BehaviorThresholds {
            window: 16,
            epsilon_ns_per_s: 0.5,
            delta_ns_per_s2: 1.0,
        }
    }
}

impl BehaviorThresholds {
    pub fn validate(&self) -> Result<(), String> {
        if self.window < 2 {
            return Err(format!("behavior window must be >= 2, got {}", self.window));
        }
        if !(self.epsilon_ns_per_s >= 0.0) || !(self.delta_ns_per_s2 >= 0.0) {
            return Err("behavior thresholds must be non-negative".into());
        }
        Ok(())
    }

    fn kind_of(&self, drift: f64) -> BehaviorKind {
        if drift < -self.epsilon_ns_per_s {
            BehaviorKind::Approach
        } else if drift > self.epsilon_ns_per_s {
            BehaviorKind::MoveAway
        } else {
            BehaviorKind::Static
        }
    }
}

/// Centered least-squares drift [ns/s] at every sample, over `±window/2`
/// samples clipped to the trajectory.
pub fn drift_profile(times: &[f64], delays_ns: &[f64], window: usize) -> Vec<f64> {
    let n = times.len();
    let h = (window / 2).max(1);
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(n);
            let pts: Vec<(f64, f64)> = (lo..hi).map(|j| (times[j], delays_ns[j])).collect();
            least_squares_slope(&pts).unwrap_or(0.0)
        })
        .collect()
}

struct Builder<'a> {
    trajectory: &'a str,
    statuses: &'a [&'a StatusSemantic],
    out: Vec<BehaviorSemantic>,
}

impl Builder<'_> {
    /// Emits a behavior over `[t0, t1]` covering samples `a..=b`.
    fn emit(&mut self, kind: BehaviorKind, t0: f64, t1: f64, a: usize, b: usize) {
        let members = &self.statuses[a..=b];
        let lo = members
            .iter()
            .filter_map(|s| s.min_delay())
            .fold(f64::INFINITY, f64::min);
        let hi = members
            .iter()
            .filter_map(|s| s.max_delay())
            .fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
        let index = self.out.len();
        self.out.push(BehaviorSemantic {
            id: ids::derive("behavior", &[&self.trajectory, &kind, &index]),
            kind,
            start_time: t0,
            duration: covering_length(t0, t1),
            delay_start: lo,
            delay_coverage: covering_length(lo, hi),
            statuses: members.iter().map(|s| s.id.clone()).collect(),
            trajectory: self.trajectory.to_string(),
        });
    }
}

/// Segments a trajectory into behaviors.
///
/// `statuses` are index-aligned with the trajectory samples and
/// `snapshot_interval` [s] sizes the appear/disappear markers. Motion runs
/// (approach, move_away, static) tile the trajectory with boundaries halfway
/// between samples; appear and disappear last one snapshot interval at the
/// ends; accelerate/decelerate annotate drift changes inside motion runs.
pub fn classify_behavior(
    tr: &Trajectory,
    statuses: &[&StatusSemantic],
    th: &BehaviorThresholds,
    snapshot_interval: f64,
) -> Vec<BehaviorSemantic> {
    let n = tr.samples.len().min(statuses.len());
    let mut b = Builder {
        trajectory: &tr.id,
        statuses,
        out: Vec::new(),
    };
    if n == 0 {
        return b.out;
    }
    let dt = snapshot_interval;
    let times: Vec<f64> = tr.samples[..n].iter().map(|s| s.snapshot_time).collect();
    let delays: Vec<f64> = tr.samples[..n]
        .iter()
        .map(|s| s.centroid_delay * 1e9)
        .collect();

    b.emit(BehaviorKind::Appear, times[0], times[0] + dt, 0, 0);

    if n == 1 {
        // Centred on the lone sample so the span is unchanged by time reversal.
        b.emit(
            BehaviorKind::Static,
            times[0] - 0.5 * dt,
            times[0] + 0.5 * dt,
            0,
            0,
        );
    } else {
        let drift = drift_profile(&times, &delays, th.window);
        let kinds: Vec<BehaviorKind> = drift.iter().map(|&d| th.kind_of(d)).collect();
        let boundary = |i: usize| 0.5 * (times[i - 1] + times[i]);
        let mut a = 0;
        while a < n {
            let mut e = a;
            while e + 1 < n && kinds[e + 1] == kinds[a] {
                e += 1;
            }
            let t0 = if a == 0 { times[0] } else { boundary(a) };
            let t1 = if e + 1 == n {
                times[n - 1]
            } else {
                boundary(e + 1)
            };
            b.emit(kinds[a], t0, t1, a, e);
            if kinds[a] != BehaviorKind::Static {
                annotate_drift_changes(&mut b, &times, &delays, a, e, th);
            }
            a = e + 1;
        }
    }

    b.emit(
        BehaviorKind::Disappear,
        times[n - 1] - dt,
        times[n - 1],
        n - 1,
        n - 1,
    );
    b.out
}

/// Splits samples `a..=e` into consecutive blocks of `window` samples and
/// marks pairs of blocks whose |drift| changes faster than δ. Overlapping
/// marks of the same kind merge.
fn annotate_drift_changes(
    b: &mut Builder<'_>,
    times: &[f64],
    delays: &[f64],
    a: usize,
    e: usize,
    th: &BehaviorThresholds,
) {
    let w = th.window;
    let mut blocks = Vec::new();
    let mut s = a;
    while s + w <= e + 1 {
        let pts: Vec<(f64, f64)> = (s..s + w).map(|j| (times[j], delays[j])).collect();
        if let Some(slope) = least_squares_slope(&pts) {
            let centre = 0.5 * (times[s] + times[s + w - 1]);
            blocks.push((s, s + w - 1, centre, slope.abs()));
        }
        s += w;
    }
    let mut pending: Option<(BehaviorKind, usize, usize)> = None;
    for pair in blocks.windows(2) {
        let (s0, _, c0, v0) = pair[0];
        let (_, e1, c1, v1) = pair[1];
        let rate = (v1 - v0) / (c1 - c0);
        let kind = if rate > th.delta_ns_per_s2 {
            Some(BehaviorKind::Accelerate)
        } else if rate < -th.delta_ns_per_s2 {
            Some(BehaviorKind::Decelerate)
        } else {
            None
        };
        pending = match (pending, kind) {
            (Some((pk, ps, pe)), Some(k)) if pk == k && s0 <= pe => Some((pk, ps, e1)),
            (p, k) => {
                if let Some((pk, ps, pe)) = p {
                    b.emit(pk, times[ps], times[pe], ps, pe);
                }
                k.map(|k| (k, s0, e1))
            }
        };
    }
    if let Some((pk, ps, pe)) = pending {
        b.emit(pk, times[ps], times[pe], ps, pe);
    }
}

/// Most frequent status label among a behavior's members; ties resolve to
/// the lexicographically smallest label.
pub fn behavior_label<'a>(
    b: &BehaviorSemantic,
    statuses: &HashMap<&str, &'a StatusSemantic>,
) -> Option<&'a str> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for id in &b.statuses {
        if let Some(s) = statuses.get(id.as_str()) {
            *counts.entry(s.label.as_str()).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|x, y| x.1.cmp(&y.1).then(y.0.cmp(x.0)))
        .map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracking::TrackSample;

    const DT: f64 = 1.0 / 15.625;

    /// Trajectory sampled at the standard rate over `[t0, t1]` with one
    /// status (a single member at the centroid) per sample.
    fn scripted(
        t0: f64,
        t1: f64,
        delay_ns: impl Fn(f64) -> f64,
    ) -> (Trajectory, Vec<StatusSemantic>) {
        let n = ((t1 - t0) / DT).round() as usize + 1;
        let mut samples = Vec::new();
        let mut statuses = Vec::new();
        for i in 0..n {
            let t = t0 + i as f64 * DT;
            let d = delay_ns(t) * 1e-9;
            let id = format!("c{i}");
            samples.push(TrackSample {
                snapshot_time: t,
                cluster: id.clone(),
                centroid_delay: d,
                total_power: 1.0,
            });
            statuses.push(StatusSemantic {
                id: format!("s{i}"),
                label: "x".into(),
                delays: vec![d],
                amplitudes: vec![1.0],
                source_cluster: id,
                snapshot_time: t,
            });
        }
        let tr = Trajectory {
            id: "tr".into(),
            birth_time: t0,
            death_time: samples.last().unwrap().snapshot_time,
            lifetime: samples.last().unwrap().snapshot_time - t0,
            gap_count: 0,
            samples,
        };
        (tr, statuses)
    }

    fn run(tr: &Trajectory, st: &[StatusSemantic]) -> Vec<BehaviorSemantic> {
        let refs: Vec<&StatusSemantic> = st.iter().collect();
        classify_behavior(tr, &refs, &BehaviorThresholds::default(), DT)
    }

    fn of_kind(bs: &[BehaviorSemantic], k: BehaviorKind) -> Vec<&BehaviorSemantic> {
        bs.iter().filter(|b| b.kind == k).collect()
    }

    fn hinge(t: f64, t0: f64, t1: f64, d0: f64, d1: f64) -> f64 {
        let u = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        d0 + u * (d1 - d0)
    }

    #[test]
    fn constant_delay_is_static() {
        let (tr, st) = scripted(0.0, 5.0, |_| 30.0);
        let bs = run(&tr, &st);
        let kinds: Vec<_> = bs.iter().map(|b| b.kind).collect();
        assert_eq!(
            kinds,
            vec![
                BehaviorKind::Appear,
                BehaviorKind::Static,
                BehaviorKind::Disappear
            ]
        );
        assert_eq!(bs[1].start_time, 0.0);
        assert!((bs[1].end_time() - tr.death_time).abs() < 1e-9);
        assert_eq!(bs[0].duration, DT);
    }

    #[test]
    fn turn_in_window() {
        let (tr, st) = scripted(10.0, 35.0, |t| hinge(t, 17.0, 27.0, 40.0, 15.0));
        let bs = run(&tr, &st);
        let ap = of_kind(&bs, BehaviorKind::Approach);
        assert_eq!(ap.len(), 1);
        let a = ap[0];
        assert!((a.start_time - 17.0).abs() <= 0.5, "{}", a.start_time);
        assert!((a.duration - 10.0).abs() <= 1.0, "{}", a.duration);
        assert!((a.delay_start * 1e9 - 15.0).abs() <= 1.0);
        assert!((a.delay_end() * 1e9 - 40.0).abs() <= 1.0);
        assert!(of_kind(&bs, BehaviorKind::MoveAway).is_empty());
    }

    #[test]
    fn turn_out_window() {
        let (tr, st) = scripted(45.0, 62.0, |t| hinge(t, 51.0, 61.0, 15.0, 50.0));
        let bs = run(&tr, &st);
        let mv = of_kind(&bs, BehaviorKind::MoveAway);
        assert_eq!(mv.len(), 1);
        assert!((mv[0].delay_start * 1e9 - 15.0).abs() <= 1.0);
        assert!((mv[0].delay_end() * 1e9 - 50.0).abs() <= 1.0);
    }

    #[test]
    fn motion_runs_tile_the_trajectory() {
        let (tr, st) = scripted(0.0, 30.0, |t| hinge(t, 10.0, 20.0, 80.0, 30.0));
        let bs = run(&tr, &st);
        let mut motion: Vec<_> = bs
            .iter()
            .filter(|b| {
                matches!(
                    b.kind,
                    BehaviorKind::Approach | BehaviorKind::MoveAway | BehaviorKind::Static
                )
            })
            .collect();
        motion.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
        assert_eq!(motion[0].start_time, 0.0);
        for w in motion.windows(2) {
            assert!((w[0].end_time() - w[1].start_time).abs() < 1e-9);
        }
        let n: usize = motion.iter().map(|b| b.statuses.len()).sum();
        assert_eq!(n, st.len());
    }

    #[test]
    fn acceleration_is_annotated() {
        // delay = 100 − t² ns: |drift| grows at 2 ns/s².
        let (tr, st) = scripted(0.0, 6.0, |t| 100.0 - t * t);
        let bs = run(&tr, &st);
        assert!(!of_kind(&bs, BehaviorKind::Accelerate).is_empty());
        assert!(of_kind(&bs, BehaviorKind::Decelerate).is_empty());
        let (tr, st) = scripted(0.0, 6.0, |t| 100.0 - 12.0 * t + t * t);
        let bs = run(&tr, &st);
        assert!(!of_kind(&bs, BehaviorKind::Decelerate).is_empty());
    }

    #[test]
    fn single_sample_trajectory() {
        let (tr, st) = scripted(3.0, 3.0, |_| 10.0);
        let bs = run(&tr, &st);
        assert_eq!(bs.len(), 3);
        assert!(bs.iter().all(|b| b.duration > 0.0));
        let stat = of_kind(&bs, BehaviorKind::Static)[0];
        assert!((stat.start_time + 0.5 * stat.duration - 3.0).abs() < 1e-12);
    }

    #[test]
    fn majority_label() {
        let (tr, mut st) = scripted(0.0, 1.0, |_| 10.0);
        st[0].label = "y".into();
        let bs = run(&tr, &st);
        let index: HashMap<&str, &StatusSemantic> = st.iter().map(|s| (s.id.as_str(), s)).collect();
        let stat = of_kind(&bs, BehaviorKind::Static)[0];
        assert_eq!(behavior_label(stat, &index), Some("x"));
        assert_eq!(behavior_label(&bs[0], &index), Some("y"));
    }
}
