//! Independent oracles and generators shared by the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chansem::clustering::Cluster;
use chansem::dsp::{FrequencyResponse, Mpc};
use chansem::semantic::{
    BehaviorKind, BehaviorSemantic, EventSemantic, MapMeta, Record, RecordType, SemanticMap,
    SemanticQuery, StatusSemantic,
};
use chansem::tracking::{track_all, trajectory_stats, TrackerConfig, Trajectory};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_response(rng: &mut ChaCha8Rng, n: usize) -> FrequencyResponse {
    FrequencyResponse {
        snapshot_time: rng.gen_range(0.0..60.0),
        samples: (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect(),
    }
}

/// Direct O(N²) unitary inverse DFT.
pub fn direct_idft(samples: &[Complex64]) -> Vec<Complex64> {
    let n = samples.len();
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|m| {
            samples
                .iter()
                .enumerate()
                .map(|(k, h)| {
                    let phase = 2.0 * std::f64::consts::PI * ((k * m) % n) as f64 / n as f64;
                    h * Complex64::from_polar(1.0, phase)
                })
                .sum::<Complex64>()
                * scale
        })
        .collect()
}

/// Tone samples of on-grid paths `(bin, amplitude)`: `Σ a·exp(−j2π k m/N)`.
pub fn on_grid_response(n: usize, paths: &[(usize, f64)]) -> FrequencyResponse {
    let samples = (0..n)
        .map(|k| {
            paths
                .iter()
                .map(|&(m, a)| {
                    let phase = -2.0 * std::f64::consts::PI * ((k * m) % n) as f64 / n as f64;
                    Complex64::from_polar(a, phase)
                })
                .sum()
        })
        .collect();
    FrequencyResponse {
        snapshot_time: 0.0,
        samples,
    }
}

pub fn energy(v: &[Complex64]) -> f64 {
    v.iter().map(|h| h.norm_sqr()).sum()
}

/// Random MPC set in delay [s] with positive powers.
pub fn random_mpcs(rng: &mut ChaCha8Rng, n: usize) -> Vec<Mpc> {
    (0..n)
        .map(|_| {
            Mpc::with_power(
                rng.gen_range(0.0..200.0) * 1e-9,
                rng.gen_range(0.01..10.0),
                0.0,
            )
        })
        .collect()
}

fn partition_cost(mpcs: &[Mpc], labels: &[usize], k: usize) -> f64 {
    let mut num = vec![0.0; k];
    let mut den = vec![0.0; k];
    for (m, &l) in mpcs.iter().zip(labels) {
        num[l] += m.power * m.delay;
        den[l] += m.power;
    }
    mpcs.iter()
        .zip(labels)
        .map(|(m, &l)| m.power * (m.delay - num[l] / den[l]).powi(2))
        .sum()
}

/// Minimum power-weighted within-cluster scatter over every partition of
/// `mpcs` into exactly `k` non-empty groups (restricted growth strings).
pub fn exhaustive_min_objective(mpcs: &[Mpc], k: usize) -> f64 {
    fn rec(mpcs: &[Mpc], k: usize, labels: &mut Vec<usize>, used: usize, best: &mut f64) {
        let i = labels.len();
        let remaining = mpcs.len() - i;
        if used + remaining < k {
            return;
        }
        if i == mpcs.len() {
            let j = partition_cost(mpcs, labels, k);
            if j < *best {
                *best = j;
            }
            return;
        }
        for l in 0..(used + 1).min(k) {
            labels.push(l);
            rec(mpcs, k, labels, used.max(l + 1), best);
            labels.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(mpcs, k, &mut Vec::with_capacity(mpcs.len()), 0, &mut best);
    best
}

/// Optimal assignment by enumeration: most pairs within the gate, then the
/// smallest total |Δ|. Returns sorted `(row, column)` pairs.
pub fn brute_force_assignment(rows: &[f64], cols: &[f64], gate: f64) -> Vec<(usize, usize)> {
    fn rec(
        rows: &[f64],
        cols: &[f64],
        gate: f64,
        i: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        cost: f64,
        best: &mut (usize, f64, Vec<(usize, usize)>),
    ) {
        if i == rows.len() {
            if cur.len() > best.0 || (cur.len() == best.0 && cost < best.1) {
                *best = (cur.len(), cost, cur.clone());
            }
            return;
        }
        rec(rows, cols, gate, i + 1, used, cur, cost, best);
        for j in 0..cols.len() {
            let d = (rows[i] - cols[j]).abs();
            if !used[j] && d <= gate {
                used[j] = true;
                cur.push((i, j));
                rec(rows, cols, gate, i + 1, used, cur, cost + d, best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (0, f64::INFINITY, Vec::new());
    rec(
        rows,
        cols,
        gate,
        0,
        &mut vec![false; cols.len()],
        &mut Vec::new(),
        0.0,
        &mut best,
    );
    let mut out = best.2;
    out.sort_unstable();
    out
}

/// `count` values in `[lo, hi)` pairwise at least `sep` apart.
pub fn separated(rng: &mut ChaCha8Rng, count: usize, lo: f64, hi: f64, sep: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(count);
    while out.len() < count {
        let x = rng.gen_range(lo..hi);
        if out.iter().all(|y| (x - y).abs() >= sep) {
            out.push(x);
        }
    }
    out
}

pub fn point_cluster(id: &str, t: f64, delay: f64, power: f64) -> Cluster {
    Cluster::from_members(id, t, vec![Mpc::with_power(delay, power, t)])
}

/// Per-snapshot clusters of a few non-crossing linear delay tracks with
/// random dropouts. Returns `(time, clusters)` per snapshot.
pub fn scripted_cluster_scene(rng: &mut ChaCha8Rng, gate: f64) -> Vec<(f64, Vec<Cluster>)> {
    let tracks = rng.gen_range(1..=4);
    let snapshots = rng.gen_range(5..40);
    let dt = 1.0 / 15.625;
    let starts = separated(rng, tracks, 10e-9, 300e-9, 6.0 * gate);
    let drifts: Vec<f64> = (0..tracks)
        .map(|_| rng.gen_range(-5.0..5.0) * 1e-9)
        .collect();
    let spans: Vec<(usize, usize)> = (0..tracks)
        .map(|_| {
            let a = rng.gen_range(0..snapshots);
            (a, rng.gen_range(a..snapshots))
        })
        .collect();
    (0..snapshots)
        .map(|i| {
            let t = i as f64 * dt;
            let mut clusters = Vec::new();
            for j in 0..tracks {
                let (a, b) = spans[j];
                if i < a || i > b || rng.gen_bool(0.1) {
                    continue;
                }
                let delay = starts[j] + drifts[j] * t;
                clusters.push(point_cluster(
                    &format!("c{i}-{j}"),
                    t,
                    delay,
                    rng.gen_range(0.1..1.0),
                ));
            }
            (t, clusters)
        })
        .collect()
}

const LABELS: [&str; 4] = ["trees", "vehicles", "ground", "buildings"];

/// A structurally valid random semantic map.
pub fn random_map(rng: &mut ChaCha8Rng) -> SemanticMap {
    let mut map = SemanticMap {
        meta: MapMeta {
            trace_id: format!("trace-{}", rng.gen::<u32>()),
            snapshot_rate: 15.625,
            carrier: 28e9,
            bandwidth: 1e9,
            n_tones: 1001,
        },
        ..SemanticMap::default()
    };
    let n_status = rng.gen_range(0..25);
    for i in 0..n_status {
        let m = rng.gen_range(1..4);
        let mut delays: Vec<f64> = (0..m)
            .map(|_| rng.gen_range(0..400) as f64 * 1e-9)
            .collect();
        delays.sort_by(f64::total_cmp);
        delays.dedup();
        let amplitudes = delays.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
        map.statuses.push(StatusSemantic {
            id: format!("s{i}"),
            label: LABELS[rng.gen_range(0..LABELS.len())].into(),
            delays,
            amplitudes,
            source_cluster: format!("c{i}"),
            snapshot_time: rng.gen_range(0..100) as f64 * 0.1,
        });
    }
    if !map.statuses.is_empty() {
        for i in 0..rng.gen_range(0..8) {
            let members: Vec<&StatusSemantic> = (0..rng.gen_range(1..4))
                .map(|_| &map.statuses[rng.gen_range(0..map.statuses.len())])
                .collect();
            let t0 = members
                .iter()
                .map(|s| s.snapshot_time)
                .fold(f64::INFINITY, f64::min);
            let t1 = members
                .iter()
                .map(|s| s.snapshot_time)
                .fold(f64::NEG_INFINITY, f64::max);
            let d0 = members
                .iter()
                .map(|s| s.delays[0])
                .fold(f64::INFINITY, f64::min);
            let d1 = members
                .iter()
                .map(|s| *s.delays.last().unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            let mut ids: Vec<String> = members.iter().map(|s| s.id.clone()).collect();
            ids.sort();
            ids.dedup();
            map.behaviors.push(BehaviorSemantic {
                id: format!("b{i}"),
                kind: BehaviorKind::ALL[rng.gen_range(0..BehaviorKind::ALL.len())],
                start_time: t0,
                duration: t1 - t0 + rng.gen_range(0.05..2.0),
                delay_start: d0,
                delay_coverage: covering(d0, d1),
                statuses: ids,
                trajectory: format!("tr{}", rng.gen_range(0..3)),
            });
        }
    }
    if !map.behaviors.is_empty() {
        for i in 0..rng.gen_range(0..5) {
            let mut ids: Vec<String> = (0..rng.gen_range(1..4))
                .map(|_| {
                    map.behaviors[rng.gen_range(0..map.behaviors.len())]
                        .id
                        .clone()
                })
                .collect();
            ids.sort();
            ids.dedup();
            let (s, e) = hull(ids.iter().map(|id| {
                let b = map.behavior(id).unwrap();
                (b.start_time, b.end_time())
            }));
            map.events.push(EventSemantic {
                id: format!("e0-{i}"),
                label: LABELS[rng.gen_range(0..LABELS.len())].into(),
                level: 0,
                start_time: s,
                duration: covering(s, e),
                behaviors: ids,
                sub_events: Vec::new(),
            });
        }
    }
    let level0 = map.events.len();
    if level0 > 0 {
        for i in 0..rng.gen_range(0..3) {
            let mut ids: Vec<String> = (0..rng.gen_range(1..3))
                .map(|_| map.events[rng.gen_range(0..level0)].id.clone())
                .collect();
            ids.sort();
            ids.dedup();
            let (s, e) = hull(ids.iter().map(|id| {
                let ev = map.event(id).unwrap();
                (ev.start_time, ev.end_time())
            }));
            map.events.push(EventSemantic {
                id: format!("e1-{i}"),
                label: "driving".into(),
                level: 1,
                start_time: s,
                duration: covering(s, e),
                behaviors: Vec::new(),
                sub_events: ids,
            });
        }
    }
    map
}

/// Smallest length `l` with `a + l >= b` in floating point.
fn covering(a: f64, b: f64) -> f64 {
    let mut l = b - a;
    while a + l < b {
        l = f64::from_bits(l.to_bits() + 1);
    }
    l
}

fn hull(spans: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    spans.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (s, e)| {
        (a.min(s), b.max(e))
    })
}

pub fn random_query(rng: &mut ChaCha8Rng, map: &SemanticMap, depth: u32) -> SemanticQuery {
    let ids: Vec<String> = map.records().map(|r| r.id().to_string()).collect();
    let pick = rng.gen_range(0..if depth == 0 { 7 } else { 8 });
    match pick {
        0 => {
            let a = rng.gen_range(0.0..12.0);
            SemanticQuery::TimeInterval {
                start: a,
                end: a + rng.gen_range(0.0..4.0),
            }
        }
        1 => SemanticQuery::Label(
            if rng.gen_bool(0.9) {
                LABELS[rng.gen_range(0..LABELS.len())]
            } else {
                "driving"
            }
            .into(),
        ),
        2 => SemanticQuery::Kind(BehaviorKind::ALL[rng.gen_range(0..BehaviorKind::ALL.len())]),
        3 => {
            let a = rng.gen_range(0.0..400e-9);
            SemanticQuery::DelayWindow {
                min: a,
                max: a + rng.gen_range(0.0..100e-9),
            }
        }
        4 => SemanticQuery::RecordType(
            [RecordType::Status, RecordType::Behavior, RecordType::Event][rng.gen_range(0..3)],
        ),
        5 | 6 if !ids.is_empty() => {
            let id = ids[rng.gen_range(0..ids.len())].clone();
            if pick == 5 {
                SemanticQuery::AncestorsOf(id)
            } else {
                SemanticQuery::DescendantsOf(id)
            }
        }
        5 | 6 => SemanticQuery::RecordType(RecordType::Event),
        _ => SemanticQuery::And(
            (0..rng.gen_range(0..4))
                .map(|_| random_query(rng, map, depth - 1))
                .collect(),
        ),
    }
}

/// Direct references of a record to the records it contains.
fn children(r: &Record) -> Vec<String> {
    match r {
        Record::Status(_) => Vec::new(),
        Record::Behavior(b) => b.statuses.clone(),
        Record::Event(e) => e.behaviors.iter().chain(&e.sub_events).cloned().collect(),
    }
}

/// Ids reachable from `id` by repeatedly following containment, downward or
/// upward, by fixed-point iteration over the whole record list.
fn reachable(records: &[Record], id: &str, downward: bool) -> BTreeSet<String> {
    let edges: Vec<(String, String)> = records
        .iter()
        .flat_map(|r| {
            children(r)
                .into_iter()
                .map(move |c| (r.id().to_string(), c))
        })
        .collect();
    let mut set: BTreeSet<String> = BTreeSet::new();
    let mut frontier: BTreeSet<String> = [id.to_string()].into();
    loop {
        let mut next = BTreeSet::new();
        for (parent, child) in &edges {
            let (from, to) = if downward {
                (parent, child)
            } else {
                (child, parent)
            };
            if frontier.contains(from) && !set.contains(to) {
                next.insert(to.clone());
            }
        }
        if next.is_empty() {
            break;
        }
        set.extend(next.iter().cloned());
        frontier = next;
    }
    let present: BTreeSet<&str> = records.iter().map(|r| r.id()).collect();
    set.retain(|i| present.contains(i.as_str()));
    set
}

/// Linear-scan evaluation of a query; `None` for an unknown id in a
/// structural term.
pub fn scan(map: &SemanticMap, q: &SemanticQuery) -> Option<Vec<String>> {
    let records: Vec<Record> = map.records().collect();
    let mut keep = BTreeMap::new();
    for r in &records {
        keep.insert(r.id().to_string(), scan_match(&records, r, q)?);
    }
    let mut hits: Vec<&Record> = records.iter().filter(|r| keep[r.id()]).collect();
    hits.sort_by(|a, b| {
        a.start_time()
            .total_cmp(&b.start_time())
            .then_with(|| a.id().cmp(b.id()))
    });
    Some(hits.into_iter().map(|r| r.id().to_string()).collect())
}

fn scan_match(records: &[Record], r: &Record, q: &SemanticQuery) -> Option<bool> {
    let known = |id: &str| records.iter().any(|x| x.id() == id);
    Some(match q {
        SemanticQuery::TimeInterval { start, end } => {
            let (s, e) = r.span();
            s <= *end && e >= *start
        }
        SemanticQuery::Label(l) => match r {
            Record::Status(s) => &s.label == l,
            Record::Event(e) => &e.label == l,
            Record::Behavior(_) => false,
        },
        SemanticQuery::Kind(k) => matches!(r, Record::Behavior(b) if b.kind == *k),
        SemanticQuery::DelayWindow { min, max } => match r {
            Record::Status(s) => {
                !s.delays.is_empty() && s.delays[0] <= *max && *s.delays.last().unwrap() >= *min
            }
            Record::Behavior(b) => {
                b.delay_start <= *max && b.delay_start + b.delay_coverage >= *min
            }
            Record::Event(_) => false,
        },
        SemanticQuery::RecordType(t) => r.record_type() == *t,
        SemanticQuery::AncestorsOf(id) => {
            if !known(id) {
                return None;
            }
            reachable(records, id, false).contains(r.id())
        }
        SemanticQuery::DescendantsOf(id) => {
            if !known(id) {
                return None;
            }
            reachable(records, id, true).contains(r.id())
        }
        SemanticQuery::And(qs) => {
            let mut all = true;
            for q in qs {
                all &= scan_match(records, r, q)?;
            }
            all
        }
    })
}

pub fn run_tracker(scene: &[(f64, Vec<Cluster>)], config: TrackerConfig) -> Vec<Trajectory> {
    track_all(config, "p", scene.iter().map(|(t, c)| (*t, c.as_slice())))
}

pub fn reversed(scene: &[(f64, Vec<Cluster>)]) -> Vec<(f64, Vec<Cluster>)> {
    let end = scene.last().map_or(0.0, |s| s.0);
    scene
        .iter()
        .rev()
        .map(|(t, cs)| (end - t, cs.clone()))
        .collect()
}

fn memberships(trs: &[Trajectory]) -> BTreeSet<BTreeSet<String>> {
    trs.iter()
        .map(|t| t.samples.iter().map(|s| s.cluster.clone()).collect())
        .collect()
}

pub fn check_conservation(scene: &[(f64, Vec<Cluster>)], config: TrackerConfig) {
    let trs = run_tracker(scene, config);
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &trs {
        for s in &t.samples {
            *seen.entry(s.cluster.as_str()).or_default() += 1;
        }
        assert!(t
            .samples
            .windows(2)
            .all(|w| w[0].snapshot_time < w[1].snapshot_time));
    }
    for (_, cs) in scene {
        for c in cs {
            assert_eq!(seen.get(c.id.as_str()), Some(&1), "cluster {}", c.id);
        }
    }
    assert_eq!(seen.len(), scene.iter().map(|s| s.1.len()).sum::<usize>());
}

pub fn check_gate_monotonicity(scene: &[(f64, Vec<Cluster>)]) {
    let mut prev = usize::MAX;
    for g in [1e-9, 2e-9, 5e-9, 10e-9, 20e-9] {
        let n = run_tracker(
            scene,
            TrackerConfig {
                gate: g,
                max_gap: 3,
            },
        )
        .len();
        assert!(n <= prev, "gate {g}: {n} > {prev}");
        prev = n;
    }
}

pub fn check_time_reversal(scene: &[(f64, Vec<Cluster>)], config: TrackerConfig) {
    let fwd = run_tracker(scene, config);
    let bwd = run_tracker(&reversed(scene), config);
    assert_eq!(memberships(&fwd), memberships(&bwd));
    let drift = |trs: &[Trajectory]| -> BTreeMap<BTreeSet<String>, Option<f64>> {
        trs.iter()
            .map(|t| {
                (
                    t.samples.iter().map(|s| s.cluster.clone()).collect(),
                    trajectory_stats(t).drift_ns_per_s,
                )
            })
            .collect()
    };
    let (a, b) = (drift(&fwd), drift(&bwd));
    for (k, da) in &a {
        match (da, b[k]) {
            (Some(x), Some(y)) => assert!((x + y).abs() <= 1e-9, "{x} vs {y}"),
            (None, None) => {}
            other => panic!("drift defined on one side only: {other:?}"),
        }
    }
}
