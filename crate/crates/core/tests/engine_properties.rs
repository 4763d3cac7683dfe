use std::collections::BTreeSet;

use chansem::engine::{
    classify_behavior, compose_events, BehaviorThresholds, EventRule, LabeledKind, Pattern, RuleSet,
};
use chansem::semantic::{
    validate_map, BehaviorKind, BehaviorSemantic, EventSemantic, SemanticMap, StatusSemantic,
};
use chansem::tracking::{TrackSample, Trajectory};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DT: f64 = 1.0 / 15.625;

/// Trajectory through `(time, delay ns)` samples, one single-member status
/// per sample.
fn trajectory(id: &str, pts: &[(f64, f64)]) -> (Trajectory, Vec<StatusSemantic>) {
    let samples: Vec<TrackSample> = pts
        .iter()
        .enumerate()
        .map(|(i, &(t, d))| TrackSample {
            snapshot_time: t,
            cluster: format!("{id}-c{i}"),
            centroid_delay: d * 1e-9,
            total_power: 1.0,
        })
        .collect();
    let statuses = samples
        .iter()
        .map(|s| StatusSemantic {
            id: format!("{}-s", s.cluster),
            label: "x".into(),
            delays: vec![s.centroid_delay],
            amplitudes: vec![1.0],
            source_cluster: s.cluster.clone(),
            snapshot_time: s.snapshot_time,
        })
        .collect();
    let (t0, t1) = (pts[0].0, pts[pts.len() - 1].0);
    (
        Trajectory {
            id: id.into(),
            samples,
            birth_time: t0,
            death_time: t1,
            lifetime: t1 - t0,
            gap_count: 0,
        },
        statuses,
    )
}

/// Piecewise-linear delay profile with random segment slopes [ns/s]. Slopes
/// are continuous draws (or exactly zero) so no windowed drift lands exactly
/// on the classification threshold.
fn random_profile(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let n = rng.gen_range(1..300);
    let mut slope = 0.0;
    let mut d = rng.gen_range(20.0..200.0);
    (0..n)
        .map(|i| {
            if i % 40 == 0 {
                slope = if rng.gen_bool(0.3) {
                    0.0
                } else {
                    rng.gen_range(-4.0..4.0)
                };
            }
            let p = (i as f64 * DT, d);
            d += slope * DT;
            p
        })
        .collect()
}

fn classify(pts: &[(f64, f64)]) -> (Vec<BehaviorSemantic>, Vec<StatusSemantic>) {
    let (tr, st) = trajectory("t", pts);
    let refs: Vec<&StatusSemantic> = st.iter().collect();
    (
        classify_behavior(&tr, &refs, &BehaviorThresholds::default(), DT),
        st,
    )
}

const MOTION: [BehaviorKind; 5] = [
    BehaviorKind::Approach,
    BehaviorKind::MoveAway,
    BehaviorKind::Static,
    BehaviorKind::Appear,
    BehaviorKind::Disappear,
];

fn spans(bs: &[BehaviorSemantic], flip: Option<f64>) -> Vec<(BehaviorKind, i64, i64)> {
    // quantised to 1 ns of time so rounding cannot split equal spans
    let q = |x: f64| (x * 1e9).round() as i64;
    let mut v: Vec<_> = bs
        .iter()
        .filter(|b| MOTION.contains(&b.kind))
        .map(|b| match flip {
            None => (b.kind, q(b.start_time), q(b.end_time())),
            Some(end) => (
                b.kind.reversed(),
                q(end - b.end_time()),
                q(end - b.start_time),
            ),
        })
        .collect();
    v.sort();
    v
}

#[test]
fn reversing_time_swaps_motion_kinds() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let pts = random_profile(&mut rng);
        let end = pts.last().unwrap().0;
        let rev: Vec<(f64, f64)> = pts.iter().rev().map(|&(t, d)| (end - t, d)).collect();
        let (fwd, _) = classify(&pts);
        let (bwd, _) = classify(&rev);
        assert_eq!(spans(&fwd, None), spans(&bwd, Some(end)));
    }
}

#[test]
fn behaviors_satisfy_containment() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let (behaviors, statuses) = classify(&random_profile(&mut rng));
        let map = SemanticMap {
            behaviors,
            statuses,
            ..SemanticMap::default()
        };
        let report = validate_map(&map);
        assert!(report.is_valid(), "{report}");
        // motion runs tile the trajectory
        let mut runs: Vec<&BehaviorSemantic> = map
            .behaviors
            .iter()
            .filter(|b| {
                matches!(
                    b.kind,
                    BehaviorKind::Approach | BehaviorKind::MoveAway | BehaviorKind::Static
                )
            })
            .collect();
        runs.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
        for w in runs.windows(2) {
            assert!((w[0].end_time() - w[1].start_time).abs() < 1e-9);
        }
    }
}

const LABELS: [&str; 3] = ["median barrier", "vehicles", "trees"];
const KINDS: [BehaviorKind; 3] = [
    BehaviorKind::Approach,
    BehaviorKind::MoveAway,
    BehaviorKind::Static,
];

/// Behaviors with one labeled status each, spread over 60 s.
fn random_behaviors(rng: &mut ChaCha8Rng) -> (Vec<BehaviorSemantic>, Vec<StatusSemantic>) {
    let n = rng.gen_range(0..25);
    let mut bs = Vec::new();
    let mut ss = Vec::new();
    for i in 0..n {
        let t = rng.gen_range(0..60) as f64;
        let d = rng.gen_range(10..300) as f64 * 1e-9;
        ss.push(StatusSemantic {
            id: format!("s{i}"),
            label: LABELS[rng.gen_range(0..3)].into(),
            delays: vec![d],
            amplitudes: vec![1.0],
            source_cluster: format!("c{i}"),
            snapshot_time: t,
        });
        bs.push(BehaviorSemantic {
            id: format!("b{i}"),
            kind: KINDS[rng.gen_range(0..3)],
            start_time: t,
            duration: rng.gen_range(1..15) as f64,
            delay_start: d,
            delay_coverage: 0.0,
            statuses: vec![format!("s{i}")],
            trajectory: format!("tr{i}"),
        });
    }
    (bs, ss)
}

fn random_level0(rng: &mut ChaCha8Rng, name: String) -> EventRule {
    let pattern = (0..rng.gen_range(1..=2))
        .map(|_| LabeledKind {
            label: LABELS[rng.gen_range(0..3)].into(),
            kind: KINDS[rng.gen_range(0..3)],
        })
        .collect();
    EventRule {
        produces: name.clone(),
        name,
        level: 0,
        pattern: Pattern::AllOf(pattern),
        min_overlap: rng.gen_range(0..3) as f64,
        max_seq_gap: 5.0,
    }
}

fn random_rules(rng: &mut ChaCha8Rng, prefix: &str) -> Vec<EventRule> {
    let mut rules: Vec<EventRule> = (0..rng.gen_range(1..4))
        .map(|i| random_level0(rng, format!("{prefix}{i}")))
        .collect();
    if rng.gen_bool(0.7) {
        let names: Vec<String> = rules.iter().map(|r| r.produces.clone()).collect();
        let seq = (0..rng.gen_range(1..=3))
            .map(|_| names[rng.gen_range(0..names.len())].clone())
            .collect();
        rules.push(EventRule {
            name: format!("{prefix}seq"),
            level: 1,
            pattern: Pattern::Sequence(seq),
            produces: format!("{prefix}seq"),
            min_overlap: 0.0,
            max_seq_gap: rng.gen_range(0..10) as f64,
        });
    }
    rules
}

/// Scope-independent description of an event.
fn signature(e: &EventSemantic, all: &[EventSemantic]) -> String {
    let subs: BTreeSet<String> = e
        .sub_events
        .iter()
        .map(|id| signature(all.iter().find(|x| &x.id == id).unwrap(), all))
        .collect();
    format!(
        "{}|{}|{}|{}|{:?}|{:?}",
        e.label, e.level, e.start_time, e.duration, e.behaviors, subs
    )
}

#[test]
fn adding_a_rule_keeps_fired_events() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..300 {
        let (bs, ss) = random_behaviors(&mut rng);
        let base = random_rules(&mut rng, "r");
        let mut extended = base.clone();
        extended.extend(random_rules(&mut rng, "new"));
        let before = compose_events(&bs, &ss, &RuleSet::new(base).unwrap(), "x");
        let after = compose_events(&bs, &ss, &RuleSet::new(extended).unwrap(), "x");
        let a: BTreeSet<String> = after.iter().map(|e| signature(e, &after)).collect();
        for e in &before {
            assert!(a.contains(&signature(e, &before)), "lost {e:?}");
        }
    }
}

#[test]
fn event_spans_are_member_hulls() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut fired = 0;
    for _ in 0..300 {
        let (behaviors, statuses) = random_behaviors(&mut rng);
        let rules = RuleSet::new(random_rules(&mut rng, "r")).unwrap();
        let events = compose_events(&behaviors, &statuses, &rules, "x");
        fired += events.len();
        let map = SemanticMap {
            events,
            behaviors,
            statuses,
            ..SemanticMap::default()
        };
        let report = validate_map(&map);
        assert!(report.is_valid(), "{report}");
    }
    assert!(fired > 100, "only {fired} events fired");
}

proptest! {
    #[test]
    fn constant_drift_gives_one_motion_run(slope in prop_oneof![-8.0f64..-0.6, 0.6f64..8.0], n in 20usize..200) {
        let pts: Vec<(f64, f64)> = (0..n).map(|i| (i as f64 * DT, 100.0 + slope * i as f64 * DT)).collect();
        let (bs, _) = classify(&pts);
        let kind = if slope < 0.0 { BehaviorKind::Approach } else { BehaviorKind::MoveAway };
        let runs: Vec<_> = bs.iter().filter(|b| KINDS.contains(&b.kind)).collect();
        prop_assert_eq!(runs.len(), 1);
        prop_assert_eq!(runs[0].kind, kind);
        prop_assert!((runs[0].duration - pts[n - 1].0).abs() < 1e-9);
    }
}
