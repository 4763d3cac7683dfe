use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{BehaviorSemantic, EventSemantic, SemanticMap, StatusSemantic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DuplicateId,
    StatusShape,
    BehaviorShape,
    BehaviorContainment,
    EventLevel,
    EventHull,
    Cycle,
    DanglingReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub id: String,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} [{}]: {}", self.kind, self.id, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, id: &str, kind: ViolationKind, detail: impl Into<String>) {
        self.violations.push(Violation {
            id: id.to_string(),
            kind,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Relative slack allowed on the upper end of an event hull.
const HULL_TOLERANCE: f64 = 1e-9;

/// Checks every structural invariant of the semantic model and reports all
/// violations found.
pub fn validate_map(map: &SemanticMap) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut seen = BTreeSet::new();
    let ids = map
        .statuses
        .iter()
        .map(|s| &s.id)
        .chain(map.behaviors.iter().map(|b| &b.id))
        .chain(map.events.iter().map(|e| &e.id));
    for id in ids {
        if !seen.insert(id.as_str()) {
            report.push(
                id,
                ViolationKind::DuplicateId,
                "identifier used more than once",
            );
        }
    }

    let statuses: HashMap<&str, &StatusSemantic> =
        map.statuses.iter().map(|s| (s.id.as_str(), s)).collect();
    let behaviors: HashMap<&str, &BehaviorSemantic> =
        map.behaviors.iter().map(|b| (b.id.as_str(), b)).collect();
    let events: HashMap<&str, &EventSemantic> =
        map.events.iter().map(|e| (e.id.as_str(), e)).collect();

    for s in &map.statuses {
        check_status(s, &mut report);
    }
    for b in &map.behaviors {
        check_behavior(b, &statuses, &mut report);
    }
    for e in &map.events {
        check_event(e, &behaviors, &events, &mut report);
    }
    check_acyclic(&map.events, &mut report);

    report
}

fn check_status(s: &StatusSemantic, report: &mut ValidationReport) {
    if s.delays.is_empty() {
        report.push(&s.id, ViolationKind::StatusShape, "no delays");
    }
    if s.delays.len() != s.amplitudes.len() {
        report.push(
            &s.id,
            ViolationKind::StatusShape,
            format!(
                "{} delays but {} amplitudes",
                s.delays.len(),
                s.amplitudes.len()
            ),
        );
    }
    if !s.snapshot_time.is_finite() {
        report.push(
            &s.id,
            ViolationKind::StatusShape,
            "non-finite snapshot time",
        );
    }
    if s.delays.iter().any(|d| !d.is_finite() || *d < 0.0) {
        report.push(
            &s.id,
            ViolationKind::StatusShape,
            "negative or non-finite delay",
        );
    }
    if s.amplitudes.iter().any(|a| !a.is_finite() || *a < 0.0) {
        report.push(
            &s.id,
            ViolationKind::StatusShape,
            "negative or non-finite amplitude",
        );
    }
    if s.delays.windows(2).any(|w| w[0] >= w[1]) {
        report.push(
            &s.id,
            ViolationKind::StatusShape,
            "delays not strictly ascending",
        );
    }
}

fn check_behavior(
    b: &BehaviorSemantic,
    statuses: &HashMap<&str, &StatusSemantic>,
    report: &mut ValidationReport,
) {
    if !(b.duration > 0.0) || !b.start_time.is_finite() {
        report.push(&b.id, ViolationKind::BehaviorShape, "duration must be > 0");
    }
    if !(b.delay_coverage >= 0.0) {
        report.push(
            &b.id,
            ViolationKind::BehaviorShape,
            "delay coverage must be >= 0",
        );
    }
    if !(b.delay_start >= 0.0) {
        report.push(
            &b.id,
            ViolationKind::BehaviorShape,
            "delay start must be >= 0",
        );
    }
    if b.statuses.is_empty() {
        report.push(&b.id, ViolationKind::BehaviorShape, "no member statuses");
    }
    let (t0, t1) = (b.start_time, b.end_time());
    let (d0, d1) = (b.delay_start, b.delay_end());
    for sid in &b.statuses {
        let Some(s) = statuses.get(sid.as_str()) else {
            report.push(
                &b.id,
                ViolationKind::DanglingReference,
                format!("status {sid} not in map"),
            );
            continue;
        };
        if s.snapshot_time < t0 || s.snapshot_time > t1 {
            report.push(
                &b.id,
                ViolationKind::BehaviorContainment,
                format!("status {sid} at {} s outside [{t0}, {t1}]", s.snapshot_time),
            );
        }
        if s.delays.iter().any(|&d| d < d0 || d > d1) {
            report.push(
                &b.id,
                ViolationKind::BehaviorContainment,
                format!("status {sid} has delays outside [{d0}, {d1}]"),
            );
        }
    }
}

fn check_event(
    e: &EventSemantic,
    behaviors: &HashMap<&str, &BehaviorSemantic>,
    events: &HashMap<&str, &EventSemantic>,
    report: &mut ValidationReport,
) {
    if !(e.duration >= 0.0) || !e.start_time.is_finite() {
        report.push(&e.id, ViolationKind::EventHull, "invalid span");
    }
    if e.level == 0 {
        if !e.sub_events.is_empty() {
            report.push(
                &e.id,
                ViolationKind::EventLevel,
                "level-0 event has sub-events",
            );
        }
        if e.behaviors.is_empty() {
            report.push(
                &e.id,
                ViolationKind::EventLevel,
                "level-0 event has no behaviors",
            );
        }
    } else if e.sub_events.is_empty() {
        report.push(
            &e.id,
            ViolationKind::EventLevel,
            format!("level-{} event has no sub-events", e.level),
        );
    }

    let mut hull: Option<(f64, f64)> = None;
    let mut widen = |s: f64, t: f64| {
        hull = Some(match hull {
            None => (s, t),
            Some((a, b)) => (a.min(s), b.max(t)),
        });
    };
    for bid in &e.behaviors {
        match behaviors.get(bid.as_str()) {
            Some(b) => widen(b.start_time, b.end_time()),
            None => report.push(
                &e.id,
                ViolationKind::DanglingReference,
                format!("behavior {bid} not in map"),
            ),
        }
    }
    let mut has_previous_level = false;
    for sid in &e.sub_events {
        match events.get(sid.as_str()) {
            Some(sub) => {
                widen(sub.start_time, sub.end_time());
                if sub.level >= e.level {
                    report.push(
                        &e.id,
                        ViolationKind::EventLevel,
                        format!("sub-event {sid} has level {} >= {}", sub.level, e.level),
                    );
                }
                if sub.level + 1 == e.level {
                    has_previous_level = true;
                }
            }
            None => report.push(
                &e.id,
                ViolationKind::DanglingReference,
                format!("sub-event {sid} not in map"),
            ),
        }
    }
    if e.level > 0 && !e.sub_events.is_empty() && !has_previous_level {
        report.push(
            &e.id,
            ViolationKind::EventLevel,
            format!("no sub-event of level {}", e.level - 1),
        );
    }
    if let Some((lo, hi)) = hull {
        let end = e.end_time();
        let slack = HULL_TOLERANCE * hi.abs().max(1.0);
        if e.start_time != lo || end < hi || end - hi > slack {
            report.push(
                &e.id,
                ViolationKind::EventHull,
                format!(
                    "span [{}, {end}] differs from member hull [{lo}, {hi}]",
                    e.start_time
                ),
            );
        }
    }
}

fn check_acyclic(events: &[EventSemantic], report: &mut ValidationReport) {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    let children: BTreeMap<&str, &[String]> = events
        .iter()
        .map(|e| (e.id.as_str(), e.sub_events.as_slice()))
        .collect();
    let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();

    for root in children.keys().copied() {
        if marks.contains_key(root) {
            continue;
        }
        // Iterative DFS: (node, index of next child).
        let mut stack: Vec<(&str, usize)> = vec![(root, 0)];
        marks.insert(root, Mark::Active);
        while let Some((node, next)) = stack.pop() {
            let kids = children.get(node).copied().unwrap_or(&[]);
            if next < kids.len() {
                stack.push((node, next + 1));
                let child = kids[next].as_str();
                if !children.contains_key(child) {
                    continue;
                }
                match marks.get(child) {
                    Some(Mark::Active) => report.push(
                        child,
                        ViolationKind::Cycle,
                        format!("event {child} is its own ancestor"),
                    ),
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(child, Mark::Active);
                        stack.push((child, 0));
                    }
                }
            } else {
                marks.insert(node, Mark::Done);
            }
        }
    }
}
