//! Event semantics from declarative composition rules.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::behavior::behavior_label;
use crate::ids;
use crate::semantic::{
    covering_length, BehaviorKind, BehaviorSemantic, EventSemantic, StatusSemantic,
};

pub const DEFAULT_MAX_SEQ_GAP_S: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("rule file: {0}")]
    Parse(String),
    #[error("rule `{rule}`: {reason}")]
    Invalid { rule: String, reason: String },
    #[error("rule `{rule}` references unknown event `{name}`")]
    UnresolvedReference { rule: String, name: String },
    #[error("rule `{0}` is part of a reference cycle")]
    Cycle(String),
    #[error("rule `{rule}`: {reason}")]
    LevelMismatch { rule: String, reason: String },
    #[error("label map: {0}")]
    InvalidLabelMap(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledKind {
    pub label: String,
    pub kind: BehaviorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// Behaviors that must co-occur (level 0).
    AllOf(Vec<LabeledKind>),
    /// Event labels that must follow one another (level ≥ 1).
    Sequence(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRule {
    pub name: String,
    pub level: u32,
    pub pattern: Pattern,
    /// Label of the emitted events; referenced by sequence patterns.
    pub produces: String,
    /// Minimum common overlap of co-occurring behaviors [s].
    #[serde(default)]
    pub min_overlap: f64,
    /// Maximum gap between consecutive events of a sequence [s].
    #[serde(default = "default_gap")]
    pub max_seq_gap: f64,
}

fn default_gap() -> f64 {
    DEFAULT_MAX_SEQ_GAP_S
}

/// A validated rule list in evaluation order.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    rules: Vec<EventRule>,
}

impl RuleSet {
    pub fn empty() -> Self {
        RuleSet { rules: Vec::new() }
    }

    pub fn from_json(text: &str) -> Result<Self, RuleError> {
        let rules: Vec<EventRule> =
            serde_json::from_str(text).map_err(|e| RuleError::Parse(e.to_string()))?;
        RuleSet::new(rules)
    }

    pub fn new(rules: Vec<EventRule>) -> Result<Self, RuleError> {
        for r in &rules {
            check_shape(r)?;
        }
        let mut producers: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, r) in rules.iter().enumerate() {
            producers.entry(r.produces.as_str()).or_default().push(i);
        }
        let mut deps: Vec<Vec<usize>> = vec![Vec::new(); rules.len()];
        for (i, r) in rules.iter().enumerate() {
            if let Pattern::Sequence(names) = &r.pattern {
                for name in names {
                    let Some(ps) = producers.get(name.as_str()) else {
                        return Err(RuleError::UnresolvedReference {
                            rule: r.name.clone(),
                            name: name.clone(),
                        });
                    };
                    deps[i].extend(ps);
                }
            }
        }
        if let Some(i) = find_cycle(&deps) {
            return Err(RuleError::Cycle(rules[i].name.clone()));
        }
        for (i, r) in rules.iter().enumerate() {
            if r.level == 0 {
                continue;
            }
            if deps[i].iter().any(|&j| rules[j].level >= r.level) {
                return Err(RuleError::LevelMismatch {
                    rule: r.name.clone(),
                    reason: format!("references an event of level >= {}", r.level),
                });
            }
            if !deps[i].iter().any(|&j| rules[j].level + 1 == r.level) {
                return Err(RuleError::LevelMismatch {
                    rule: r.name.clone(),
                    reason: format!("references no event of level {}", r.level - 1),
                });
            }
        }
        // References point to strictly lower levels, so a stable sort by
        // level is a topological order.
        let mut rules = rules;
        rules.sort_by_key(|r| r.level);
        Ok(RuleSet { rules })
    }

    pub fn rules(&self) -> &[EventRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

fn check_shape(r: &EventRule) -> Result<(), RuleError> {
    let invalid = |reason: &str| RuleError::Invalid {
        rule: r.name.clone(),
        reason: reason.to_string(),
    };
    if r.name.is_empty() || r.produces.is_empty() {
        return Err(invalid("name and produced label must be non-empty"));
    }
    if !(r.min_overlap >= 0.0) || !r.min_overlap.is_finite() {
        return Err(invalid("min_overlap must be a finite value >= 0"));
    }
    if !(r.max_seq_gap >= 0.0) {
        return Err(invalid("max_seq_gap must be >= 0"));
    }
    match (&r.pattern, r.level) {
        (Pattern::AllOf(p), 0) if p.is_empty() => Err(invalid("empty pattern")),
        (Pattern::Sequence(p), l) if l > 0 && p.is_empty() => Err(invalid("empty pattern")),
        (Pattern::AllOf(_), 0) | (Pattern::Sequence(_), 1..) => Ok(()),
        (Pattern::AllOf(_), l) => Err(RuleError::LevelMismatch {
            rule: r.name.clone(),
            reason: format!("co-occurrence pattern at level {l}; must be level 0"),
        }),
        (Pattern::Sequence(_), _) => Err(RuleError::LevelMismatch {
            rule: r.name.clone(),
            reason: "sequence pattern at level 0; must be level >= 1".into(),
        }),
    }
}

fn find_cycle(deps: &[Vec<usize>]) -> Option<usize> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut mark = vec![0u8; deps.len()];
    for root in 0..deps.len() {
        if mark[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        mark[root] = 1;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&child) = deps[node].get(*next) {
                *next += 1;
                match mark[child] {
                    0 => {
                        mark[child] = 1;
                        stack.push((child, 0));
                    }
                    1 => return Some(child),
                    _ => {}
                }
            } else {
                mark[node] = 2;
                stack.pop();
            }
        }
    }
    None
}

/// Maximal closed intervals where every interval set overlaps.
fn intersect_all(sets: &[Vec<(f64, f64)>]) -> Vec<(f64, f64)> {
    let mut acc = union(sets[0].clone());
    for s in &sets[1..] {
        let other = union(s.clone());
        let mut next = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < acc.len() && j < other.len() {
            let lo = acc[i].0.max(other[j].0);
            let hi = acc[i].1.min(other[j].1);
            if lo <= hi {
                next.push((lo, hi));
            }
            if acc[i].1 < other[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        acc = next;
    }
    acc
}

fn union(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in iv {
        match out.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

fn hull_event(
    id: String,
    label: &str,
    level: u32,
    spans: impl Iterator<Item = (f64, f64)>,
    behaviors: Vec<String>,
    sub_events: Vec<String>,
) -> EventSemantic {
    let (lo, hi) = spans.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (s, e)| {
        (a.min(s), b.max(e))
    });
    EventSemantic {
        id,
        label: label.to_string(),
        level,
        start_time: lo,
        duration: covering_length(lo, hi),
        behaviors,
        sub_events,
    }
}

/// Applies every rule in order and returns all fired events.
///
/// `scope` namespaces event identifiers (e.g. the trace id).
pub fn compose_events(
    behaviors: &[BehaviorSemantic],
    statuses: &[StatusSemantic],
    rules: &RuleSet,
    scope: &str,
) -> Vec<EventSemantic> {
    let status_index: HashMap<&str, &StatusSemantic> =
        statuses.iter().map(|s| (s.id.as_str(), s)).collect();
    let labeled: Vec<(Option<&str>, &BehaviorSemantic)> = behaviors
        .iter()
        .map(|b| (behavior_label(b, &status_index), b))
        .collect();

    let mut events: Vec<EventSemantic> = Vec::new();
    let mut by_label: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for rule in rules.rules() {
        let fired = match &rule.pattern {
            Pattern::AllOf(pattern) => fire_cooccurrence(rule, pattern, &labeled, scope),
            Pattern::Sequence(names) => fire_sequence(rule, names, &events, &by_label, scope),
        };
        for e in fired {
            by_label
                .entry(e.label.clone())
                .or_default()
                .push(events.len());
            events.push(e);
        }
    }
    events
}

fn fire_cooccurrence(
    rule: &EventRule,
    pattern: &[LabeledKind],
    labeled: &[(Option<&str>, &BehaviorSemantic)],
    scope: &str,
) -> Vec<EventSemantic> {
    let candidates: Vec<Vec<&BehaviorSemantic>> = pattern
        .iter()
        .map(|p| {
            labeled
                .iter()
                .filter(|(l, b)| b.kind == p.kind && *l == Some(p.label.as_str()))
                .map(|(_, b)| *b)
                .collect()
        })
        .collect();
    if candidates.iter().any(|c| c.is_empty()) {
        return Vec::new();
    }
    let spans: Vec<Vec<(f64, f64)>> = candidates
        .iter()
        .map(|c| c.iter().map(|b| (b.start_time, b.end_time())).collect())
        .collect();

    let mut out = Vec::new();
    for (lo, hi) in intersect_all(&spans) {
        if hi - lo < rule.min_overlap {
            continue;
        }
        let mut members: Vec<&BehaviorSemantic> = Vec::new();
        for c in &candidates {
            for b in c {
                if b.start_time <= hi && b.end_time() >= lo && !members.iter().any(|m| m.id == b.id)
                {
                    members.push(b);
                }
            }
        }
        members.sort_by(|a, b| a.start_time.total_cmp(&b.start_time).then(a.id.cmp(&b.id)));
        let index = out.len();
        out.push(hull_event(
            ids::derive("event", &[&scope, &rule.name, &index]),
            &rule.produces,
            0,
            members.iter().map(|b| (b.start_time, b.end_time())),
            members.iter().map(|b| b.id.clone()).collect(),
            Vec::new(),
        ));
    }
    out
}

fn fire_sequence(
    rule: &EventRule,
    names: &[String],
    events: &[EventSemantic],
    by_label: &BTreeMap<String, Vec<usize>>,
    scope: &str,
) -> Vec<EventSemantic> {
    let sorted = |name: &str| -> Vec<&EventSemantic> {
        let mut v: Vec<&EventSemantic> = by_label
            .get(name)
            .map(|ix| ix.iter().map(|&i| &events[i]).collect())
            .unwrap_or_default();
        v.sort_by(|a, b| a.start_time.total_cmp(&b.start_time).then(a.id.cmp(&b.id)));
        v
    };
    let lists: Vec<Vec<&EventSemantic>> = names.iter().map(|n| sorted(n)).collect();

    let mut out = Vec::new();
    let mut cursor = f64::NEG_INFINITY;
    for first in &lists[0] {
        if first.start_time < cursor {
            continue;
        }
        let mut chain: Vec<&EventSemantic> = vec![first];
        for list in &lists[1..] {
            let prev = *chain.last().unwrap();
            let next = list.iter().find(|e| {
                e.start_time >= prev.start_time
                    && e.start_time - prev.end_time() <= rule.max_seq_gap
                    && !chain.iter().any(|c| c.id == e.id)
            });
            match next {
                Some(e) => chain.push(e),
                None => break,
            }
        }
        if chain.len() != names.len() {
            continue;
        }
        let index = out.len();
        let ev = hull_event(
            ids::derive("event", &[&scope, &rule.name, &index]),
            &rule.produces,
            rule.level,
            chain.iter().map(|e| (e.start_time, e.end_time())),
            Vec::new(),
            chain.iter().map(|e| e.id.clone()).collect(),
        );
        cursor = ev.end_time();
        out.push(ev);
    }
    out
}
