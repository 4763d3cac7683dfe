use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{
    BehaviorKind, BehaviorSemantic, EventSemantic, Record, SemanticMap, StatusSemantic, StoreError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordType {
    Status,
    Behavior,
    Event,
}

/// A predicate over stored semantics.
///
/// Time windows match by overlap with the record span (closed intervals);
/// delay windows match by overlap with the record's delay extent and never
/// match events. Labels match statuses and events; kinds match behaviors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticQuery {
    TimeInterval {
        start: f64,
        end: f64,
    },
    Label(String),
    Kind(BehaviorKind),
    /// Delay window [s].
    DelayWindow {
        min: f64,
        max: f64,
    },
    RecordType(RecordType),
    /// Every record that (transitively) contains the given one.
    AncestorsOf(String),
    /// Every record (transitively) contained in the given one.
    DescendantsOf(String),
    And(Vec<SemanticQuery>),
}

impl SemanticQuery {
    pub fn and(self, other: SemanticQuery) -> SemanticQuery {
        match self {
            SemanticQuery::And(mut qs) => {
                qs.push(other);
                SemanticQuery::And(qs)
            }
            q => SemanticQuery::And(vec![q, other]),
        }
    }

    /// Record-local predicate; `None` for the structural queries.
    fn local_match(&self, r: &Record) -> Option<bool> {
        Some(match self {
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
                Record::Status(s) => match (s.min_delay(), s.max_delay()) {
                    (Some(lo), Some(hi)) => lo <= *max && hi >= *min,
                    _ => false,
                },
                Record::Behavior(b) => b.delay_start <= *max && b.delay_end() >= *min,
                Record::Event(_) => false,
            },
            SemanticQuery::RecordType(t) => r.record_type() == *t,
            SemanticQuery::AncestorsOf(_)
            | SemanticQuery::DescendantsOf(_)
            | SemanticQuery::And(_) => return None,
        })
    }

    fn check(&self) -> Result<(), StoreError> {
        match self {
            SemanticQuery::TimeInterval { start, end } if !(start <= end) => Err(
                StoreError::InvalidQuery(format!("time interval [{start}, {end}] is empty")),
            ),
            SemanticQuery::DelayWindow { min, max } if !(min <= max) => Err(
                StoreError::InvalidQuery(format!("delay window [{min}, {max}] is empty")),
            ),
            SemanticQuery::And(qs) => qs.iter().try_for_each(SemanticQuery::check),
            _ => Ok(()),
        }
    }
}

/// Indexed view over a set of semantic records.
#[derive(Debug, Clone, Default)]
pub(crate) struct Catalog {
    statuses: BTreeMap<String, StatusSemantic>,
    behaviors: BTreeMap<String, BehaviorSemantic>,
    events: BTreeMap<String, EventSemantic>,
    by_label: BTreeMap<String, BTreeSet<String>>,
    by_kind: BTreeMap<BehaviorKind, BTreeSet<String>>,
    /// child id -> ids of records that reference it
    parents: BTreeMap<String, BTreeSet<String>>,
}

impl Catalog {
    pub fn from_map(map: &SemanticMap) -> Self {
        let mut c = Catalog::default();
        for r in map.records() {
            c.insert(r);
        }
        c
    }

    pub fn len(&self) -> usize {
        self.statuses.len() + self.behaviors.len() + self.events.len()
    }

    pub fn get(&self, id: &str) -> Option<Record> {
        if let Some(s) = self.statuses.get(id) {
            return Some(Record::Status(s.clone()));
        }
        if let Some(b) = self.behaviors.get(id) {
            return Some(Record::Behavior(b.clone()));
        }
        self.events.get(id).cloned().map(Record::Event)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.statuses.contains_key(id)
            || self.behaviors.contains_key(id)
            || self.events.contains_key(id)
    }

    pub fn statuses(&self) -> impl Iterator<Item = &StatusSemantic> {
        self.statuses.values()
    }

    pub fn behaviors(&self) -> impl Iterator<Item = &BehaviorSemantic> {
        self.behaviors.values()
    }

    pub fn events(&self) -> impl Iterator<Item = &EventSemantic> {
        self.events.values()
    }

    /// Inserts or replaces a record; returns `false` when an identical record
    /// was already present.
    pub fn insert(&mut self, r: Record) -> bool {
        match self.get(r.id()) {
            Some(old) if old == r => return false,
            Some(old) => self.unindex(&old),
            None => {}
        }
        self.index(&r);
        match r {
            Record::Status(s) => {
                self.statuses.insert(s.id.clone(), s);
            }
            Record::Behavior(b) => {
                self.behaviors.insert(b.id.clone(), b);
            }
            Record::Event(e) => {
                self.events.insert(e.id.clone(), e);
            }
        }
        true
    }

    fn children(r: &Record) -> Vec<&String> {
        match r {
            Record::Status(_) => Vec::new(),
            Record::Behavior(b) => b.statuses.iter().collect(),
            Record::Event(e) => e.behaviors.iter().chain(e.sub_events.iter()).collect(),
        }
    }

    fn index(&mut self, r: &Record) {
        match r {
            Record::Status(s) => {
                self.by_label
                    .entry(s.label.clone())
                    .or_default()
                    .insert(s.id.clone());
            }
            Record::Behavior(b) => {
                self.by_kind.entry(b.kind).or_default().insert(b.id.clone());
            }
            Record::Event(e) => {
                self.by_label
                    .entry(e.label.clone())
                    .or_default()
                    .insert(e.id.clone());
            }
        }
        for child in Self::children(r) {
            self.parents
                .entry(child.clone())
                .or_default()
                .insert(r.id().to_string());
        }
    }

    fn unindex(&mut self, r: &Record) {
        let id = r.id();
        match r {
            Record::Status(s) => remove_from(&mut self.by_label, &s.label, id),
            Record::Behavior(b) => remove_from(&mut self.by_kind, &b.kind, id),
            Record::Event(e) => remove_from(&mut self.by_label, &e.label, id),
        }
        for child in Self::children(r) {
            remove_from(&mut self.parents, child, id);
        }
    }

    fn all_ids(&self) -> BTreeSet<String> {
        self.statuses
            .keys()
            .chain(self.behaviors.keys())
            .chain(self.events.keys())
            .cloned()
            .collect()
    }

    fn ids_of_type(&self, t: RecordType) -> BTreeSet<String> {
        match t {
            RecordType::Status => self.statuses.keys().cloned().collect(),
            RecordType::Behavior => self.behaviors.keys().cloned().collect(),
            RecordType::Event => self.events.keys().cloned().collect(),
        }
    }

    fn closure(&self, id: &str, upward: bool) -> Result<BTreeSet<String>, StoreError> {
        let Some(start) = self.get(id) else {
            return Err(StoreError::UnknownId(id.to_string()));
        };
        let mut out = BTreeSet::new();
        let mut queue = VecDeque::new();
        let next = |r: &Record| -> Vec<String> {
            if upward {
                self.parents
                    .get(r.id())
                    .map(|p| p.iter().cloned().collect())
                    .unwrap_or_default()
            } else {
                Self::children(r).into_iter().cloned().collect()
            }
        };
        queue.extend(next(&start));
        while let Some(n) = queue.pop_front() {
            if !out.insert(n.clone()) {
                continue;
            }
            if let Some(r) = self.get(&n) {
                queue.extend(next(&r));
            }
        }
        out.retain(|i| self.contains(i));
        Ok(out)
    }

    fn eval_ids(&self, q: &SemanticQuery) -> Result<BTreeSet<String>, StoreError> {
        match q {
            SemanticQuery::Label(l) => Ok(self.by_label.get(l).cloned().unwrap_or_default()),
            SemanticQuery::Kind(k) => Ok(self.by_kind.get(k).cloned().unwrap_or_default()),
            SemanticQuery::RecordType(t) => Ok(self.ids_of_type(*t)),
            SemanticQuery::AncestorsOf(id) => self.closure(id, true),
            SemanticQuery::DescendantsOf(id) => self.closure(id, false),
            SemanticQuery::And(qs) => {
                // Set-producing terms first, local filters after.
                let (filters, sets): (Vec<_>, Vec<_>) = qs.iter().partition(|q| {
                    matches!(
                        q,
                        SemanticQuery::TimeInterval { .. } | SemanticQuery::DelayWindow { .. }
                    )
                });
                let mut acc: Option<BTreeSet<String>> = None;
                for q in sets {
                    let s = self.eval_ids(q)?;
                    acc = Some(match acc {
                        None => s,
                        Some(a) => a.intersection(&s).cloned().collect(),
                    });
                }
                let mut acc = acc.unwrap_or_else(|| self.all_ids());
                for f in filters {
                    acc.retain(|id| {
                        self.get(id)
                            .and_then(|r| f.local_match(&r))
                            .unwrap_or(false)
                    });
                }
                Ok(acc)
            }
            SemanticQuery::TimeInterval { .. } | SemanticQuery::DelayWindow { .. } => {
                let mut ids = self.all_ids();
                ids.retain(|id| {
                    self.get(id)
                        .and_then(|r| q.local_match(&r))
                        .unwrap_or(false)
                });
                Ok(ids)
            }
        }
    }

    pub fn query(&self, q: &SemanticQuery) -> Result<Vec<Record>, StoreError> {
        q.check()?;
        let ids = self.eval_ids(q)?;
        let mut out: Vec<Record> = ids.iter().filter_map(|id| self.get(id)).collect();
        sort_records(&mut out);
        Ok(out)
    }
}

fn remove_from<K: Ord + ?Sized, Q: Ord + Clone>(
    index: &mut BTreeMap<Q, BTreeSet<String>>,
    key: &K,
    id: &str,
) where
    Q: std::borrow::Borrow<K>,
{
    if let Some(set) = index.get_mut(key) {
        set.remove(id);
        if set.is_empty() {
            index.remove(key);
        }
    }
}

/// Orders records by start time, then id.
pub(crate) fn sort_records(records: &mut [Record]) {
    records.sort_by(|a, b| {
        a.start_time()
            .total_cmp(&b.start_time())
            .then_with(|| a.id().cmp(b.id()))
    });
}

/// Runs a query against an in-memory map.
pub fn evaluate(map: &SemanticMap, q: &SemanticQuery) -> Result<Vec<Record>, StoreError> {
    Catalog::from_map(map).query(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map() -> SemanticMap {
        let s = |id: &str, t: f64, d: f64, label: &str| StatusSemantic {
            id: id.into(),
            label: label.into(),
            delays: vec![d, d + 2e-9],
            amplitudes: vec![1.0, 0.5],
            source_cluster: "c".into(),
            snapshot_time: t,
        };
        let b = |id: &str, kind, t: f64, ss: &[&str]| BehaviorSemantic {
            id: id.into(),
            kind,
            start_time: t,
            duration: 2.0,
            delay_start: 10e-9,
            delay_coverage: 30e-9,
            statuses: ss.iter().map(|x| x.to_string()).collect(),
            trajectory: "tr".into(),
        };
        SemanticMap {
            statuses: vec![
                s("s1", 0.5, 12e-9, "vehicles"),
                s("s2", 1.5, 20e-9, "vehicles"),
                s("s3", 5.5, 300e-9, "buildings"),
            ],
            behaviors: vec![
                b("b1", BehaviorKind::Approach, 0.0, &["s1", "s2"]),
                b("b2", BehaviorKind::Static, 4.0, &["s3"]),
            ],
            events: vec![
                EventSemantic {
                    id: "e1".into(),
                    label: "turn onto road".into(),
                    level: 0,
                    start_time: 0.0,
                    duration: 2.0,
                    behaviors: vec!["b1".into()],
                    sub_events: vec![],
                },
                EventSemantic {
                    id: "e2".into(),
                    label: "driving through road".into(),
                    level: 1,
                    start_time: 0.0,
                    duration: 2.0,
                    behaviors: vec![],
                    sub_events: vec!["e1".into()],
                },
            ],
            ..Default::default()
        }
    }

    fn ids(r: &[Record]) -> Vec<&str> {
        r.iter().map(Record::id).collect()
    }

    #[test]
    fn empty_map_time_query() {
        let q = SemanticQuery::TimeInterval {
            start: 0.0,
            end: 10.0,
        };
        assert!(evaluate(&SemanticMap::default(), &q).unwrap().is_empty());
    }

    #[test]
    fn overlap_not_containment() {
        let q = SemanticQuery::TimeInterval {
            start: 1.9,
            end: 4.1,
        };
        let r = evaluate(&map(), &q).unwrap();
        // b1 [0,2], b2 [4,6], e1/e2 [0,2] overlap; s2 at 1.5 does not.
        assert_eq!(ids(&r), vec!["b1", "e1", "e2", "b2"]);
    }

    #[test]
    fn closures() {
        let m = map();
        let down = evaluate(&m, &SemanticQuery::DescendantsOf("e2".into())).unwrap();
        assert_eq!(ids(&down), vec!["b1", "e1", "s1", "s2"]);
        let up = evaluate(&m, &SemanticQuery::AncestorsOf("s1".into())).unwrap();
        assert_eq!(ids(&up), vec!["b1", "e1", "e2"]);
        let err = evaluate(&m, &SemanticQuery::AncestorsOf("nope".into())).unwrap_err();
        assert!(matches!(err, StoreError::UnknownId(_)));
    }

    #[test]
    fn conjunction() {
        let q = SemanticQuery::Label("vehicles".into()).and(SemanticQuery::DelayWindow {
            min: 15e-9,
            max: 25e-9,
        });
        assert_eq!(ids(&evaluate(&map(), &q).unwrap()), vec!["s2"]);
        let q = SemanticQuery::DescendantsOf("e2".into())
            .and(SemanticQuery::RecordType(RecordType::Event));
        assert_eq!(ids(&evaluate(&map(), &q).unwrap()), vec!["e1"]);
    }

    #[test]
    fn empty_window_rejected() {
        let q = SemanticQuery::TimeInterval {
            start: 2.0,
            end: 1.0,
        };
        assert!(matches!(
            evaluate(&map(), &q),
            Err(StoreError::InvalidQuery(_))
        ));
    }
}
