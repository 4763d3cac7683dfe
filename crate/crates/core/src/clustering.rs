//! k-power-means clustering of multipath components in the delay domain.
//!
//! The objective is `J = Σ_i P_i (τ_i − c_{a(i)})²`, with `c_j` the
//! power-weighted centroid of cluster `j`. Seeding is k-means++ with
//! selection probabilities scaled by component power.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::Mpc;

pub const MAX_ITERATIONS: usize = 100;
pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_K_MAX: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("no multipath components to cluster")]
    Empty,
    #[error("k = {k} out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: String,
    pub snapshot_time: f64,
    /// Members sorted by delay.
    pub members: Vec<Mpc>,
    pub centroid_delay: f64,
    pub total_power: f64,
    pub rms_delay_spread: f64,
    pub peak_power: f64,
}

impl Cluster {
    pub fn from_members(id: impl Into<String>, snapshot_time: f64, mut members: Vec<Mpc>) -> Self {
        members.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        let total_power: f64 = members.iter().map(|m| m.power).sum();
        let centroid_delay = members.iter().map(|m| m.power * m.delay).sum::<f64>() / total_power;
        let spread = members
            .iter()
            .map(|m| m.power * (m.delay - centroid_delay).powi(2))
            .sum::<f64>()
            / total_power;
        let peak_power = members.iter().map(|m| m.power).fold(0.0, f64::max);
        Cluster {
            id: id.into(),
            snapshot_time,
            members,
            centroid_delay,
            total_power,
            rms_delay_spread: spread.sqrt(),
            peak_power,
        }
    }

    pub fn delays(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.delay).collect()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.amplitude).collect()
    }
}

/// Result of one (possibly restarted) k-power-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Clusters ordered by centroid delay.
    pub clusters: Vec<Cluster>,
    pub objective: f64,
    /// Objective after every assignment/update step of the winning run.
    pub history: Vec<f64>,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }
}

/// Canonical order: by delay, then power. Makes the result independent of
/// the input order.
fn canonical(mpcs: &[Mpc]) -> Vec<Mpc> {
    let mut v = mpcs.to_vec();
    v.sort_by(|a, b| {
        a.delay
            .total_cmp(&b.delay)
            .then(a.power.total_cmp(&b.power))
    });
    v
}

fn objective(points: &[Mpc], assign: &[usize], centroids: &[f64]) -> f64 {
    points
        .iter()
        .zip(assign)
        .map(|(p, &a)| p.power * (p.delay - centroids[a]).powi(2))
        .sum()
}

fn weighted_pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let mut x = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if x < w {
                return Some(i);
            }
            x -= w;
        }
    }
    weights.iter().rposition(|&w| w > 0.0)
}

fn seed_centroids(points: &[Mpc], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len();
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let powers: Vec<f64> = points.iter().map(|p| p.power).collect();
    let first = weighted_pick(rng, &powers).unwrap_or(0);
    chosen.push(first);
    while chosen.len() < k {
        let weights: Vec<f64> = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if chosen.contains(&i) {
                    return 0.0;
                }
                let d = chosen
                    .iter()
                    .map(|&c| (p.delay - points[c].delay).abs())
                    .fold(f64::INFINITY, f64::min);
                p.power * d * d
            })
            .collect();
        let next = weighted_pick(rng, &weights)
            .or_else(|| (0..n).find(|i| !chosen.contains(i)))
            .expect("k <= n");
        chosen.push(next);
    }
    chosen.into_iter().map(|i| points[i].delay).collect()
}

fn assign_nearest(points: &[Mpc], centroids: &[f64]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = (p.delay - centroids[0]).abs();
            for (j, &c) in centroids.iter().enumerate().skip(1) {
                let d = (p.delay - c).abs();
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

fn update_centroids(points: &[Mpc], assign: &[usize], centroids: &mut [f64]) {
    let k = centroids.len();
    let mut num = vec![0.0; k];
    let mut den = vec![0.0; k];
    let mut plain = vec![(0.0, 0usize); k];
    for (p, &a) in points.iter().zip(assign) {
        num[a] += p.power * p.delay;
        den[a] += p.power;
        plain[a].0 += p.delay;
        plain[a].1 += 1;
    }
    for j in 0..k {
        if den[j] > 0.0 {
            centroids[j] = num[j] / den[j];
        } else if plain[j].1 > 0 {
            centroids[j] = plain[j].0 / plain[j].1 as f64;
        }
    }
}

/// Moves the point with the largest power-weighted distance to its centroid
/// into each empty cluster.
fn repair_empty(points: &[Mpc], assign: &mut [usize], centroids: &mut [f64]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut far = None;
        let mut far_cost = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            if sizes[assign[i]] < 2 {
                continue;
            }
            let cost = p.power * (p.delay - centroids[assign[i]]).powi(2);
            if cost > far_cost {
                far_cost = cost;
                far = Some(i);
            }
        }
        let i = far.expect("k <= n guarantees a cluster with two members");
        assign[i] = empty;
        centroids[empty] = points[i].delay;
        update_centroids(points, assign, centroids);
    }
}

/// Exact change of the objective when point `i` leaves cluster `from` for
/// cluster `to`, given the current cluster weights.
fn move_delta(p: &Mpc, from: usize, to: usize, centroids: &[f64], weight: &[f64]) -> f64 {
    let w = p.power;
    let leave = weight[from] * w / (weight[from] - w) * (p.delay - centroids[from]).powi(2);
    let join = weight[to] * w / (weight[to] + w) * (p.delay - centroids[to]).powi(2);
    join - leave
}

/// Single-point moves after Lloyd converges: relocates one component at a
/// time whenever that strictly lowers the objective. Returns whether any
/// point moved.
fn refine_single_moves(points: &[Mpc], assign: &mut [usize], centroids: &mut [f64]) -> bool {
    let k = centroids.len();
    let mut moved = false;
    for _ in 0..MAX_ITERATIONS {
        let mut weight = vec![0.0; k];
        let mut sizes = vec![0usize; k];
        for (p, &a) in points.iter().zip(assign.iter()) {
            weight[a] += p.power;
            sizes[a] += 1;
        }
        let mut improved = false;
        for (i, p) in points.iter().enumerate() {
            let from = assign[i];
            if sizes[from] < 2 || !(weight[from] - p.power > 0.0) {
                continue;
            }
            let best = (0..k)
                .filter(|&j| j != from)
                .map(|j| (j, move_delta(p, from, j, centroids, &weight)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((to, delta)) = best {
                let current = objective(points, assign, centroids);
                if delta < -1e-12 * current {
                    assign[i] = to;
                    update_centroids(points, assign, centroids);
                    weight[from] -= p.power;
                    weight[to] += p.power;
                    sizes[from] -= 1;
                    sizes[to] += 1;
                    improved = true;
                    moved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    moved
}

struct Run {
    assign: Vec<usize>,
    centroids: Vec<f64>,
    objective: f64,
    history: Vec<f64>,
}

fn run_once(points: &[Mpc], k: usize, rng: &mut ChaCha8Rng) -> Run {
    let mut centroids = seed_centroids(points, k, rng);
    let mut assign = assign_nearest(points, &centroids);
    repair_empty(points, &mut assign, &mut centroids);
    update_centroids(points, &assign, &mut centroids);
    let mut history = vec![objective(points, &assign, &centroids)];

    for _ in 1..MAX_ITERATIONS {
        let mut next = assign_nearest(points, &centroids);
        repair_empty(points, &mut next, &mut centroids);
        if next == assign {
            break;
        }
        assign = next;
        update_centroids(points, &assign, &mut centroids);
        let j = objective(points, &assign, &centroids);
        let prev = *history.last().unwrap();
        debug_assert!(
            j <= prev + 1e-12 * prev.abs().max(f64::MIN_POSITIVE),
            "objective increased: {prev} -> {j}"
        );
        history.push(j);
    }
    if refine_single_moves(points, &mut assign, &mut centroids) {
        history.push(objective(points, &assign, &centroids));
    }
    let objective = *history.last().unwrap();
    Run {
        assign,
        centroids,
        objective,
        history,
    }
}

fn check(mpcs: &[Mpc], k: usize) -> Result<(), ClusterError> {
    if mpcs.is_empty() {
        return Err(ClusterError::Empty);
    }
    if k == 0 || k > mpcs.len() {
        return Err(ClusterError::KOutOfRange { k, n: mpcs.len() });
    }
    Ok(())
}

fn build(points: &[Mpc], run: Run, snapshot_time: f64) -> Clustering {
    let k = run.centroids.len();
    let mut groups: Vec<Vec<Mpc>> = vec![Vec::new(); k];
    for (p, &a) in points.iter().zip(&run.assign) {
        groups[a].push(*p);
    }
    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|m| Cluster::from_members(String::new(), snapshot_time, m))
        .collect();
    clusters.sort_by(|a, b| a.centroid_delay.total_cmp(&b.centroid_delay));
    Clustering {
        clusters,
        objective: run.objective,
        history: run.history,
    }
}

/// Single k-power-means run with seed `seed`.
pub fn k_power_means(mpcs: &[Mpc], k: usize, seed: u64) -> Result<Clustering, ClusterError> {
    k_power_means_restarts(mpcs, k, seed, 1)
}

/// Best of `restarts` runs (lowest objective, earliest run on ties). Run `r`
/// draws from stream `r` of the seed.
pub fn k_power_means_restarts(
    mpcs: &[Mpc],
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<Clustering, ClusterError> {
    check(mpcs, k)?;
    let points = canonical(mpcs);
    let time = points[0].snapshot_time;
    let mut best: Option<Run> = None;
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let run = run_once(&points, k, &mut rng);
        if best.as_ref().map_or(true, |b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(build(&points, best.expect("at least one run"), time))
}

/// Power-weighted Davies–Bouldin index; `None` when two centroids coincide or
/// fewer than two clusters are given.
///
/// Cluster spreads below `spread_floor` [s] are raised to it, so that a
/// cluster cannot look tighter than the delay resolution allows.
pub fn davies_bouldin(clusters: &[Cluster], spread_floor: f64) -> Option<f64> {
    let k = clusters.len();
    if k < 2 {
        return None;
    }
    let mut sum = 0.0;
    for (i, a) in clusters.iter().enumerate() {
        let mut worst = 0.0f64;
        for (j, b) in clusters.iter().enumerate() {
            if i == j {
                continue;
            }
            let sep = (a.centroid_delay - b.centroid_delay).abs();
            if sep == 0.0 {
                return None;
            }
            let spread =
                a.rms_delay_spread.max(spread_floor) + b.rms_delay_spread.max(spread_floor);
            worst = worst.max(spread / sep);
        }
        sum += worst;
    }
    Some(sum / k as f64)
}

/// Outcome of automatic K selection.
#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub k: usize,
    pub clustering: Clustering,
    /// Davies–Bouldin index per k (index 0 ↔ k = 1, always `None`).
    pub scores: Vec<Option<f64>>,
}

/// Picks K in `1..=min(k_max, n)` by the power-weighted Davies–Bouldin index.
///
/// Spreads are floored at `spread_floor` (typically the delay resolution).
/// Solutions in which every floored spread is zero carry no DB information
/// and are not ranked; if no k ≥ 2 has a rankable solution the choice falls
/// back to the largest relative drop of the objective. Zero total spread
/// selects k = 1.
pub fn select_k(
    mpcs: &[Mpc],
    k_max: usize,
    seed: u64,
    restarts: usize,
    spread_floor: f64,
) -> Result<KSelection, ClusterError> {
    if mpcs.is_empty() {
        return Err(ClusterError::Empty);
    }
    let k_hi = k_max.max(1).min(mpcs.len());
    let mut runs = vec![k_power_means_restarts(mpcs, 1, seed, restarts)?];
    let mut scores = vec![None];
    if k_hi == 1 || runs[0].objective == 0.0 {
        return Ok(KSelection {
            k: 1,
            clustering: runs.swap_remove(0),
            scores,
        });
    }
    for k in 2..=k_hi {
        let c = k_power_means_restarts(mpcs, k, seed, restarts)?;
        let degenerate = c
            .clusters
            .iter()
            .all(|cl| cl.rms_delay_spread.max(spread_floor) == 0.0);
        scores.push(if degenerate {
            None
        } else {
            davies_bouldin(&c.clusters, spread_floor)
        });
        runs.push(c);
    }
    let by_db = scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i);
    let idx = by_db.unwrap_or_else(|| {
        let mut best = 1;
        let mut best_drop = f64::NEG_INFINITY;
        for i in 1..runs.len() {
            let prev = runs[i - 1].objective;
            let drop = if prev > 0.0 {
                (prev - runs[i].objective) / prev
            } else {
                0.0
            };
            if drop > best_drop {
                best_drop = drop;
                best = i;
            }
        }
        best
    });
    Ok(KSelection {
        k: idx + 1,
        clustering: runs.swap_remove(idx),
        scores,
    })
}

/// Intra-cluster parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub centroid_delay: f64,
    pub total_power: f64,
    pub rms_delay_spread: f64,
    pub peak_power: f64,
    /// Least-squares slope of member power [dB] against delay [ns]; absent
    /// with fewer than two distinct delays.
    pub decay_db_per_ns: Option<f64>,
}

pub fn intra_cluster_params(cluster: &Cluster) -> ParamRecord {
    let pts: Vec<(f64, f64)> = cluster
        .members
        .iter()
        .filter(|m| m.power > 0.0)
        .map(|m| (m.delay * 1e9, 10.0 * m.power.log10()))
        .collect();
    ParamRecord {
        centroid_delay: cluster.centroid_delay,
        total_power: cluster.total_power,
        rms_delay_spread: cluster.rms_delay_spread,
        peak_power: cluster.peak_power,
        decay_db_per_ns: least_squares_slope(&pts),
    }
}

/// Ordinary least-squares slope of `y` on `x`; `None` unless at least two
/// distinct `x` values are present.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}
