use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub const MAX_ITERATIONS: usize = 100;
/// Range the elbow choice is clamped into.
pub const K_CLAMP: RangeInclusive<usize> = 3..=5;
/// Seeded restarts per k when tracing the elbow curve.
pub const ELBOW_RESTARTS: u64 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("cannot form {k} cluster(s) from {n} point(s)")]
    InsufficientPoints { k: usize, n: usize },
    #[error("vectors have inconsistent dimensions")]
    DimensionMismatch,
    #[error("k range {start}..={end} is empty or starts below 1")]
    BadRange { start: usize, end: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster<T> {
    pub id: usize,
    pub members: Vec<usize>,
    pub centroid: Vec<T>,
}

impl<T> Cluster<T> {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel<T> {
    pub clusters: Vec<Cluster<T>>,
    /// Cluster id per input point.
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after each iteration.
    pub sse_history: Vec<T>,
    pub iterations: usize,
}

impl<T: Real> ClusterModel<T> {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn sse(&self) -> T {
        self.sse_history.last().copied().unwrap_or_else(T::zero)
    }
}

pub fn squared_distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

fn nearest<T: Real>(point: &[T], centroids: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn check_input<T: Real>(vectors: &[Vec<T>], k: usize) -> Result<(), ClusterError> {
    if k == 0 || k > vectors.len() {
        return Err(ClusterError::InsufficientPoints { k, n: vectors.len() });
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(ClusterError::DimensionMismatch);
    }
    Ok(())
}

// k-means++: first centre uniform, the rest drawn proportionally to the
// squared distance from the nearest chosen centre.
fn seed_centroids<T: Real>(vectors: &[Vec<T>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let n = vectors.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = vectors
        .iter()
        .map(|v| squared_distance(v, &vectors[chosen[0]]).to_f64_lossy())
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            if d2[pick] == 0.0 {
                // rounding ran past the last positive weight
                pick = d2.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, v) in vectors.iter().enumerate() {
            let d = squared_distance(v, &vectors[next]).to_f64_lossy();
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    chosen.into_iter().map(|i| vectors[i].clone()).collect()
}

fn means<T: Real>(vectors: &[Vec<T>], assignments: &[usize], k: usize) -> Vec<Vec<T>> {
    let dim = vectors[0].len();
    let mut sums = vec![vec![T::zero(); dim]; k];
    let mut counts = vec![0usize; k];
    for (v, &a) in vectors.iter().zip(assignments) {
        counts[a] += 1;
        for (s, &x) in sums[a].iter_mut().zip(v) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        let c = T::from_count(c.max(1));
        s.iter_mut().for_each(|x| *x /= c);
    }
    sums
}

fn sse<T: Real>(vectors: &[Vec<T>], assignments: &[usize], centroids: &[Vec<T>]) -> T {
    vectors
        .iter()
        .zip(assignments)
        .fold(T::zero(), |acc, (v, &a)| acc + squared_distance(v, &centroids[a]))
}

// Gives every empty cluster the point farthest from its current centroid,
// taken from clusters that can spare one.
fn repair_empty<T: Real>(vectors: &[Vec<T>], assignments: &mut [usize], centroids: &mut [Vec<T>]) -> bool {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    let mut repaired = false;
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let donor = (0..vectors.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .max_by(|&i, &j| {
                let di = squared_distance(&vectors[i], &centroids[assignments[i]]);
                let dj = squared_distance(&vectors[j], &centroids[assignments[j]]);
                di.partial_cmp(&dj).unwrap_or(std::cmp::Ordering::Equal).then(j.cmp(&i))
            });
        if let Some(i) = donor {
            counts[assignments[i]] -= 1;
            counts[empty] += 1;
            assignments[i] = empty;
            centroids[empty] = vectors[i].clone();
            repaired = true;
        }
    }
    repaired
}

/// Lloyd iterations from k-means++ seeding. Inputs are expected to be
/// unit-normalized so squared Euclidean distance orders like cosine.
pub fn kmeans<T: Real>(vectors: &[Vec<T>], k: usize, seed: u64) -> Result<ClusterModel<T>, ClusterError> {
    check_input(vectors, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(vectors, k, &mut rng);
    let mut assignments: Vec<usize> = Vec::new();
    let mut history: Vec<T> = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let mut next: Vec<usize> = vectors.iter().map(|v| nearest(v, &centroids).0).collect();
        let repaired = repair_empty(vectors, &mut next, &mut centroids);
        if !repaired && next == assignments {
            break;
        }
        assignments = next;
        centroids = means(vectors, &assignments, k);
        let cost = sse(vectors, &assignments, &centroids);
        if let Some(&prev) = history.last() {
            let slack = T::from_f64_lossy(1e-9) * (T::one() + prev.abs());
            assert!(cost <= prev + slack, "k-means objective increased");
        }
        history.push(cost);
        iterations += 1;
    }
    let clusters = (0..k)
        .map(|id| Cluster {
            id,
            members: (0..vectors.len()).filter(|&i| assignments[i] == id).collect(),
            centroid: centroids[id].clone(),
        })
        .collect();
    Ok(ClusterModel {
        clusters,
        assignments,
        sse_history: history,
        iterations,
    })
}

/// Lowest-SSE model over `restarts` seeds derived from `seed`.
pub fn kmeans_best<T: Real>(
    vectors: &[Vec<T>],
    k: usize,
    seed: u64,
    restarts: u64,
) -> Result<ClusterModel<T>, ClusterError> {
    let mut best = kmeans(vectors, k, seed)?;
    for r in 1..restarts {
        let m = kmeans(vectors, k, seed.wrapping_add(r.wrapping_mul(0x9E37_79B9_7F4A_7C15)))?;
        if m.sse() < best.sse() {
            best = m;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowChoice<T> {
    pub k: usize,
    /// Curvature pick before clamping.
    pub raw_k: usize,
    pub clamped: bool,
    pub sse: Vec<(usize, T)>,
}

/// k at the largest second difference of the SSE curve (smallest k on ties),
/// then clamped into [`K_CLAMP`]. Ranges of fewer than three values return
/// their lower bound before clamping.
pub fn select_k_elbow<T: Real>(
    vectors: &[Vec<T>],
    k_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<ElbowChoice<T>, ClusterError> {
    let (start, end) = (*k_range.start(), *k_range.end());
    if start == 0 || start > end {
        return Err(ClusterError::BadRange { start, end });
    }
    check_input(vectors, end)?;
    let mut curve = Vec::with_capacity(end - start + 1);
    for k in start..=end {
        curve.push((k, kmeans_best(vectors, k, seed, ELBOW_RESTARTS)?.sse()));
    }
    let mut raw_k = start;
    if curve.len() >= 3 {
        let mut best = T::neg_infinity();
        for w in curve.windows(3) {
            let curvature = w[0].1 - w[1].1 - w[1].1 + w[2].1;
            if curvature > best {
                best = curvature;
                raw_k = w[1].0;
            }
        }
    }
    let k = raw_k.clamp(*K_CLAMP.start(), *K_CLAMP.end());
    Ok(ElbowChoice {
        k,
        raw_k,
        clamped: k != raw_k,
        sse: curve,
    })
}
