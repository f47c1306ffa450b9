//! Lloyd's k-means with k-means++ seeding over dense `f64` points.

use rand::Rng;
use serde::Serialize;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Row-major `n x dim` points.
#[derive(Debug, Clone)]
pub struct Points {
    pub n: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Points {
    pub fn new(n: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * dim);
        Self { n, dim, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

impl From<&EmbeddingMatrix> for Points {
    fn from(m: &EmbeddingMatrix) -> Self {
        Self::new(
            m.count(),
            m.dim(),
            m.data().iter().map(|&v| v as f64).collect(),
        )
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct KMeans {
    /// `k` centers, each of length `dim`.
    pub centers: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after each center update.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeans {
    pub fn wcss(&self) -> f64 {
        self.wcss_history.last().copied().unwrap_or(0.0)
    }
}

/// Clusters the rows of `features` into `k` groups.
pub fn kmeans(features: &EmbeddingMatrix, k: usize, seed: u64, max_iters: usize) -> Result<KMeans> {
    let mut rng = <StreamRng as rand::SeedableRng>::seed_from_u64(seed);
    kmeans_points(&Points::from(features), k, &mut rng, max_iters)
}

/// Independent k-means++ initializations per call; the run with the lowest
/// final WCSS wins (earliest on ties).
pub const RESTARTS: usize = 8;

pub fn kmeans_points(
    points: &Points,
    k: usize,
    rng: &mut StreamRng,
    max_iters: usize,
) -> Result<KMeans> {
    if k == 0 || k > points.n {
        return Err(Error::PoolTooSmall {
            pool: points.n,
            requested: k,
        });
    }
    let mut best = lloyd(points, k, rng, max_iters);
    for _ in 1..RESTARTS {
        let run = lloyd(points, k, rng, max_iters);
        if run.wcss() < best.wcss() {
            best = run;
        }
    }
    Ok(best)
}

fn lloyd(points: &Points, k: usize, rng: &mut StreamRng, max_iters: usize) -> KMeans {
    let mut centers = seed_plus_plus(points, k, rng);
    let mut assignments = nearest_all(points, &centers);
    let mut wcss_history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters.max(1) {
        iterations += 1;
        repair_empty(points, &mut assignments, &mut centers, k);
        centers = means(points, &assignments, k);
        wcss_history.push(wcss(points, &assignments, &centers));
        let next = nearest_all(points, &centers);
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
    }
    if !converged {
        repair_empty(points, &mut assignments, &mut centers, k);
        centers = means(points, &assignments, k);
        wcss_history.push(wcss(points, &assignments, &centers));
    }
    KMeans {
        centers,
        assignments,
        wcss_history,
        iterations,
        converged,
    }
}

fn seed_plus_plus(points: &Points, k: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let mut chosen = vec![rng.random_range(0..points.n)];
    let mut d2: Vec<f64> = (0..points.n)
        .map(|i| sq_dist(points.row(i), points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total weight")
        } else {
            // every point coincides with a chosen center
            (0..points.n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    chosen.iter().map(|&i| points.row(i).to_vec()).collect()
}

/// Nearest center for one point; ties go to the lower center index.
pub(crate) fn nearest(point: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(point, center);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn nearest_all(points: &Points, centers: &[Vec<f64>]) -> Vec<usize> {
    (0..points.n).map(|i| nearest(points.row(i), centers)).collect()
}

fn means(points: &Points, assignments: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; points.dim]; k];
    let mut counts = vec![0usize; k];
    for (i, &c) in assignments.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(points.row(i)) {
            *s += v;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        debug_assert!(n > 0, "empty clusters are repaired before the update");
        s.iter_mut().for_each(|v| *v /= n as f64);
    }
    sums
}

/// Moves the point farthest from its center into each empty cluster.
fn repair_empty(points: &Points, assignments: &mut [usize], centers: &mut [Vec<f64>], k: usize) {
    let mut counts = vec![0usize; k];
    for &c in assignments.iter() {
        counts[c] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &c) in assignments.iter().enumerate() {
            if counts[c] < 2 {
                continue;
            }
            let d = sq_dist(points.row(i), &centers[c]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let (p, _) = best.expect("k <= n guarantees a cluster with two members");
        counts[assignments[p]] -= 1;
        assignments[p] = empty;
        counts[empty] = 1;
        centers[empty] = points.row(p).to_vec();
    }
}

pub fn wcss(points: &Points, assignments: &[usize], centers: &[Vec<f64>]) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(points.row(i), &centers[c]))
        .sum()
}
