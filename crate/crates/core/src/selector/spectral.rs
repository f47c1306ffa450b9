//! Normalized spectral clustering: Gaussian affinity, symmetric normalized
//! affinity `D^-1/2 A D^-1/2`, top-k eigenvectors, row normalization, then
//! k-means in the spectral embedding.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::kmeans::{kmeans_points, sq_dist, Points};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

const DEGREE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct Spectral {
    pub assignments: Vec<usize>,
    pub sigma: f64,
    /// The k largest eigenvalues of the normalized affinity, descending.
    pub eigenvalues: Vec<f64>,
}

/// Median of all pairwise Euclidean distances (i < j).
pub fn median_distance(points: &Points) -> f64 {
    let mut d = Vec::with_capacity(points.n * points.n.saturating_sub(1) / 2);
    for i in 0..points.n {
        for j in i + 1..points.n {
            d.push(sq_dist(points.row(i), points.row(j)).sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len() / 2;
    if d.len() % 2 == 1 {
        d[m]
    } else {
        0.5 * (d[m - 1] + d[m])
    }
}

pub fn spectral_cluster(
    features: &EmbeddingMatrix,
    k: usize,
    sigma: Option<f64>,
    seed: u64,
    max_iters: usize,
) -> Result<Spectral> {
    let mut rng = <StreamRng as rand::SeedableRng>::seed_from_u64(seed);
    spectral_points(&Points::from(features), k, sigma, &mut rng, max_iters)
}

pub fn spectral_points(
    points: &Points,
    k: usize,
    sigma: Option<f64>,
    rng: &mut StreamRng,
    max_iters: usize,
) -> Result<Spectral> {
    let n = points.n;
    if k == 0 || k > n {
        return Err(Error::PoolTooSmall {
            pool: n,
            requested: k,
        });
    }
    let sigma = match sigma {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::ConfigInvalid(format!("sigma must be positive, got {s}"))),
        None => {
            let s = median_distance(points);
            if s <= 0.0 {
                return Err(Error::ConfigInvalid(
                    "median pairwise distance is zero; set sigma explicitly".into(),
                ));
            }
            s
        }
    };
    if k == 1 {
        return Ok(Spectral {
            assignments: vec![0; n],
            sigma,
            eigenvalues: vec![1.0],
        });
    }
    if k == n {
        return Ok(Spectral {
            assignments: (0..n).collect(),
            sigma,
            eigenvalues: Vec::new(),
        });
    }

    let denom = 2.0 * sigma * sigma;
    let mut affinity = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let a = (-sq_dist(points.row(i), points.row(j)) / denom).exp();
            affinity[(i, j)] = a;
            affinity[(j, i)] = a;
        }
    }
    let mut inv_sqrt_degree = Vec::with_capacity(n);
    for i in 0..n {
        let d: f64 = affinity.row(i).sum();
        if d < DEGREE_EPS {
            return Err(Error::DegenerateAffinity(i));
        }
        inv_sqrt_degree.push(1.0 / d.sqrt());
    }
    for i in 0..n {
        for j in 0..n {
            affinity[(i, j)] *= inv_sqrt_degree[i] * inv_sqrt_degree[j];
        }
    }

    let eig = SymmetricEigen::try_new(affinity, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigensolver("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let top = &order[..k];

    let mut embedding = vec![0.0; n * k];
    for (col, &e) in top.iter().enumerate() {
        let v = eig.eigenvectors.column(e);
        // fix the sign so the largest-magnitude entry is positive
        let mut pivot = 0;
        for i in 1..n {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            embedding[i * k + col] = sign * v[i];
        }
    }
    for row in embedding.chunks_mut(k) {
        let len = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len > 0.0 {
            row.iter_mut().for_each(|v| *v /= len);
        }
    }

    let km = kmeans_points(&Points::new(n, k, embedding), k, rng, max_iters)?;
    Ok(Spectral {
        assignments: km.assignments,
        sigma,
        eigenvalues: top.iter().map(|&e| eig.eigenvalues[e]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(&[[0f32, 0.], [0., 1.], [10., 10.], [10., 11.]]).unwrap()
    }

    #[test]
    fn toy_partition() {
        let s = spectral_cluster(&toy(), 2, Some(1.0), 5, 100).unwrap();
        assert_eq!(s.assignments[0], s.assignments[1]);
        assert_eq!(s.assignments[2], s.assignments[3]);
        assert_ne!(s.assignments[0], s.assignments[2]);
    }

    #[test]
    fn degenerate_kernel_reported() {
        // sigma far below the spacing: off-diagonal affinities underflow to zero
        let err = spectral_cluster(&toy(), 2, Some(1e-3), 5, 100).unwrap_err();
        assert!(matches!(err, Error::DegenerateAffinity(0)));
    }

    #[test]
    fn trivial_cluster_counts() {
        assert_eq!(spectral_cluster(&toy(), 1, None, 0, 10).unwrap().assignments, vec![0; 4]);
        assert_eq!(
            spectral_cluster(&toy(), 4, None, 0, 10).unwrap().assignments,
            vec![0, 1, 2, 3]
        );
    }

    #[test]
    fn median_of_toy_distances() {
        // sorted distances: 1, 1, sqrt(181), sqrt(200), sqrt(200), sqrt(221)
        let m = median_distance(&Points::from(&toy()));
        let d = 0.5 * (181f64.sqrt() + 200f64.sqrt());
        assert!((m - d).abs() < 1e-12);
    }
}
