//! Normalized spectral clustering, used as a comparison baseline.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

use super::distance::distances_from_vectors;
use super::{Clustering, Method, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub k: usize,
    pub affinity_scale: f64,
    pub seed: u64,
    pub normalize_descriptors: bool,
}

impl SpectralParams {
    pub fn new(k: usize) -> Self {
        SpectralParams {
            k,
            affinity_scale: 0.5,
            seed: 0,
            normalize_descriptors: true,
        }
    }
}

const EIGEN_EPS: f64 = 1e-12;
const EIGEN_MAX_ITER: usize = 10_000;
const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 300;

/// Gaussian affinity, symmetric normalized Laplacian, then seeded k-means on
/// the row-normalized eigenvectors of the `k` smallest eigenvalues.
pub fn spectral(vectors: &[&[f64]], params: &SpectralParams, exec: Execution) -> Result<Clustering> {
    let n = vectors.len();
    let k = params.k;
    if k < 1 || k > n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if params.affinity_scale.is_nan() || params.affinity_scale <= 0.0 {
        return Err(Error::InvalidParameter("affinity_scale must be positive".into()));
    }
    let meta = serde_json::to_value(params)?;
    if k == 1 {
        return Ok(Clustering::from_labels(&vec![0; n], Method::Spectral, meta));
    }
    if k == n {
        let labels: Vec<usize> = (0..n).collect();
        return Ok(Clustering::from_labels(&labels, Method::Spectral, meta));
    }

    let dist = distances_from_vectors(vectors, Metric::Euclidean, params.normalize_descriptors, exec)?;
    let two_s2 = 2.0 * params.affinity_scale * params.affinity_scale;
    let affinity = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (-dist.get(i, j).powi(2) / two_s2).exp()
        }
    });
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = affinity.row(i).sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let laplacian = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - inv_sqrt_deg[i] * affinity[(i, j)] * inv_sqrt_deg[j]
    });

    let eig = SymmetricEigen::try_new(laplacian, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::NumericFailure("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));

    let embedding: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = order[..k].iter().map(|&c| eig.eigenvectors[(i, c)]).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect();

    let labels = kmeans(&embedding, k, params.seed);
    Ok(Clustering::from_labels(&labels, Method::Spectral, meta))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Best of several k-means++ restarts by inertia; deterministic per seed.
pub(crate) fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let (inertia, labels) = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, labels));
        }
    }
    best.map(|(_, l)| l).unwrap_or_default()
}

fn lloyd(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<usize>) {
    let n = points.len();
    let dim = points[0].len();

    // k-means++ seeding
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    let mut closest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &c) in closest.iter().enumerate() {
                if target < c {
                    idx = i;
                    break;
                }
                target -= c;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[pick].clone());
        for (c, p) in closest.iter_mut().zip(points) {
            *c = c.min(sq_dist(p, centers.last().unwrap()));
        }
    }

    let mut labels = vec![0usize; n];
    for iter in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(p, center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed && iter > 0 {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed an empty cluster at the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centers[labels[a]])
                            .total_cmp(&sq_dist(&points[b], &centers[labels[b]]))
                            .then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                centers[c] = points[far].clone();
                labels[far] = c;
            } else {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centers[l])).sum();
    (inertia, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for b in 0..2 {
            for _ in 0..per {
                let mut v: Vec<f64> = (0..128).map(|_| noise.sample(&mut rng)).collect();
                v[b] += 1.0;
                pts.push(v);
                truth.push(b);
            }
        }
        (pts, truth)
    }

    fn raw(k: usize) -> SpectralParams {
        SpectralParams {
            normalize_descriptors: false,
            ..SpectralParams::new(k)
        }
    }

    #[test]
    fn forced_extremes() {
        let (pts, _) = blobs(4, 1);
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let all = spectral(&refs, &raw(8), Execution::Sequential).unwrap();
        assert_eq!(all.num_clusters(), 8);
        let one = spectral(&refs, &raw(1), Execution::Sequential).unwrap();
        assert_eq!(one.num_clusters(), 1);
        assert!(spectral(&refs, &raw(0), Execution::Sequential).is_err());
        assert!(spectral(&refs, &raw(9), Execution::Sequential).is_err());
    }

    #[test]
    fn two_blobs_recovered() {
        let (pts, truth) = blobs(10, 2);
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let c = spectral(&refs, &raw(2), Execution::Parallel).unwrap();
        assert_eq!(c.num_clusters(), 2);
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert_eq!(c.cluster_of(i) == c.cluster_of(j), truth[i] == truth[j]);
            }
        }
        let again = spectral(&refs, &raw(2), Execution::Sequential).unwrap();
        assert_eq!(c, again);
    }
}
