//! Average-linkage agglomerative clustering with a distance-threshold cut.
//!
//! The merge loop keeps, for every active cluster `i`, its nearest active
//! neighbour among clusters with a larger id together with that distance.
//! Picking the smallest `(distance, i, nn[i])` then gives the
//! lexicographically smallest closest pair, which is the documented tie rule.
//! A cluster's id is its smallest member index, so merged clusters keep the
//! lower id. Cross-cluster averages are maintained with the Lance-Williams
//! update for unweighted pair-group averaging.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::FaceObservation;

use super::distance::{compute_distances, condensed_index, DistanceMatrix};
use super::{Clustering, Method, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AhcParams {
    pub metric: Metric,
    pub cut_threshold: f64,
    pub normalize_descriptors: bool,
}

impl Default for AhcParams {
    fn default() -> Self {
        AhcParams {
            metric: Metric::Euclidean,
            cut_threshold: 0.9,
            normalize_descriptors: true,
        }
    }
}

impl AhcParams {
    pub fn validate(&self) -> Result<()> {
        if self.cut_threshold.is_nan() || self.cut_threshold <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cut_threshold must be positive, got {}",
                self.cut_threshold
            )));
        }
        Ok(())
    }
}

const NONE: usize = usize::MAX;

struct Working {
    n: usize,
    d: Vec<f64>,
    active: Vec<bool>,
    nn: Vec<usize>,
    nn_dist: Vec<f64>,
}

impl Working {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        if i < j {
            self.d[condensed_index(self.n, i, j)]
        } else {
            self.d[condensed_index(self.n, j, i)]
        }
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let idx = if i < j {
            condensed_index(self.n, i, j)
        } else {
            condensed_index(self.n, j, i)
        };
        self.d[idx] = v;
    }

    /// Nearest active neighbour of `i` among ids greater than `i`.
    fn refresh(&mut self, i: usize) {
        let mut best = NONE;
        let mut best_d = f64::INFINITY;
        if i + 1 < self.n {
            let base = condensed_index(self.n, i, i + 1);
            for (off, &v) in self.d[base..base + (self.n - i - 1)].iter().enumerate() {
                let j = i + 1 + off;
                if self.active[j] && v < best_d {
                    best = j;
                    best_d = v;
                }
            }
        }
        self.nn[i] = best;
        self.nn_dist[i] = best_d;
    }
}

/// Merges clusters while the closest average-linkage distance is at most
/// `params.cut_threshold`, and returns the resulting partition.
pub fn ahc_average_linkage(dist: &DistanceMatrix, params: &AhcParams) -> Result<Clustering> {
    params.validate()?;
    let groups = average_linkage_groups(dist.n(), dist.condensed().to_vec(), params.cut_threshold);
    let meta = serde_json::to_value(params)?;
    Clustering::from_groups(dist.n(), groups, Vec::new(), Method::Ahc, meta)
}

fn average_linkage_groups(n: usize, condensed: Vec<f64>, cut: f64) -> Vec<Vec<usize>> {
    let mut w = Working {
        n,
        d: condensed,
        active: vec![true; n],
        nn: vec![NONE; n],
        nn_dist: vec![f64::INFINITY; n],
    };
    let mut size = vec![1usize; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for i in 0..n {
        w.refresh(i);
    }

    loop {
        let mut best = NONE;
        let mut best_d = f64::INFINITY;
        for i in 0..n {
            if w.active[i] && w.nn[i] != NONE && w.nn_dist[i] < best_d {
                best = i;
                best_d = w.nn_dist[i];
            }
        }
        if best == NONE || best_d > cut {
            break;
        }
        let (a, b) = (best, w.nn[best]);

        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if k != a && k != b && w.active[k] {
                let v = (sa * w.at(a, k) + sb * w.at(b, k)) / (sa + sb);
                w.set(a, k, v);
            }
        }
        w.active[b] = false;
        size[a] += size[b];
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);

        w.refresh(a);
        for k in 0..b {
            if !w.active[k] || k == a {
                continue;
            }
            if w.nn[k] == a || w.nn[k] == b {
                w.refresh(k);
            } else if k < a {
                let v = w.at(k, a);
                if v < w.nn_dist[k] || (v == w.nn_dist[k] && a < w.nn[k]) {
                    w.nn[k] = a;
                    w.nn_dist[k] = v;
                }
            }
        }
    }

    members
        .into_iter()
        .zip(&w.active)
        .filter_map(|(m, &alive)| alive.then_some(m))
        .collect()
}

/// Distances plus average-linkage clustering for one wearer's observations.
pub fn cluster_ahc(observations: &[FaceObservation], params: &AhcParams, exec: Execution) -> Result<Clustering> {
    params.validate()?;
    if observations.is_empty() {
        let meta = serde_json::to_value(params)?;
        return Clustering::from_groups(0, Vec::new(), Vec::new(), Method::Ahc, meta);
    }
    let dist = compute_distances(observations, params.metric, params.normalize_descriptors, exec)?;
    let n = dist.n();
    let groups = average_linkage_groups(n, dist.into_condensed(), params.cut_threshold);
    let meta = serde_json::to_value(params)?;
    Clustering::from_groups(n, groups, Vec::new(), Method::Ahc, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reid::distances_from_vectors;

    fn line(points: &[f64]) -> DistanceMatrix {
        let v: Vec<Vec<f64>> = points.iter().map(|&p| vec![p]).collect();
        let refs: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
        distances_from_vectors(&refs, Metric::Euclidean, false, Execution::Sequential).unwrap()
    }

    fn params(cut: f64) -> AhcParams {
        AhcParams {
            metric: Metric::Euclidean,
            cut_threshold: cut,
            normalize_descriptors: false,
        }
    }

    #[test]
    fn separated_pairs() {
        let c = ahc_average_linkage(&line(&[0.0, 0.1, 5.0, 5.1]), &params(1.0)).unwrap();
        assert_eq!(c.clusters(), &[vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn huge_cut_gives_one_cluster() {
        let c = ahc_average_linkage(&line(&[0.0, 3.0, 100.0, -40.0, 7.5]), &params(1e300)).unwrap();
        assert_eq!(c.num_clusters(), 1);
    }

    #[test]
    fn average_not_single_linkage() {
        // single linkage would chain 0-1-2 at cut 1.1; average of {0,1} to 2 is 1.5
        let c = ahc_average_linkage(&line(&[0.0, 1.0, 2.0]), &params(1.1)).unwrap();
        assert_eq!(c.num_clusters(), 2);
        assert_eq!(c.clusters(), &[vec![0, 1], vec![2]]);
    }

    #[test]
    fn ties_merge_lowest_pair_first() {
        // 0-1 and 1-2 tie at 1; (0,1) merges first, then {0,1}-2 is at 1.5
        let c = ahc_average_linkage(&line(&[0.0, 1.0, 2.0]), &params(1.0)).unwrap();
        assert_eq!(c.clusters(), &[vec![0, 1], vec![2]]);
    }

    #[test]
    fn rejects_non_positive_cut() {
        assert!(ahc_average_linkage(&line(&[0.0, 1.0]), &params(0.0)).is_err());
        assert!(ahc_average_linkage(&line(&[0.0, 1.0]), &params(f64::NAN)).is_err());
    }

    #[test]
    fn single_point() {
        let c = ahc_average_linkage(&line(&[4.0]), &params(1.0)).unwrap();
        assert_eq!(c.clusters(), &[vec![0]]);
    }
}
