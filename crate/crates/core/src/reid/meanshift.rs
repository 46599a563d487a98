//! Flat-kernel mean shift, used as a comparison baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

use super::distance::{euclidean, prepare};
use super::{Clustering, Method, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftParams {
    /// `None` picks the median pairwise distance of a strided subsample.
    pub bandwidth: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
    pub normalize_descriptors: bool,
}

impl Default for MeanShiftParams {
    fn default() -> Self {
        MeanShiftParams {
            bandwidth: None,
            max_iter: 300,
            tol: 1e-6,
            normalize_descriptors: true,
        }
    }
}

const BANDWIDTH_SAMPLE: usize = 500;

/// Median pairwise euclidean distance over at most 500 evenly strided points.
pub fn estimate_bandwidth(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let take = n.min(BANDWIDTH_SAMPLE);
    if take < 2 {
        return 1.0;
    }
    let sample: Vec<&Vec<f64>> = (0..take).map(|k| &points[k * n / take]).collect();
    let mut d = Vec::with_capacity(take * (take - 1) / 2);
    for i in 0..take {
        for j in i + 1..take {
            d.push(euclidean(sample[i], sample[j]));
        }
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let m = if d.len() % 2 == 0 {
        (d[mid - 1] + d[mid]) / 2.0
    } else {
        d[mid]
    };
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

struct Shifted {
    mode: Vec<f64>,
    converged: bool,
}

fn seek_mode(start: &[f64], points: &[Vec<f64>], bandwidth: f64, max_iter: usize, tol: f64) -> Shifted {
    let dim = start.len();
    let mut pos = start.to_vec();
    for _ in 0..max_iter {
        let mut sum = vec![0.0; dim];
        let mut count = 0usize;
        for p in points {
            if euclidean(&pos, p) <= bandwidth {
                for (s, x) in sum.iter_mut().zip(p) {
                    *s += x;
                }
                count += 1;
            }
        }
        if count == 0 {
            return Shifted {
                mode: pos,
                converged: true,
            };
        }
        let next: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let shift = euclidean(&next, &pos);
        pos = next;
        if shift <= tol {
            return Shifted {
                mode: pos,
                converged: true,
            };
        }
    }
    Shifted {
        mode: pos,
        converged: false,
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Mode seeking from every point; points whose modes lie within half a
/// bandwidth of each other (transitively) share a cluster.
///
/// Points that hit `max_iter` keep their last position as their mode; the
/// count is recorded in the clustering's params as `unconverged`.
pub fn meanshift(vectors: &[&[f64]], params: &MeanShiftParams, exec: Execution) -> Result<Clustering> {
    if let Some(b) = params.bandwidth {
        if b.is_nan() || b <= 0.0 {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {b}")));
        }
    }
    if params.tol.is_nan() || params.tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let n = vectors.len();
    let points = if n == 0 {
        Vec::new()
    } else {
        prepare(vectors, Metric::Euclidean, params.normalize_descriptors)?
    };
    let bandwidth = params.bandwidth.unwrap_or_else(|| estimate_bandwidth(&points));

    let shifted = exec.map_range(n, |i| {
        seek_mode(&points[i], &points, bandwidth, params.max_iter, params.tol)
    });
    let unconverged = shifted.iter().filter(|s| !s.converged).count();

    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if euclidean(&shifted[i].mode, &shifted[j].mode) <= bandwidth / 2.0 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let labels: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let meta = serde_json::json!({
        "bandwidth": bandwidth,
        "max_iter": params.max_iter,
        "tol": params.tol,
        "normalize_descriptors": params.normalize_descriptors,
        "unconverged": unconverged,
    });
    Ok(Clustering::from_labels(&labels, Method::MeanShift, meta))
}
