use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::FaceObservation;

use super::Metric;

/// Symmetric pairwise dissimilarities, stored as the strict upper triangle
/// in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    upper: Vec<f64>,
    metric: Metric,
}

#[inline]
pub(crate) fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl DistanceMatrix {
    /// Wraps a strict upper triangle of length `n (n - 1) / 2`.
    pub fn from_condensed(n: usize, upper: Vec<f64>, metric: Metric) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(Error::InvalidDistanceMatrix(format!(
                "{} entries for n = {n}, expected {expected}",
                upper.len()
            )));
        }
        if let Some(v) = upper.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDistanceMatrix(format!(
                "entry {v} is negative or not finite"
            )));
        }
        Ok(DistanceMatrix { n, upper, metric })
    }

    /// Builds from a full square matrix, which must be symmetric with a zero diagonal.
    pub fn from_square(rows: &[Vec<f64>], metric: Metric) -> Result<Self> {
        let n = rows.len();
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidDistanceMatrix("matrix is not square".into()));
            }
            if row[i] != 0.0 {
                return Err(Error::InvalidDistanceMatrix(format!("diagonal entry {i} is not zero")));
            }
            for j in i + 1..n {
                if row[j] != rows[j][i] {
                    return Err(Error::InvalidDistanceMatrix(format!(
                        "entry ({i}, {j}) is not symmetric"
                    )));
                }
                upper.push(row[j]);
            }
        }
        Self::from_condensed(n, upper, metric)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.upper[condensed_index(self.n, i, j)],
            std::cmp::Ordering::Greater => self.upper[condensed_index(self.n, j, i)],
        }
    }

    pub fn condensed(&self) -> &[f64] {
        &self.upper
    }

    pub(crate) fn into_condensed(self) -> Vec<f64> {
        self.upper
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Copies the vectors, L2-normalizing when asked. Zero vectors are rejected
/// wherever they would make the metric undefined.
pub(crate) fn prepare(vectors: &[&[f64]], metric: Metric, normalize: bool) -> Result<Vec<Vec<f64>>> {
    vectors
        .iter()
        .enumerate()
        .map(|(index, v)| {
            let norm = l2_norm(v);
            let degenerate = match metric {
                Metric::Euclidean => normalize && norm == 0.0,
                Metric::Cosine => norm == 0.0,
                Metric::Correlation => v.iter().all(|&x| x == v[0]),
            };
            if degenerate {
                return Err(Error::DegenerateVector {
                    index,
                    metric: metric.to_string(),
                });
            }
            Ok(if normalize {
                v.iter().map(|x| x / norm).collect()
            } else {
                v.to_vec()
            })
        })
        .collect()
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn cosine(a: &[f64], b: &[f64], sq_a: f64, sq_b: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - (dot / (sq_a * sq_b).sqrt()).clamp(-1.0, 1.0)).max(0.0)
}

/// Pairwise dissimilarities of arbitrary-length vectors.
///
/// Rows of the upper triangle are computed independently, in parallel when
/// `exec` allows.
pub fn distances_from_vectors(
    vectors: &[&[f64]],
    metric: Metric,
    normalize: bool,
    exec: Execution,
) -> Result<DistanceMatrix> {
    let n = vectors.len();
    if n == 0 {
        return Err(Error::InvalidParameter("no observations to compare".into()));
    }
    let mut prepared = prepare(vectors, metric, normalize)?;
    if metric == Metric::Correlation {
        // 1 - r is the cosine distance between mean-centered vectors
        for v in &mut prepared {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter_mut().for_each(|x| *x -= mean);
        }
    }
    let sq: Vec<f64> = prepared.iter().map(|v| v.iter().map(|x| x * x).sum()).collect();

    let rows: Vec<Vec<f64>> = exec.map_range(n, |i| {
        (i + 1..n)
            .map(|j| match metric {
                Metric::Euclidean => euclidean(&prepared[i], &prepared[j]),
                Metric::Cosine | Metric::Correlation => cosine(&prepared[i], &prepared[j], sq[i], sq[j]),
            })
            .collect()
    });
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for row in rows {
        upper.extend(row);
    }
    DistanceMatrix::from_condensed(n, upper, metric)
}

pub fn compute_distances(
    observations: &[FaceObservation],
    metric: Metric,
    normalize: bool,
    exec: Execution,
) -> Result<DistanceMatrix> {
    let vectors: Vec<&[f64]> = observations.iter().map(|o| o.descriptor.as_slice()).collect();
    distances_from_vectors(&vectors, metric, normalize, exec)
}
