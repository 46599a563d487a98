//! Cluster robustness scoring with Pearson correlation.
//!
//! A cluster whose mean pairwise correlation reaches `robust_mean` is kept
//! as-is; one below `reject_mean` is dropped entirely. In between, members are
//! pruned worst-first while their mean correlation to the remaining members
//! is below `member_min`, then the survivor is re-scored.
//!
//! Dropped observations move to the clustering's discarded pool.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::FaceObservation;
use crate::reid::Clustering;

/// Pearson's r between two equal-length samples, clamped to `[-1, 1]`.
///
/// Computed with centred sums, which is algebraically the raw-sums form
/// `(n Σxy − Σx Σy) / (sqrt(n Σx² − (Σx)²) sqrt(n Σy² − (Σy)²))` without its
/// cancellation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation);
    }
    if is_constant(x) || is_constant(y) {
        return Err(Error::UndefinedCorrelation);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

/// Symmetric table of pairwise correlations; `None` marks undefined pairs.
struct CorrelationTable {
    n: usize,
    r: Vec<Option<f64>>,
}

impl CorrelationTable {
    fn new(members: &[&[f64]]) -> Self {
        let n = members.len();
        let mut r = vec![None; n * n];
        for i in 0..n {
            r[i * n + i] = Some(1.0);
            for j in i + 1..n {
                let v = pearson(members[i], members[j]).ok();
                r[i * n + j] = v;
                r[j * n + i] = v;
            }
        }
        CorrelationTable { n, r }
    }

    fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.r[i * self.n + j]
    }

    /// Mean over unordered pairs within `alive`; undefined pairs are skipped.
    fn mean(&self, alive: &[usize]) -> Option<f64> {
        let (mut sum, mut count) = (0.0, 0usize);
        for (a, &i) in alive.iter().enumerate() {
            for &j in &alive[a + 1..] {
                if let Some(v) = self.get(i, j) {
                    sum += v;
                    count += 1;
                }
            }
        }
        (count > 0).then(|| sum / count as f64)
    }

    /// Mean correlation of `i` to the other members of `alive`. A member with
    /// no defined correlation scores `-inf`.
    fn mean_to_rest(&self, i: usize, alive: &[usize]) -> f64 {
        let (mut sum, mut count) = (0.0, 0usize);
        for &j in alive {
            if j != i {
                if let Some(v) = self.get(i, j) {
                    sum += v;
                    count += 1;
                }
            }
        }
        if count == 0 {
            f64::NEG_INFINITY
        } else {
            sum / count as f64
        }
    }
}

/// Mean Pearson correlation over all unordered member pairs.
///
/// Pairs involving a constant vector are excluded; `None` when fewer than two
/// members or no pair is defined.
pub fn cluster_mean_correlation(members: &[&[f64]]) -> Option<f64> {
    if members.len() < 2 {
        return None;
    }
    let table = CorrelationTable::new(members);
    let all: Vec<usize> = (0..members.len()).collect();
    table.mean(&all)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyThresholds {
    pub robust_mean: f64,
    pub reject_mean: f64,
    pub member_min: f64,
}

impl Default for ConsistencyThresholds {
    fn default() -> Self {
        ConsistencyThresholds {
            robust_mean: 0.8,
            reject_mean: 0.4,
            member_min: 0.70,
        }
    }
}

impl ConsistencyThresholds {
    pub fn validate(&self) -> Result<()> {
        let in_range = |v: f64| (-1.0..=1.0).contains(&v);
        if !(in_range(self.reject_mean) && in_range(self.robust_mean) && self.reject_mean < self.robust_mean) {
            return Err(Error::InvalidParameter(format!(
                "need -1 <= reject_mean ({}) < robust_mean ({}) <= 1",
                self.reject_mean, self.robust_mean
            )));
        }
        if !in_range(self.member_min) {
            return Err(Error::InvalidParameter(format!(
                "member_min {} outside [-1, 1]",
                self.member_min
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterStatus {
    Robust,
    Pruned,
    Rejected,
    Singleton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterVerdict {
    /// Cluster id in the input clustering.
    pub cluster_id: usize,
    /// Cluster id in the filtered clustering, if the cluster survived.
    pub filtered_id: Option<usize>,
    pub size: usize,
    pub mean_pairwise_r: Option<f64>,
    pub final_mean_r: Option<f64>,
    pub status: ClusterStatus,
    /// Observation indices moved to the discarded pool.
    pub removed_members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub thresholds: ConsistencyThresholds,
    pub clusters: Vec<ClusterVerdict>,
}

impl ConsistencyReport {
    pub fn count(&self, status: ClusterStatus) -> usize {
        self.clusters.iter().filter(|c| c.status == status).count()
    }
}

/// Verdict for one cluster; `members` are observation indices.
fn judge(
    cluster_id: usize,
    members: &[usize],
    descriptors: &[&[f64]],
    t: &ConsistencyThresholds,
) -> (ClusterVerdict, Vec<usize>) {
    let mut verdict = ClusterVerdict {
        cluster_id,
        filtered_id: None,
        size: members.len(),
        mean_pairwise_r: None,
        final_mean_r: None,
        status: ClusterStatus::Singleton,
        removed_members: Vec::new(),
    };
    if members.len() < 2 {
        return (verdict, members.to_vec());
    }

    let vecs: Vec<&[f64]> = members.iter().map(|&m| descriptors[m]).collect();
    let table = CorrelationTable::new(&vecs);
    let mut alive: Vec<usize> = (0..members.len()).collect();
    let mean = table.mean(&alive);
    verdict.mean_pairwise_r = mean;
    verdict.final_mean_r = mean;

    let reject = |mut verdict: ClusterVerdict| {
        verdict.status = ClusterStatus::Rejected;
        verdict.removed_members = members.to_vec();
        (verdict, Vec::new())
    };

    let m = match mean {
        Some(m) => m,
        None => return reject(verdict),
    };
    if m >= t.robust_mean {
        verdict.status = ClusterStatus::Robust;
        return (verdict, members.to_vec());
    }
    if m < t.reject_mean {
        return reject(verdict);
    }

    let mut removed = Vec::new();
    while alive.len() >= 2 {
        // Lowest mean-to-rest, ties to the earliest position.
        let (pos, worst) = alive
            .iter()
            .enumerate()
            .map(|(p, &i)| (p, table.mean_to_rest(i, &alive)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        if worst >= t.member_min {
            break;
        }
        removed.push(members[alive.remove(pos)]);
    }

    let final_mean = table.mean(&alive);
    verdict.final_mean_r = final_mean;
    match final_mean {
        Some(fm) if alive.len() >= 2 && fm >= t.reject_mean => {
            verdict.status = ClusterStatus::Pruned;
            verdict.removed_members = removed;
            let kept = alive.iter().map(|&a| members[a]).collect();
            (verdict, kept)
        }
        _ => reject(verdict),
    }
}

/// Applies the robust / prune / reject rules to every cluster.
///
/// Surviving clusters are renumbered densely in their original order; every
/// dropped observation lands in the discarded pool.
pub fn apply_consistency(
    clustering: &Clustering,
    observations: &[FaceObservation],
    thresholds: &ConsistencyThresholds,
    exec: Execution,
) -> Result<(Clustering, ConsistencyReport)> {
    let descriptors: Vec<&[f64]> = observations.iter().map(|o| o.descriptor.as_slice()).collect();
    apply_consistency_to_vectors(clustering, &descriptors, thresholds, exec)
}

pub fn apply_consistency_to_vectors(
    clustering: &Clustering,
    descriptors: &[&[f64]],
    thresholds: &ConsistencyThresholds,
    exec: Execution,
) -> Result<(Clustering, ConsistencyReport)> {
    thresholds.validate()?;
    if clustering.len() != descriptors.len() {
        return Err(Error::InvalidParameter(format!(
            "clustering covers {} observations, got {} descriptors",
            clustering.len(),
            descriptors.len()
        )));
    }

    let judged = exec.map_slice(clustering.clusters(), |members| {
        // cluster id is filled in below
        judge(0, members, descriptors, thresholds)
    });

    let mut kept_groups = Vec::new();
    let mut discarded: Vec<usize> = clustering.discarded().to_vec();
    let mut verdicts = Vec::with_capacity(judged.len());
    for (cluster_id, (mut verdict, kept)) in judged.into_iter().enumerate() {
        verdict.cluster_id = cluster_id;
        discarded.extend(&verdict.removed_members);
        if !kept.is_empty() {
            verdict.filtered_id = Some(kept_groups.len());
            kept_groups.push(kept);
        }
        verdicts.push(verdict);
    }

    let filtered = Clustering::from_ordered_groups(
        clustering.len(),
        kept_groups,
        discarded,
        clustering.method(),
        clustering.params().clone(),
    )?;
    Ok((
        filtered,
        ConsistencyReport {
            thresholds: *thresholds,
            clusters: verdicts,
        },
    ))
}
