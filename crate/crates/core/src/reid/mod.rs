//! Identity clustering of face descriptors.
//!
//! [`ahc`] is the main method; [`meanshift`] and [`spectral`] are comparison
//! baselines. All of them produce a [`Clustering`] whose cluster ids are dense
//! and ordered by each cluster's smallest member index.

pub mod ahc;
pub mod distance;
pub mod meanshift;
pub mod spectral;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::FaceObservation;

pub use ahc::{ahc_average_linkage, cluster_ahc, AhcParams};
pub use distance::{compute_distances, distances_from_vectors, DistanceMatrix};
pub use meanshift::{meanshift, MeanShiftParams};
pub use spectral::{spectral, SpectralParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Cosine,
    Correlation,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
            Metric::Correlation => "correlation",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            "correlation" => Ok(Metric::Correlation),
            other => Err(Error::InvalidParameter(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ahc,
    MeanShift,
    Spectral,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ahc => "ahc",
            Method::MeanShift => "meanshift",
            Method::Spectral => "spectral",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ahc" => Ok(Method::Ahc),
            "meanshift" => Ok(Method::MeanShift),
            "spectral" => Ok(Method::Spectral),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

/// One configured clustering method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodSpec {
    Ahc(AhcParams),
    MeanShift(MeanShiftParams),
    Spectral(SpectralParams),
}

impl MethodSpec {
    pub fn method(&self) -> Method {
        match self {
            MethodSpec::Ahc(_) => Method::Ahc,
            MethodSpec::MeanShift(_) => Method::MeanShift,
            MethodSpec::Spectral(_) => Method::Spectral,
        }
    }

    /// Clusters one wearer's observations. Spectral `k` is capped at the
    /// number of observations.
    pub fn run(&self, observations: &[FaceObservation], exec: Execution) -> Result<Clustering> {
        let vectors: Vec<&[f64]> = observations.iter().map(|o| o.descriptor.as_slice()).collect();
        match self {
            MethodSpec::Ahc(p) => cluster_ahc(observations, p, exec),
            MethodSpec::MeanShift(p) => meanshift(&vectors, p, exec),
            MethodSpec::Spectral(p) => {
                if vectors.is_empty() {
                    let meta = serde_json::to_value(p)?;
                    return Clustering::from_groups(0, Vec::new(), Vec::new(), Method::Spectral, meta);
                }
                let capped = SpectralParams {
                    k: p.k.min(vectors.len()),
                    ..*p
                };
                spectral(&vectors, &capped, exec)
            }
        }
    }
}

/// A partition of observations `0..n` into identity clusters, plus a pool of
/// discarded observations that belong to no identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    assignment: Vec<Option<usize>>,
    clusters: Vec<Vec<usize>>,
    discarded: Vec<usize>,
    method: Method,
    params: serde_json::Value,
}

impl Clustering {
    /// Builds from per-observation labels of any numbering. Clusters are
    /// renumbered by smallest member.
    pub fn from_labels(labels: &[usize], method: Method, params: serde_json::Value) -> Self {
        let mut remap = std::collections::HashMap::new();
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            let id = *remap.entry(l).or_insert_with(|| {
                clusters.push(Vec::new());
                clusters.len() - 1
            });
            clusters[id].push(i);
        }
        let assignment = labels.iter().map(|l| Some(remap[l])).collect();
        Clustering {
            assignment,
            clusters,
            discarded: Vec::new(),
            method,
            params,
        }
    }

    /// Builds from member groups, renumbering them by smallest member.
    pub fn from_groups(
        n: usize,
        mut groups: Vec<Vec<usize>>,
        discarded: Vec<usize>,
        method: Method,
        params: serde_json::Value,
    ) -> Result<Self> {
        for g in &mut groups {
            g.sort_unstable();
        }
        groups.retain(|g| !g.is_empty());
        groups.sort_by_key(|g| g[0]);
        Self::from_ordered_groups(n, groups, discarded, method, params)
    }

    /// Builds from member groups keeping the given group order as cluster ids.
    pub fn from_ordered_groups(
        n: usize,
        groups: Vec<Vec<usize>>,
        mut discarded: Vec<usize>,
        method: Method,
        params: serde_json::Value,
    ) -> Result<Self> {
        let mut assignment: Vec<Option<usize>> = vec![None; n];
        let mut placed = vec![false; n];
        let mut clusters = Vec::with_capacity(groups.len());
        for (id, mut g) in groups.into_iter().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidParameter(format!("cluster {id} is empty")));
            }
            g.sort_unstable();
            for &m in &g {
                if m >= n || placed[m] {
                    return Err(Error::InvalidParameter(format!(
                        "observation {m} out of range or assigned twice"
                    )));
                }
                placed[m] = true;
                assignment[m] = Some(id);
            }
            clusters.push(g);
        }
        discarded.sort_unstable();
        for &m in &discarded {
            if m >= n || placed[m] {
                return Err(Error::InvalidParameter(format!(
                    "discarded observation {m} out of range or assigned twice"
                )));
            }
            placed[m] = true;
        }
        if let Some(m) = placed.iter().position(|p| !p) {
            return Err(Error::InvalidParameter(format!("observation {m} is unassigned")));
        }
        Ok(Clustering {
            assignment,
            clusters,
            discarded,
            method,
            params,
        })
    }

    /// Number of observations covered, including discarded ones.
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    pub fn cluster_of(&self, obs: usize) -> Option<usize> {
        self.assignment[obs]
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn discarded(&self) -> &[usize] {
        &self.discarded
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn params(&self) -> &serde_json::Value {
        &self.params
    }

    /// Labels with every discarded observation given its own fresh label.
    pub fn labels_with_discarded_as_singletons(&self) -> Vec<usize> {
        let mut next = self.clusters.len();
        self.assignment
            .iter()
            .map(|a| {
                a.unwrap_or_else(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    }

    /// Cross-checks assignment against cluster member lists.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = Self::from_ordered_groups(
            self.len(),
            self.clusters.clone(),
            self.discarded.clone(),
            self.method,
            self.params.clone(),
        )?;
        if rebuilt.assignment != self.assignment {
            return Err(Error::InvalidParameter(
                "assignment disagrees with cluster members".into(),
            ));
        }
        Ok(())
    }
}
