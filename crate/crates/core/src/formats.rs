//! On-disk artifact formats shared by the CLI stages.
//!
//! Line-record files (clusterings, interactions) are JSON Lines whose first
//! record carries the run provenance. Reports are pretty-printed JSON objects
//! with a `provenance` field.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{Dataset, FaceObservation, ObsKey};
use crate::reid::{Clustering, Method};
use crate::segmentation::Interaction;

/// Fingerprint plus the full configuration that produced an artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub fingerprint: String,
    pub config: serde_json::Value,
}

impl Provenance {
    /// SHA-256 over the compact JSON form of `config`.
    pub fn of<T: Serialize>(config: &T) -> Result<Self> {
        let value = serde_json::to_value(config)?;
        let bytes = serde_json::to_vec(&value)?;
        Ok(Provenance {
            fingerprint: hex::encode(Sha256::digest(&bytes)),
            config: value,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub body: T,
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub fn write_report<T: Serialize>(path: &Path, provenance: &Provenance, body: &T) -> Result<()> {
    let mut w = create(path)?;
    let report = Report {
        provenance: provenance.clone(),
        body,
    };
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_report<T: DeserializeOwned>(path: &Path) -> Result<Report<T>> {
    Ok(serde_json::from_reader(open(path)?)?)
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    provenance: Provenance,
}

fn write_lines<W: Write, T: Serialize>(mut w: W, provenance: &Provenance, items: &[T]) -> std::io::Result<()> {
    serde_json::to_writer(
        &mut w,
        &HeaderLine {
            provenance: provenance.clone(),
        },
    )?;
    w.write_all(b"\n")?;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

fn read_lines<R: BufRead, T: DeserializeOwned>(r: R) -> Result<(Option<Provenance>, Vec<T>)> {
    let mut provenance = None;
    let mut items = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::MalformedLine {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Ok(h) = serde_json::from_str::<HeaderLine>(&line) {
                provenance = Some(h.provenance);
                continue;
            }
        }
        items.push(serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok((provenance, items))
}

pub fn write_interactions<W: Write>(
    w: W,
    provenance: &Provenance,
    interactions: &[Interaction],
) -> std::io::Result<()> {
    write_lines(w, provenance, interactions)
}

pub fn read_interactions<R: BufRead>(r: R) -> Result<(Option<Provenance>, Vec<Interaction>)> {
    read_lines(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum ClusteringLine {
    Wearer {
        wearer_id: String,
        method: Method,
        params: serde_json::Value,
        clusters: usize,
        discarded: usize,
    },
    Assign {
        wearer_id: String,
        image_id: String,
        face_index: u32,
        cluster: Option<usize>,
    },
}

/// One wearer's clustering together with the observations it indexes.
pub struct WearerClustering<'a> {
    pub wearer_id: &'a str,
    pub clustering: &'a Clustering,
    pub observations: &'a [FaceObservation],
}

/// Writes clusterings as line records: a params record per wearer, then one
/// `observation key -> cluster id` record per observation (`null` = discarded).
pub fn write_clusterings<W: Write>(
    w: W,
    provenance: &Provenance,
    parts: &[WearerClustering<'_>],
) -> std::io::Result<()> {
    let mut lines = Vec::new();
    for p in parts {
        lines.push(ClusteringLine::Wearer {
            wearer_id: p.wearer_id.to_string(),
            method: p.clustering.method(),
            params: p.clustering.params().clone(),
            clusters: p.clustering.num_clusters(),
            discarded: p.clustering.discarded().len(),
        });
        for (o, c) in p.observations.iter().zip(p.clustering.assignment()) {
            lines.push(ClusteringLine::Assign {
                wearer_id: o.wearer_id.clone(),
                image_id: o.image_id.clone(),
                face_index: o.face_index,
                cluster: *c,
            });
        }
    }
    write_lines(w, provenance, &lines)
}

/// Reads a clustering file back against `dataset`, one clustering per wearer
/// aligned with that wearer's observation order.
pub fn read_clusterings<R: BufRead>(r: R, dataset: &Dataset) -> Result<BTreeMap<String, Clustering>> {
    let (_, lines): (_, Vec<ClusteringLine>) = read_lines(r)?;
    let mut meta: BTreeMap<String, (Method, serde_json::Value)> = BTreeMap::new();
    let mut assigned: HashMap<ObsKey, Option<usize>> = HashMap::new();
    for line in lines {
        match line {
            ClusteringLine::Wearer {
                wearer_id,
                method,
                params,
                ..
            } => {
                meta.insert(wearer_id, (method, params));
            }
            ClusteringLine::Assign {
                wearer_id,
                image_id,
                face_index,
                cluster,
            } => {
                assigned.insert(
                    ObsKey {
                        wearer_id,
                        image_id,
                        face_index,
                    },
                    cluster,
                );
            }
        }
    }

    let mut out = BTreeMap::new();
    for (wearer, (method, params)) in meta {
        let slice = dataset.slice(&wearer, None)?;
        let obs = slice.observations();
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut discarded = Vec::new();
        for (i, o) in obs.iter().enumerate() {
            let key = o.key();
            match assigned.get(&key) {
                Some(Some(c)) => groups.entry(*c).or_default().push(i),
                Some(None) => discarded.push(i),
                None => return Err(Error::MissingFromClustering(key.to_string())),
            }
        }
        let n_ids = groups.keys().next_back().map_or(0, |m| m + 1);
        if n_ids != groups.len() {
            return Err(Error::InvalidParameter(format!(
                "cluster ids for {wearer} are not dense"
            )));
        }
        let clustering =
            Clustering::from_ordered_groups(obs.len(), groups.into_values().collect(), discarded, method, params)?;
        out.insert(wearer, clustering);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::DESCRIPTOR_DIM;
    use chrono::DateTime;

    fn obs(i: usize) -> FaceObservation {
        let t = DateTime::parse_from_rfc3339("2016-03-01T10:00:00+01:00").unwrap()
            + chrono::Duration::seconds(30 * i as i64);
        FaceObservation {
            wearer_id: "u1".into(),
            day: t.date_naive(),
            timestamp: t,
            image_id: format!("img{i}"),
            face_index: 0,
            descriptor: vec![i as f64; DESCRIPTOR_DIM],
        }
    }

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let a = Provenance::of(&serde_json::json!({"x": 1})).unwrap();
        let b = Provenance::of(&serde_json::json!({"x": 1})).unwrap();
        let c = Provenance::of(&serde_json::json!({"x": 2})).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.fingerprint, c.fingerprint);
        assert_eq!(a.fingerprint.len(), 64);
    }

    #[test]
    fn clustering_file_round_trip() {
        let ds = Dataset::new((0..5).map(obs).collect(), vec![]).unwrap();
        let c = Clustering::from_groups(
            5,
            vec![vec![0, 2], vec![1, 4]],
            vec![3],
            Method::Ahc,
            serde_json::json!({"cut": 0.9}),
        )
        .unwrap();
        let prov = Provenance::of(&1).unwrap();
        let mut buf = Vec::new();
        write_clusterings(
            &mut buf,
            &prov,
            &[WearerClustering {
                wearer_id: "u1",
                clustering: &c,
                observations: ds.observations(),
            }],
        )
        .unwrap();
        let back = read_clusterings(&buf[..], &ds).unwrap();
        assert_eq!(back["u1"], c);
    }

    #[test]
    fn interactions_round_trip() {
        let o = obs(0);
        let i = Interaction {
            wearer_id: "u1".into(),
            person_cluster_id: 3,
            day: o.day,
            start: o.timestamp,
            end: o.timestamp + chrono::Duration::minutes(4),
            duration_minutes: 4.0,
            observation_count: 9,
        };
        let prov = Provenance::of(&"cfg").unwrap();
        let mut buf = Vec::new();
        write_interactions(&mut buf, &prov, std::slice::from_ref(&i)).unwrap();
        let (p, back) = read_interactions(&buf[..]).unwrap();
        assert_eq!(p, Some(prov));
        assert_eq!(back, vec![i]);
    }
}
