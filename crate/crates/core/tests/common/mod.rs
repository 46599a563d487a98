#![allow(dead_code)]

use chrono::{DateTime, Duration};
use egosocial::ingest::{FaceObservation, Timestamp, DESCRIPTOR_DIM};
use egosocial::reid::Clustering;

pub fn ts(s: &str) -> Timestamp {
    DateTime::parse_from_rfc3339(s).unwrap()
}

pub fn obs_at(wearer: &str, t: Timestamp, n: usize, descriptor: Vec<f64>) -> FaceObservation {
    FaceObservation {
        wearer_id: wearer.into(),
        day: t.date_naive(),
        timestamp: t,
        image_id: format!("img{n:05}"),
        face_index: 0,
        descriptor,
    }
}

/// Observations every `step_secs` from `start` for `count` frames.
pub fn frames(wearer: &str, start: &str, step_secs: i64, count: usize, first_no: usize) -> Vec<FaceObservation> {
    let t0 = ts(start);
    (0..count)
        .map(|k| {
            obs_at(
                wearer,
                t0 + Duration::seconds(step_secs * k as i64),
                first_no + k,
                vec![1.0; DESCRIPTOR_DIM],
            )
        })
        .collect()
}

/// Sorted list of sorted groups, singletons included; comparable across
/// implementations regardless of cluster numbering.
pub fn canonical(groups: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    let mut g: Vec<Vec<usize>> = groups
        .into_iter()
        .map(|mut v| {
            v.sort_unstable();
            v
        })
        .collect();
    g.sort();
    g
}

pub fn partition_of(c: &Clustering) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = c.clusters().to_vec();
    groups.extend(c.discarded().iter().map(|&i| vec![i]));
    canonical(groups)
}

/// Textbook average linkage: recompute every inter-cluster mean from the raw
/// matrix at every step, merge the closest pair while it is within `cut`.
/// Ties go to the pair with the smallest (min member, min member).
pub fn naive_average_linkage(d: &[Vec<f64>], cut: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = (0..d.len()).map(|i| vec![i]).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut sum = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        sum += d[i][j];
                    }
                }
                let avg = sum / (clusters[a].len() * clusters[b].len()) as f64;
                let key = (clusters[a][0].min(clusters[b][0]), clusters[a][0].max(clusters[b][0]));
                let better = match best {
                    None => true,
                    Some((bd, ba, bb)) => {
                        let bkey = (
                            clusters[ba][0].min(clusters[bb][0]),
                            clusters[ba][0].max(clusters[bb][0]),
                        );
                        avg < bd || (avg == bd && key < bkey)
                    }
                };
                if better {
                    best = Some((avg, a, b));
                }
            }
        }
        match best {
            Some((dist, a, b)) if dist <= cut => {
                let moved = clusters.remove(b);
                clusters[a].extend(moved);
                clusters[a].sort_unstable();
            }
            _ => break,
        }
    }
    canonical(clusters)
}

pub fn condensed(d: &[Vec<f64>]) -> Vec<f64> {
    d.iter()
        .enumerate()
        .flat_map(|(i, row)| row[i + 1..].iter().copied())
        .collect()
}

pub fn euclidean_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| {
            points
                .iter()
                .map(|q| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .collect()
        })
        .collect()
}
