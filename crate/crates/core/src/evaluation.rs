//! Clustering quality against ground-truth identities.
//!
//! The primary score is pair counting over unordered pairs of scored
//! observations. Pairs are only formed within a wearer, since identities are
//! clustered per photostream. BCubed precision/recall is reported alongside.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::consistency::{apply_consistency, ConsistencyThresholds};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::{Dataset, ObsKey};
use crate::reid::{Clustering, MethodSpec};

pub const UNKNOWN_LABEL: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    labels: HashMap<ObsKey, String>,
}

#[derive(Serialize, Deserialize)]
struct TruthRecord {
    wearer_id: String,
    image_id: String,
    face_index: u32,
    label: String,
}

impl GroundTruth {
    pub fn new(labels: HashMap<ObsKey, String>) -> Self {
        GroundTruth { labels }
    }

    pub fn label(&self, key: &ObsKey) -> Option<&str> {
        self.labels.get(key).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn parse<R: BufRead>(input: R) -> Result<Self> {
        let mut labels = HashMap::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::MalformedLine {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let r: TruthRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                line: i + 1,
                reason: e.to_string(),
            })?;
            let key = ObsKey {
                wearer_id: r.wearer_id,
                image_id: r.image_id,
                face_index: r.face_index,
            };
            if labels.insert(key, r.label).is_some() {
                return Err(Error::MalformedLine {
                    line: i + 1,
                    reason: "observation labeled twice".into(),
                });
            }
        }
        Ok(GroundTruth { labels })
    }

    /// Writes records in key order.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut keys: Vec<&ObsKey> = self.labels.keys().collect();
        keys.sort();
        for k in keys {
            let rec = TruthRecord {
                wearer_id: k.wearer_id.clone(),
                image_id: k.image_id.clone(),
                face_index: k.face_index,
                label: self.labels[k].clone(),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// How observations in the discarded pool are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardPolicy {
    #[default]
    Singletons,
    Exclude,
}

fn choose2(k: u64) -> u64 {
    k * k.saturating_sub(1) / 2
}

/// Pair and BCubed tallies, additive across independent groups.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub n_scored: u64,
    pub bcubed_precision_sum: f64,
    pub bcubed_recall_sum: f64,
}

impl Tally {
    /// Tallies predicted vs true labels via the contingency table.
    pub fn from_labels(pred: &[usize], truth: &[usize]) -> Self {
        assert_eq!(pred.len(), truth.len());
        let mut cell: HashMap<(usize, usize), u64> = HashMap::new();
        let mut by_pred: HashMap<usize, u64> = HashMap::new();
        let mut by_true: HashMap<usize, u64> = HashMap::new();
        for (&p, &t) in pred.iter().zip(truth) {
            *cell.entry((p, t)).or_default() += 1;
            *by_pred.entry(p).or_default() += 1;
            *by_true.entry(t).or_default() += 1;
        }
        let same_both: u64 = cell.values().map(|&c| choose2(c)).sum();
        let same_pred: u64 = by_pred.values().map(|&c| choose2(c)).sum();
        let same_true: u64 = by_true.values().map(|&c| choose2(c)).sum();

        let (mut bp, mut br) = (0.0, 0.0);
        for (&p, &t) in pred.iter().zip(truth) {
            let both = cell[&(p, t)] as f64;
            bp += both / by_pred[&p] as f64;
            br += both / by_true[&t] as f64;
        }
        Tally {
            tp: same_both,
            fp: same_pred - same_both,
            fn_: same_true - same_both,
            n_scored: pred.len() as u64,
            bcubed_precision_sum: bp,
            bcubed_recall_sum: br,
        }
    }

    pub fn add(&mut self, other: &Tally) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.n_scored += other.n_scored;
        self.bcubed_precision_sum += other.bcubed_precision_sum;
        self.bcubed_recall_sum += other.bcubed_recall_sum;
    }

    pub fn report(&self) -> EvalReport {
        let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let (bp, br) = if self.n_scored == 0 {
            (1.0, 1.0)
        } else {
            (
                self.bcubed_precision_sum / self.n_scored as f64,
                self.bcubed_recall_sum / self.n_scored as f64,
            )
        };
        EvalReport {
            precision,
            recall,
            f_measure: harmonic(precision, recall),
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
            n_scored: self.n_scored,
            bcubed_precision: bp,
            bcubed_recall: br,
            bcubed_f: harmonic(bp, br),
        }
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub n_scored: u64,
    pub bcubed_precision: f64,
    pub bcubed_recall: f64,
    pub bcubed_f: f64,
}

/// Scored (predicted, true) label pairs for one clustering.
fn scored_labels(
    clustering: &Clustering,
    keys: &[ObsKey],
    truth: &GroundTruth,
    policy: DiscardPolicy,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if clustering.len() != keys.len() {
        let missing = keys
            .get(clustering.len())
            .map_or_else(|| "?".to_string(), |k| k.to_string());
        return Err(Error::MissingFromClustering(missing));
    }
    let pred_all = clustering.labels_with_discarded_as_singletons();
    let mut label_ids: HashMap<&str, usize> = HashMap::new();
    let (mut pred, mut gold) = (Vec::new(), Vec::new());
    for (i, key) in keys.iter().enumerate() {
        let label = truth.label(key).ok_or_else(|| Error::MissingLabel(key.to_string()))?;
        if label == UNKNOWN_LABEL {
            continue;
        }
        if policy == DiscardPolicy::Exclude && clustering.cluster_of(i).is_none() {
            continue;
        }
        let next = label_ids.len();
        gold.push(*label_ids.entry(label).or_insert(next));
        pred.push(pred_all[i]);
    }
    Ok((pred, gold))
}

pub fn pairwise_tally(
    clustering: &Clustering,
    keys: &[ObsKey],
    truth: &GroundTruth,
    policy: DiscardPolicy,
) -> Result<Tally> {
    let (pred, gold) = scored_labels(clustering, keys, truth, policy)?;
    Ok(Tally::from_labels(&pred, &gold))
}

/// Pair-counting precision, recall and F-measure of one clustering.
///
/// `keys[i]` identifies observation `i` of the clustering.
pub fn pairwise_prf(
    clustering: &Clustering,
    keys: &[ObsKey],
    truth: &GroundTruth,
    policy: DiscardPolicy,
) -> Result<EvalReport> {
    Ok(pairwise_tally(clustering, keys, truth, policy)?.report())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEval {
    pub spec: MethodSpec,
    pub report: EvalReport,
}

/// Runs every method per wearer, applies the consistency filter to each
/// result, and pools the pair counts across wearers.
pub fn evaluate_methods(
    dataset: &Dataset,
    truth: &GroundTruth,
    specs: &[MethodSpec],
    thresholds: &ConsistencyThresholds,
    policy: DiscardPolicy,
    exec: Execution,
) -> Result<Vec<MethodEval>> {
    let wearers = dataset.wearers();
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut tally = Tally::default();
        for w in &wearers {
            let slice = dataset.slice(w, None)?;
            let obs = slice.observations();
            let raw = spec.run(obs, exec)?;
            let (filtered, _) = apply_consistency(&raw, obs, thresholds, exec)?;
            let keys: Vec<ObsKey> = obs.iter().map(|o| o.key()).collect();
            tally.add(&pairwise_tally(&filtered, &keys, truth, policy)?);
        }
        out.push(MethodEval {
            spec: *spec,
            report: tally.report(),
        });
    }
    Ok(out)
}

/// Text table with one row per method, values in percent.
pub fn render_eval_table(results: &[MethodEval]) -> String {
    let mut s = String::new();
    s.push_str("Method    | Precision | Recall | F-Measure | BCubed P | BCubed R | BCubed F\n");
    s.push_str("----------|-----------|--------|-----------|----------|----------|---------\n");
    for r in results {
        let e = &r.report;
        s.push_str(&format!(
            "{:<9} | {:>9.2} | {:>6.2} | {:>9.2} | {:>8.2} | {:>8.2} | {:>8.2}\n",
            r.spec.method().to_string(),
            e.precision * 100.0,
            e.recall * 100.0,
            e.f_measure * 100.0,
            e.bcubed_precision * 100.0,
            e.bcubed_recall * 100.0,
            e.bcubed_f * 100.0,
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reid::Method;
    use proptest::prelude::*;

    fn keys(n: usize) -> Vec<ObsKey> {
        (0..n)
            .map(|i| ObsKey {
                wearer_id: "u".into(),
                image_id: format!("i{i}"),
                face_index: 0,
            })
            .collect()
    }

    fn truth(labels: &[&str]) -> GroundTruth {
        GroundTruth::new(
            keys(labels.len())
                .into_iter()
                .zip(labels.iter().map(|s| s.to_string()))
                .collect(),
        )
    }

    fn clustering(labels: &[usize]) -> Clustering {
        Clustering::from_labels(labels, Method::Ahc, serde_json::Value::Null)
    }

    #[test]
    fn perfect_clustering() {
        let r = pairwise_prf(
            &clustering(&[0, 0, 1, 2, 2]),
            &keys(5),
            &truth(&["a", "a", "b", "c", "c"]),
            DiscardPolicy::Singletons,
        )
        .unwrap();
        assert_eq!((r.precision, r.recall, r.f_measure), (1.0, 1.0, 1.0));
        assert_eq!((r.bcubed_precision, r.bcubed_recall), (1.0, 1.0));
    }

    #[test]
    fn over_merged() {
        let r = pairwise_prf(
            &clustering(&[0, 0, 0]),
            &keys(3),
            &truth(&["a", "a", "c"]),
            DiscardPolicy::Singletons,
        )
        .unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (1, 2, 0));
        assert!((r.precision - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.recall, 1.0);
        assert!((r.f_measure - 0.5).abs() < 1e-15);
    }

    #[test]
    fn all_singletons() {
        let r = pairwise_prf(
            &clustering(&[0, 1, 2]),
            &keys(3),
            &truth(&["a", "a", "b"]),
            DiscardPolicy::Singletons,
        )
        .unwrap();
        assert_eq!((r.tp, r.fp), (0, 0));
        assert_eq!((r.precision, r.recall, r.f_measure), (1.0, 0.0, 0.0));
    }

    #[test]
    fn unknown_and_missing_labels() {
        let r = pairwise_prf(
            &clustering(&[0, 0, 0]),
            &keys(3),
            &truth(&["a", "a", UNKNOWN_LABEL]),
            DiscardPolicy::Singletons,
        )
        .unwrap();
        assert_eq!((r.n_scored, r.tp, r.fp), (2, 1, 0));
        let partial = truth(&["a", "a"]);
        assert!(matches!(
            pairwise_prf(&clustering(&[0, 0, 0]), &keys(3), &partial, DiscardPolicy::Singletons),
            Err(Error::MissingLabel(_))
        ));
        assert!(matches!(
            pairwise_prf(
                &clustering(&[0, 0]),
                &keys(3),
                &truth(&["a", "a", "a"]),
                DiscardPolicy::Singletons
            ),
            Err(Error::MissingFromClustering(_))
        ));
    }

    #[test]
    fn discard_policies() {
        let c = Clustering::from_groups(3, vec![vec![0, 1]], vec![2], Method::Ahc, serde_json::Value::Null).unwrap();
        let t = truth(&["a", "a", "a"]);
        let single = pairwise_prf(&c, &keys(3), &t, DiscardPolicy::Singletons).unwrap();
        assert_eq!((single.tp, single.fn_), (1, 2));
        let excl = pairwise_prf(&c, &keys(3), &t, DiscardPolicy::Exclude).unwrap();
        assert_eq!((excl.tp, excl.fn_, excl.n_scored), (1, 0, 2));
    }

    #[test]
    fn truth_file_round_trip() {
        let t = truth(&["a", "b", UNKNOWN_LABEL]);
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        assert_eq!(GroundTruth::parse(&buf[..]).unwrap(), t);
    }

    /// Pair counts by enumerating every unordered pair.
    fn brute(pred: &[usize], gold: &[usize]) -> (u64, u64, u64) {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for i in 0..pred.len() {
            for j in i + 1..pred.len() {
                match (pred[i] == pred[j], gold[i] == gold[j]) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
        }
        (tp, fp, fn_)
    }

    proptest! {
        #[test]
        fn counts_match_enumeration(pairs in prop::collection::vec((0usize..5, 0usize..5), 0..40)) {
            let (pred, gold): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let t = Tally::from_labels(&pred, &gold);
            prop_assert_eq!((t.tp, t.fp, t.fn_), brute(&pred, &gold));
        }

        #[test]
        fn merge_raises_recall_split_lowers_it(
            pairs in prop::collection::vec((0usize..6, 0usize..4), 2..30),
            a in 0usize..6,
            b in 0usize..6,
        ) {
            let (pred, gold): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let base = Tally::from_labels(&pred, &gold).report();
            let merged: Vec<usize> = pred.iter().map(|&p| if p == b { a } else { p }).collect();
            prop_assert!(Tally::from_labels(&merged, &gold).report().recall >= base.recall);
            // split cluster `a` by parity of position
            let split: Vec<usize> = pred.iter().enumerate().map(|(i, &p)| if p == a && i % 2 == 1 { 100 } else { p }).collect();
            let t = Tally::from_labels(&split, &gold);
            prop_assert!(t.report().recall <= base.recall);
            prop_assert!(t.tp + t.fp <= base.tp + base.fp);
        }
    }
}
