//! Descriptor streams and day-coverage manifests.
//!
//! Both inputs are JSON Lines. An observation record looks like
//!
//! ```text
//! {"wearer_id":"u1","day":"2016-03-01","timestamp":"2016-03-01T10:00:00+01:00",
//!  "image_id":"img_0001","face_index":0,"descriptor":[0.01, ...128 numbers]}
//! ```
//!
//! and a coverage record like
//!
//! ```text
//! {"wearer_id":"u1","day":"2016-03-01","start":"2016-03-01T08:00:00+01:00",
//!  "end":"2016-03-01T18:00:00+01:00","image_count":1200}
//! ```
//!
//! Days are calendar dates in the offset carried by the timestamp itself.
//! Descriptors are kept exactly as read; normalization happens at clustering.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use chrono::{DateTime, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DESCRIPTOR_DIM: usize = 128;

pub type Timestamp = DateTime<FixedOffset>;

/// Identifies one face within a wearer's photostream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObsKey {
    pub wearer_id: String,
    pub image_id: String,
    pub face_index: u32,
}

impl fmt::Display for ObsKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}#{}", self.wearer_id, self.image_id, self.face_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceObservation {
    pub wearer_id: String,
    pub day: NaiveDate,
    pub timestamp: Timestamp,
    pub image_id: String,
    pub face_index: u32,
    pub descriptor: Vec<f64>,
}

impl FaceObservation {
    pub fn key(&self) -> ObsKey {
        ObsKey {
            wearer_id: self.wearer_id.clone(),
            image_id: self.image_id.clone(),
            face_index: self.face_index,
        }
    }

    /// Checks the per-record invariants; `line` is reported in errors.
    pub fn validate(&self, line: usize) -> Result<()> {
        if self.descriptor.len() != DESCRIPTOR_DIM {
            return Err(Error::DescriptorLength {
                line,
                found: self.descriptor.len(),
                expected: DESCRIPTOR_DIM,
            });
        }
        if let Some(index) = self.descriptor.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { line, index });
        }
        if self.timestamp.date_naive() != self.day {
            return Err(Error::DayMismatch {
                line,
                timestamp: self.timestamp.to_rfc3339(),
                day: self.day.to_string(),
            });
        }
        Ok(())
    }
}

/// Recorded span of one wearer-day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayCoverage {
    pub wearer_id: String,
    pub day: NaiveDate,
    pub start: Timestamp,
    pub end: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_count: Option<u64>,
    /// Set when the span was inferred from the first and last observation
    /// because no manifest entry existed.
    #[serde(default, skip_serializing_if = "is_false")]
    pub synthesized: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl DayCoverage {
    pub fn duration_minutes(&self) -> f64 {
        minutes_between(self.start, self.end)
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t <= self.end
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidCoverage {
            wearer_id: self.wearer_id.clone(),
            day: self.day.to_string(),
            reason: reason.to_string(),
        };
        // A synthesized span from a single observation is zero-length.
        if self.start > self.end || (self.start == self.end && !self.synthesized) {
            return Err(bad("start must precede end"));
        }
        if self.start.date_naive() != self.day {
            return Err(bad("start does not fall on the stated day"));
        }
        Ok(())
    }
}

/// Exact minutes between two instants, at nanosecond resolution.
pub fn minutes_between(start: Timestamp, end: Timestamp) -> f64 {
    let d = end.signed_duration_since(start);
    let secs = d.num_seconds();
    let nanos = (d - chrono::Duration::seconds(secs)).num_nanoseconds().unwrap_or(0);
    (secs as f64 + nanos as f64 * 1e-9) / 60.0
}

pub type CoverageKey = (String, NaiveDate);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    observations: Vec<FaceObservation>,
    coverage: BTreeMap<CoverageKey, DayCoverage>,
}

impl Dataset {
    /// Builds a dataset from in-memory records, validating every invariant.
    /// Record positions (1-based) stand in for line numbers in errors.
    pub fn new(observations: Vec<FaceObservation>, coverage: Vec<DayCoverage>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, obs) in observations.iter().enumerate() {
            obs.validate(i + 1)?;
            check_unique(&mut seen, obs, i + 1)?;
        }
        assemble(observations, coverage)
    }

    pub fn observations(&self) -> &[FaceObservation] {
        &self.observations
    }

    pub fn coverage(&self) -> &BTreeMap<CoverageKey, DayCoverage> {
        &self.coverage
    }

    pub fn coverage_for(&self, wearer_id: &str, day: NaiveDate) -> Option<&DayCoverage> {
        self.coverage.get(&(wearer_id.to_string(), day))
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Wearers with observations or coverage, sorted.
    pub fn wearers(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self
            .observations
            .iter()
            .map(|o| &o.wearer_id)
            .chain(self.coverage.keys().map(|(w, _)| w))
            .collect();
        set.into_iter().cloned().collect()
    }

    /// Sub-dataset for one wearer, optionally restricted to an inclusive day range.
    pub fn slice(&self, wearer_id: &str, days: Option<(NaiveDate, NaiveDate)>) -> Result<Dataset> {
        if !self.wearers().iter().any(|w| w == wearer_id) {
            return Err(Error::UnknownWearer(wearer_id.to_string()));
        }
        let in_range = |d: NaiveDate| days.is_none_or(|(lo, hi)| lo <= d && d <= hi);
        let observations = self
            .observations
            .iter()
            .filter(|o| o.wearer_id == wearer_id && in_range(o.day))
            .cloned()
            .collect();
        let coverage = self
            .coverage
            .iter()
            .filter(|((w, d), _)| w == wearer_id && in_range(*d))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Ok(Dataset { observations, coverage })
    }

    /// Per-wearer, per-day observation counts.
    pub fn day_counts(&self) -> BTreeMap<String, BTreeMap<NaiveDate, usize>> {
        let mut out: BTreeMap<String, BTreeMap<NaiveDate, usize>> = BTreeMap::new();
        for (w, d) in self.coverage.keys() {
            out.entry(w.clone()).or_default().entry(*d).or_insert(0);
        }
        for o in &self.observations {
            *out.entry(o.wearer_id.clone()).or_default().entry(o.day).or_insert(0) += 1;
        }
        out
    }
}

fn check_unique(seen: &mut HashSet<ObsKey>, obs: &FaceObservation, line: usize) -> Result<()> {
    if !seen.insert(obs.key()) {
        return Err(Error::DuplicateObservation {
            line,
            wearer_id: obs.wearer_id.clone(),
            image_id: obs.image_id.clone(),
            face_index: obs.face_index,
        });
    }
    Ok(())
}

fn assemble(mut observations: Vec<FaceObservation>, coverage: Vec<DayCoverage>) -> Result<Dataset> {
    observations.sort_by(|a, b| {
        (&a.wearer_id, a.timestamp, &a.image_id, a.face_index).cmp(&(
            &b.wearer_id,
            b.timestamp,
            &b.image_id,
            b.face_index,
        ))
    });

    let mut cov: BTreeMap<CoverageKey, DayCoverage> = BTreeMap::new();
    for c in coverage {
        c.validate()?;
        let key = (c.wearer_id.clone(), c.day);
        if cov.contains_key(&key) {
            return Err(Error::InvalidCoverage {
                wearer_id: c.wearer_id,
                day: c.day.to_string(),
                reason: "duplicate manifest entry".into(),
            });
        }
        cov.insert(key, c);
    }

    // Observations are sorted, so the first and last per (wearer, day) bound it.
    let mut spans: BTreeMap<CoverageKey, (Timestamp, Timestamp)> = BTreeMap::new();
    for o in &observations {
        spans
            .entry((o.wearer_id.clone(), o.day))
            .and_modify(|s| {
                s.0 = s.0.min(o.timestamp);
                s.1 = s.1.max(o.timestamp);
            })
            .or_insert((o.timestamp, o.timestamp));
    }
    for (key, (first, last)) in spans {
        match cov.get(&key) {
            Some(c) => {
                if !c.contains(first) || !c.contains(last) {
                    return Err(Error::InvalidCoverage {
                        wearer_id: key.0,
                        day: key.1.to_string(),
                        reason: "observations fall outside the recorded span".into(),
                    });
                }
            }
            None => {
                cov.insert(
                    key.clone(),
                    DayCoverage {
                        wearer_id: key.0,
                        day: key.1,
                        start: first,
                        end: last,
                        image_count: None,
                        synthesized: true,
                    },
                );
            }
        }
    }

    Ok(Dataset {
        observations,
        coverage: cov,
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Number {
    Num(f64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationRecord {
    wearer_id: String,
    day: NaiveDate,
    timestamp: Timestamp,
    image_id: String,
    face_index: u32,
    descriptor: Vec<Number>,
}

fn non_blank_lines<R: BufRead>(input: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
}

fn read_observation(line_no: usize, text: &str) -> Result<FaceObservation> {
    let rec: ObservationRecord = serde_json::from_str(text).map_err(|e| Error::MalformedLine {
        line: line_no,
        reason: e.to_string(),
    })?;
    let mut descriptor = Vec::with_capacity(rec.descriptor.len());
    for (index, v) in rec.descriptor.into_iter().enumerate() {
        match v {
            Number::Num(x) => descriptor.push(x),
            // Some writers spell non-finite values as strings.
            Number::Text(s) => match s.to_ascii_lowercase().as_str() {
                "nan" | "inf" | "-inf" | "infinity" | "-infinity" => {
                    return Err(Error::NonFinite { line: line_no, index })
                }
                _ => {
                    return Err(Error::MalformedLine {
                        line: line_no,
                        reason: format!("descriptor entry {index} is not a number"),
                    })
                }
            },
        }
    }
    let obs = FaceObservation {
        wearer_id: rec.wearer_id,
        day: rec.day,
        timestamp: rec.timestamp,
        image_id: rec.image_id,
        face_index: rec.face_index,
        descriptor,
    };
    obs.validate(line_no)?;
    Ok(obs)
}

/// Parses an observation stream; coverage is synthesized for every wearer-day.
pub fn parse_observations<R: BufRead>(input: R) -> Result<Dataset> {
    let observations = read_observations(input)?;
    assemble(observations, Vec::new())
}

/// Reads and validates observation records without assembling a dataset.
pub fn read_observations<R: BufRead>(input: R) -> Result<Vec<FaceObservation>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line_no, line) in non_blank_lines(input) {
        let line = line.map_err(|e| Error::MalformedLine {
            line: line_no,
            reason: e.to_string(),
        })?;
        let obs = read_observation(line_no, &line)?;
        check_unique(&mut seen, &obs, line_no)?;
        out.push(obs);
    }
    Ok(out)
}

pub fn parse_coverage<R: BufRead>(input: R) -> Result<Vec<DayCoverage>> {
    let mut out = Vec::new();
    for (line_no, line) in non_blank_lines(input) {
        let line = line.map_err(|e| Error::MalformedLine {
            line: line_no,
            reason: e.to_string(),
        })?;
        let mut c: DayCoverage = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: line_no,
            reason: e.to_string(),
        })?;
        c.synthesized = false;
        out.push(c);
    }
    Ok(out)
}

/// Observations plus an optional coverage manifest.
pub fn load<R1: BufRead, R2: BufRead>(observations: R1, coverage: Option<R2>) -> Result<Dataset> {
    let obs = read_observations(observations)?;
    let cov = match coverage {
        Some(r) => parse_coverage(r)?,
        None => Vec::new(),
    };
    assemble(obs, cov)
}

pub fn write_observations<W: Write>(mut out: W, observations: &[FaceObservation]) -> std::io::Result<()> {
    for o in observations {
        serde_json::to_writer(&mut out, o)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes manifest records; synthesized entries are skipped unless `include_synthesized`.
pub fn write_coverage<'a, W: Write>(
    mut out: W,
    coverage: impl IntoIterator<Item = &'a DayCoverage>,
    include_synthesized: bool,
) -> std::io::Result<()> {
    for c in coverage {
        if c.synthesized && !include_synthesized {
            continue;
        }
        let mut c = c.clone();
        c.synthesized = false;
        serde_json::to_writer(&mut out, &c)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
