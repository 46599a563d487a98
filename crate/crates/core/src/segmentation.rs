//! Social-interaction events from identity appearances.
//!
//! For each (identity, day) the sorted appearance times are split wherever
//! two consecutive appearances are more than `max_gap` apart. Each run spanning
//! at least `min_event_duration` (last minus first timestamp) is an interaction.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::{minutes_between, FaceObservation, Timestamp};
use crate::reid::Clustering;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    pub min_event_minutes: f64,
    pub max_gap_minutes: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            min_event_minutes: 3.0,
            max_gap_minutes: 15.0,
        }
    }
}

fn minutes(m: f64) -> Duration {
    Duration::nanoseconds((m * 60e9).round() as i64)
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        if [self.min_event_minutes, self.max_gap_minutes]
            .iter()
            .any(|v| v.is_nan() || *v <= 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "segmentation durations must be positive (min event {}, max gap {})",
                self.min_event_minutes, self.max_gap_minutes
            )));
        }
        Ok(())
    }

    pub fn min_event(&self) -> Duration {
        minutes(self.min_event_minutes)
    }

    pub fn max_gap(&self) -> Duration {
        minutes(self.max_gap_minutes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub wearer_id: String,
    pub person_cluster_id: usize,
    pub day: NaiveDate,
    pub start: Timestamp,
    pub end: Timestamp,
    pub duration_minutes: f64,
    pub observation_count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Segmentation {
    pub interactions: Vec<Interaction>,
    /// Runs that were dropped for being shorter than the minimum event.
    pub sub_event_runs: usize,
}

/// Splits sorted timestamps into maximal runs with gaps no larger than `max_gap`.
pub fn split_runs(sorted: &[Timestamp], max_gap: Duration) -> Vec<&[Timestamp]> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..sorted.len() {
        if sorted[i].signed_duration_since(sorted[i - 1]) > max_gap {
            runs.push(&sorted[start..i]);
            start = i;
        }
    }
    if !sorted.is_empty() {
        runs.push(&sorted[start..]);
    }
    runs
}

/// Interactions of one wearer. `observations` must be the sequence the
/// clustering was built over; discarded observations are ignored.
pub fn segment(
    clustering: &Clustering,
    observations: &[FaceObservation],
    params: &SegmentationParams,
    exec: Execution,
) -> Result<Segmentation> {
    params.validate()?;
    if clustering.len() != observations.len() {
        return Err(Error::InvalidParameter(format!(
            "clustering covers {} observations, got {}",
            clustering.len(),
            observations.len()
        )));
    }

    let mut groups: BTreeMap<(usize, NaiveDate), Vec<usize>> = BTreeMap::new();
    for (cluster_id, members) in clustering.clusters().iter().enumerate() {
        for &m in members {
            groups.entry((cluster_id, observations[m].day)).or_default().push(m);
        }
    }
    let groups: Vec<((usize, NaiveDate), Vec<usize>)> = groups.into_iter().collect();
    let (min_event, max_gap) = (params.min_event(), params.max_gap());

    let per_group = exec.map_slice(&groups, |((cluster_id, day), members)| {
        let mut times: Vec<Timestamp> = members.iter().map(|&m| observations[m].timestamp).collect();
        times.sort();
        let wearer_id = &observations[members[0]].wearer_id;
        let mut found = Vec::new();
        let mut short = 0usize;
        for run in split_runs(&times, max_gap) {
            let (first, last) = (run[0], run[run.len() - 1]);
            if last.signed_duration_since(first) >= min_event {
                found.push(Interaction {
                    wearer_id: wearer_id.clone(),
                    person_cluster_id: *cluster_id,
                    day: *day,
                    start: first,
                    end: last,
                    duration_minutes: minutes_between(first, last),
                    observation_count: run.len(),
                });
            } else {
                short += 1;
            }
        }
        (found, short)
    });

    let mut out = Segmentation::default();
    for (found, short) in per_group {
        out.interactions.extend(found);
        out.sub_event_runs += short;
    }
    out.interactions.sort_by_key(|i| (i.start, i.person_cluster_id, i.end));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Interval {
    pub fn minutes(&self) -> f64 {
        minutes_between(self.start, self.end)
    }
}

/// Union of a wearer-day's interaction intervals, overlaps coalesced, sorted.
pub fn daily_interaction_timeline(interactions: &[Interaction], wearer_id: &str, day: NaiveDate) -> Vec<Interval> {
    let mut spans: Vec<Interval> = interactions
        .iter()
        .filter(|i| i.wearer_id == wearer_id && i.day == day)
        .map(|i| Interval {
            start: i.start,
            end: i.end,
        })
        .collect();
    merge_intervals(&mut spans)
}

pub fn merge_intervals(spans: &mut [Interval]) -> Vec<Interval> {
    spans.sort_by_key(|s| (s.start, s.end));
    let mut merged: Vec<Interval> = Vec::with_capacity(spans.len());
    for s in spans.iter() {
        match merged.last_mut() {
            Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
            _ => merged.push(*s),
        }
    }
    merged
}
