//! Per-wearer social traits and cohort-normalized profiles.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::DayCoverage;
use crate::segmentation::{daily_interaction_timeline, Interaction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialTraits {
    pub wearer_id: String,
    /// Distinct persons interacted with, averaged over days.
    pub num_p_day: f64,
    /// Interactions per day.
    pub inter_day: f64,
    /// Minutes per interaction, pooled over all days.
    pub t_inter: f64,
    /// Daily interaction minutes per distinct person, averaged over days with
    /// at least one interaction.
    pub t_p: f64,
    /// Coverage minutes not inside any interaction, averaged over days.
    pub t_alone: f64,
    pub days_analyzed: usize,
    /// True when there were no interactions, so `t_inter` and `t_p` are zero
    /// by convention rather than measured.
    pub no_interactions: bool,
    pub synthesized_coverage_days: usize,
}

/// Raw per-day tallies behind the trait averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTally {
    pub day: NaiveDate,
    pub persons: usize,
    pub interactions: usize,
    pub interaction_minutes: f64,
    pub merged_minutes: f64,
    pub coverage_minutes: f64,
}

impl DayTally {
    pub fn alone_minutes(&self) -> f64 {
        self.coverage_minutes - self.merged_minutes
    }
}

/// Per-day tallies for one wearer over every covered day.
pub fn day_tallies<'a>(
    interactions: &[Interaction],
    coverage: impl IntoIterator<Item = &'a DayCoverage>,
    wearer_id: &str,
) -> Result<Vec<DayTally>> {
    let covered: BTreeMap<NaiveDate, &DayCoverage> = coverage
        .into_iter()
        .filter(|c| c.wearer_id == wearer_id)
        .map(|c| (c.day, c))
        .collect();
    let mine: Vec<&Interaction> = interactions.iter().filter(|i| i.wearer_id == wearer_id).collect();
    if let Some(i) = mine.iter().find(|i| !covered.contains_key(&i.day)) {
        return Err(Error::MissingCoverage {
            wearer_id: wearer_id.to_string(),
            day: i.day.to_string(),
        });
    }

    let owned: Vec<Interaction> = mine.iter().map(|i| (*i).clone()).collect();
    Ok(covered
        .iter()
        .map(|(&day, cov)| {
            let today: Vec<&Interaction> = mine.iter().copied().filter(|i| i.day == day).collect();
            let persons: BTreeSet<usize> = today.iter().map(|i| i.person_cluster_id).collect();
            let merged: f64 = daily_interaction_timeline(&owned, wearer_id, day)
                .iter()
                .map(|s| s.minutes())
                .sum();
            DayTally {
                day,
                persons: persons.len(),
                interactions: today.len(),
                interaction_minutes: today.iter().map(|i| i.duration_minutes).sum(),
                merged_minutes: merged,
                coverage_minutes: cov.duration_minutes(),
            }
        })
        .collect())
}

/// Averages the per-day tallies into the five traits.
pub fn traits_from_tallies(wearer_id: &str, tallies: &[DayTally], synthesized_coverage_days: usize) -> SocialTraits {
    let days = tallies.len();
    let mean = |f: &dyn Fn(&DayTally) -> f64| {
        if days == 0 {
            0.0
        } else {
            tallies.iter().map(f).sum::<f64>() / days as f64
        }
    };
    let total_interactions: usize = tallies.iter().map(|t| t.interactions).sum();
    let total_minutes: f64 = tallies.iter().map(|t| t.interaction_minutes).sum();
    let social_days: Vec<&DayTally> = tallies.iter().filter(|t| t.persons > 0).collect();

    let t_inter = if total_interactions > 0 {
        total_minutes / total_interactions as f64
    } else {
        0.0
    };
    let t_p = if social_days.is_empty() {
        0.0
    } else {
        social_days
            .iter()
            .map(|t| t.interaction_minutes / t.persons as f64)
            .sum::<f64>()
            / social_days.len() as f64
    };

    SocialTraits {
        wearer_id: wearer_id.to_string(),
        num_p_day: mean(&|t| t.persons as f64),
        inter_day: mean(&|t| t.interactions as f64),
        t_inter,
        t_p,
        t_alone: mean(&|t| t.alone_minutes()),
        days_analyzed: days,
        no_interactions: total_interactions == 0,
        synthesized_coverage_days,
    }
}

/// Traits of one wearer from segmented interactions and day coverage.
pub fn compute_traits<'a>(
    interactions: &[Interaction],
    coverage: impl IntoIterator<Item = &'a DayCoverage> + Clone,
    wearer_id: &str,
) -> Result<SocialTraits> {
    let synthesized = coverage
        .clone()
        .into_iter()
        .filter(|c| c.wearer_id == wearer_id && c.synthesized)
        .count();
    let tallies = day_tallies(interactions, coverage, wearer_id)?;
    Ok(traits_from_tallies(wearer_id, &tallies, synthesized))
}

pub const AXIS_LABELS: [&str; 5] = ["Num p/day", "Inter/day", "T/Inter", "T/P", "Sociality (1 - T/A)"];

pub const NORMALIZATION: &str = "cohort min-max; alone time inverted";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialProfile {
    pub traits: SocialTraits,
    /// `[num_p_day, inter_day, t_inter, t_p, sociality]`, each in `[0, 1]`,
    /// larger meaning more social.
    pub normalized_axes: [f64; 5],
    pub normalization: String,
    pub provenance: String,
}

fn raw_axes(t: &SocialTraits) -> [f64; 5] {
    [t.num_p_day, t.inter_day, t.t_inter, t.t_p, t.t_alone]
}

/// Min-max normalizes each trait across the cohort. A flat axis (including
/// any single-wearer cohort) maps to 0.5. The alone-time axis is inverted.
pub fn build_profiles(traits: &[SocialTraits], provenance: &str) -> Result<Vec<SocialProfile>> {
    if traits.is_empty() {
        return Err(Error::InvalidParameter("no wearers to profile".into()));
    }
    if provenance.is_empty() {
        return Err(Error::InvalidParameter("profile provenance must not be empty".into()));
    }
    let raws: Vec<[f64; 5]> = traits.iter().map(raw_axes).collect();
    let mut lo = [f64::INFINITY; 5];
    let mut hi = [f64::NEG_INFINITY; 5];
    for r in &raws {
        for a in 0..5 {
            lo[a] = lo[a].min(r[a]);
            hi[a] = hi[a].max(r[a]);
        }
    }
    Ok(traits
        .iter()
        .zip(&raws)
        .map(|(t, r)| {
            let mut axes = [0.5; 5];
            for a in 0..5 {
                if hi[a] > lo[a] {
                    axes[a] = ((r[a] - lo[a]) / (hi[a] - lo[a])).clamp(0.0, 1.0);
                }
            }
            axes[4] = 1.0 - axes[4];
            SocialProfile {
                traits: t.clone(),
                normalized_axes: axes,
                normalization: NORMALIZATION.to_string(),
                provenance: provenance.to_string(),
            }
        })
        .collect())
}
