//! Synthetic photostreams with known identities and scripted interactions.
//!
//! Each identity gets a unit-norm center `normalize(base + spread * u_i)` where
//! `base` and `u_i` are random unit directions, so `identity_center_spread`
//! controls how far apart people are. Frames of a scripted event are spaced by
//! intervals drawn uniformly from `frame_interval_secs`; each frame is kept with
//! probability `1 - dropout_rate` and carries `normalize(center + noise)`.
//! Everything is drawn from one ChaCha stream seeded by `seed`.

use std::collections::{BTreeMap, HashMap};

use chrono::{Duration, FixedOffset, NaiveDate, NaiveTime, TimeZone};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::GroundTruth;
use crate::ingest::{Dataset, DayCoverage, FaceObservation, Timestamp, DESCRIPTOR_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub identity: usize,
    /// Zero-based day index from `start_date`.
    pub day: u32,
    pub start: NaiveTime,
    pub end: NaiveTime,
}

/// Extra events drawn at random on top of the explicit schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSchedule {
    pub events_per_day: usize,
    pub min_minutes: f64,
    pub max_minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub wearer_id: String,
    pub start_date: NaiveDate,
    pub utc_offset_minutes: i32,
    pub n_days: u32,
    pub n_identities: usize,
    pub identity_center_spread: f64,
    pub within_person_noise: f64,
    pub frame_interval_secs: [f64; 2],
    pub dropout_rate: f64,
    pub day_start: NaiveTime,
    pub day_end: NaiveTime,
    pub schedule: Vec<ScheduledEvent>,
    pub random_schedule: Option<RandomSchedule>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            wearer_id: "synth".into(),
            start_date: NaiveDate::from_ymd_opt(2016, 3, 7).unwrap(),
            utc_offset_minutes: 60,
            n_days: 1,
            n_identities: 1,
            identity_center_spread: 2.0,
            within_person_noise: 0.02,
            frame_interval_secs: [20.0, 30.0],
            dropout_rate: 0.0,
            day_start: NaiveTime::from_hms_opt(8, 0, 0).unwrap(),
            day_end: NaiveTime::from_hms_opt(20, 0, 0).unwrap(),
            schedule: Vec::new(),
            random_schedule: None,
        }
    }
}

/// A scripted interaction resolved to instants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedInteraction {
    pub identity: usize,
    pub label: String,
    pub day: NaiveDate,
    pub start: Timestamp,
    pub end: Timestamp,
    /// Frames emitted after dropout.
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub dataset: Dataset,
    pub truth: GroundTruth,
    pub schedule_truth: Vec<ScriptedInteraction>,
}

pub fn identity_label(i: usize) -> String {
    format!("person-{i:02}")
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_identities == 0 {
            return bad("n_identities must be at least 1".into());
        }
        if self.n_days == 0 {
            return bad("n_days must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if [self.within_person_noise, self.identity_center_spread]
            .iter()
            .any(|v| v.is_nan() || *v < 0.0)
        {
            return bad("noise and spread must be non-negative".into());
        }
        let [lo, hi] = self.frame_interval_secs;
        if !(lo > 0.0 && lo <= hi) {
            return bad(format!("frame interval [{lo}, {hi}] is not a positive range"));
        }
        if self.day_start >= self.day_end {
            return bad("day_start must precede day_end".into());
        }
        if let Some(r) = &self.random_schedule {
            if !(r.min_minutes > 0.0 && r.min_minutes <= r.max_minutes) {
                return bad("random schedule durations must be a positive range".into());
            }
            let day_len = (self.day_end - self.day_start).num_seconds() as f64 / 60.0;
            if r.max_minutes > day_len {
                return Err(Error::ImpossibleSchedule(
                    "random events longer than the recorded day".into(),
                ));
            }
        }
        for e in &self.schedule {
            if e.identity >= self.n_identities {
                return Err(Error::ImpossibleSchedule(format!(
                    "identity {} does not exist",
                    e.identity
                )));
            }
            if e.day >= self.n_days {
                return Err(Error::ImpossibleSchedule(format!("day {} is past n_days", e.day)));
            }
            if e.start >= e.end || e.start < self.day_start || e.end > self.day_end {
                return Err(Error::ImpossibleSchedule(format!(
                    "event {}..{} on day {} falls outside coverage {}..{}",
                    e.start, e.end, e.day, self.day_start, self.day_end
                )));
            }
        }
        Ok(())
    }

    fn offset(&self) -> Result<FixedOffset> {
        FixedOffset::east_opt(self.utc_offset_minutes * 60)
            .ok_or_else(|| Error::InvalidParameter(format!("bad utc offset {}", self.utc_offset_minutes)))
    }

    fn date(&self, day: u32) -> NaiveDate {
        self.start_date + Duration::days(day as i64)
    }

    fn instant(&self, day: u32, t: NaiveTime) -> Result<Timestamp> {
        let local = self.date(day).and_time(t);
        self.offset()?
            .from_local_datetime(&local)
            .single()
            .ok_or_else(|| Error::InvalidParameter("ambiguous local time".into()))
    }
}

fn unit_gaussian(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..DESCRIPTOR_DIM).map(|_| StandardNormal.sample(rng)).collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn random_events(cfg: &SynthConfig, plan: &RandomSchedule, rng: &mut ChaCha8Rng) -> Vec<ScheduledEvent> {
    let day_secs = (cfg.day_end - cfg.day_start).num_seconds();
    let mut out = Vec::new();
    for day in 0..cfg.n_days {
        for _ in 0..plan.events_per_day {
            let identity = rng.random_range(0..cfg.n_identities);
            let minutes = if plan.max_minutes > plan.min_minutes {
                rng.random_range(plan.min_minutes..=plan.max_minutes)
            } else {
                plan.min_minutes
            };
            let len = ((minutes * 60.0).round() as i64).min(day_secs);
            let offset = rng.random_range(0..=day_secs - len);
            let start = cfg.day_start + Duration::seconds(offset);
            out.push(ScheduledEvent {
                identity,
                day,
                start,
                end: start + Duration::seconds(len),
            });
        }
    }
    out
}

/// Generates a photostream; identical configs give identical output.
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let base = unit_gaussian(&mut rng);
    let centers: Vec<Vec<f64>> = (0..cfg.n_identities)
        .map(|_| {
            let u = unit_gaussian(&mut rng);
            let mut c: Vec<f64> = base
                .iter()
                .zip(&u)
                .map(|(b, x)| b + cfg.identity_center_spread * x)
                .collect();
            normalize(&mut c);
            c
        })
        .collect();

    let mut events = cfg.schedule.clone();
    if let Some(plan) = &cfg.random_schedule {
        events.extend(random_events(cfg, plan, &mut rng));
    }
    events.sort_by_key(|e| (e.day, e.start, e.end, e.identity));

    let noise = Normal::new(0.0, cfg.within_person_noise).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let [lo_ms, hi_ms] = cfg.frame_interval_secs.map(|s| (s * 1000.0).round() as i64);

    let mut observations = Vec::new();
    let mut labels = HashMap::new();
    let mut scripted = Vec::with_capacity(events.len());
    let mut per_day: BTreeMap<u32, u64> = BTreeMap::new();
    for (event_no, e) in events.iter().enumerate() {
        let start = cfg.instant(e.day, e.start)?;
        let end = cfg.instant(e.day, e.end)?;
        let day = cfg.date(e.day);
        let mut t = start;
        let mut frame = 0usize;
        let mut kept = 0usize;
        while t <= end {
            let dropped = cfg.dropout_rate > 0.0 && rng.random::<f64>() < cfg.dropout_rate;
            if !dropped {
                let mut d = centers[e.identity].clone();
                if cfg.within_person_noise > 0.0 {
                    d.iter_mut().for_each(|x| *x += noise.sample(&mut rng));
                    normalize(&mut d);
                }
                let obs = FaceObservation {
                    wearer_id: cfg.wearer_id.clone(),
                    day,
                    timestamp: t,
                    image_id: format!("{}_{}_e{event_no:04}_f{frame:04}", cfg.wearer_id, day.format("%Y%m%d")),
                    face_index: 0,
                    descriptor: d,
                };
                labels.insert(obs.key(), identity_label(e.identity));
                observations.push(obs);
                kept += 1;
            }
            frame += 1;
            let step = if hi_ms > lo_ms {
                rng.random_range(lo_ms..=hi_ms)
            } else {
                lo_ms
            };
            t += Duration::milliseconds(step);
        }
        *per_day.entry(e.day).or_default() += kept as u64;
        scripted.push(ScriptedInteraction {
            identity: e.identity,
            label: identity_label(e.identity),
            day,
            start,
            end,
            frames: kept,
        });
    }

    let coverage = (0..cfg.n_days)
        .map(|d| {
            Ok(DayCoverage {
                wearer_id: cfg.wearer_id.clone(),
                day: cfg.date(d),
                start: cfg.instant(d, cfg.day_start)?,
                end: cfg.instant(d, cfg.day_end)?,
                image_count: Some(per_day.get(&d).copied().unwrap_or(0)),
                synthesized: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SynthDataset {
        dataset: Dataset::new(observations, coverage)?,
        truth: GroundTruth::new(labels),
        schedule_truth: scripted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::write_observations;

    fn hm(h: u32, m: u32) -> NaiveTime {
        NaiveTime::from_hms_opt(h, m, 0).unwrap()
    }

    fn one_event(interval: f64) -> SynthConfig {
        SynthConfig {
            frame_interval_secs: [interval, interval],
            schedule: vec![ScheduledEvent {
                identity: 0,
                day: 0,
                start: hm(10, 0),
                end: hm(10, 10),
            }],
            ..Default::default()
        }
    }

    #[test]
    fn frame_count_from_interval() {
        let s = generate(&one_event(20.0)).unwrap();
        assert_eq!(s.dataset.len(), 31);
        for o in s.dataset.observations() {
            assert_eq!(s.truth.label(&o.key()), Some("person-00"));
        }
        assert_eq!(s.schedule_truth[0].frames, 31);
        let cov = s.dataset.coverage().values().next().unwrap();
        assert_eq!(cov.image_count, Some(31));
    }

    #[test]
    fn zero_noise_is_exact() {
        let cfg = SynthConfig {
            within_person_noise: 0.0,
            ..one_event(25.0)
        };
        let s = generate(&cfg).unwrap();
        let first = &s.dataset.observations()[0].descriptor;
        assert!(s.dataset.observations().iter().all(|o| &o.descriptor == first));
    }

    #[test]
    fn deterministic_bytes() {
        let cfg = SynthConfig {
            n_identities: 4,
            n_days: 2,
            dropout_rate: 0.1,
            random_schedule: Some(RandomSchedule {
                events_per_day: 5,
                min_minutes: 3.0,
                max_minutes: 20.0,
            }),
            ..Default::default()
        };
        let bytes = |c: &SynthConfig| {
            let mut b = Vec::new();
            write_observations(&mut b, generate(c).unwrap().dataset.observations()).unwrap();
            b
        };
        assert_eq!(bytes(&cfg), bytes(&cfg));
        let other = SynthConfig { seed: 1, ..cfg.clone() };
        assert_ne!(bytes(&cfg), bytes(&other));
    }

    #[test]
    fn impossible_schedules() {
        let mut cfg = one_event(20.0);
        cfg.schedule[0].end = hm(21, 0);
        assert!(matches!(generate(&cfg), Err(Error::ImpossibleSchedule(_))));
        let mut cfg = one_event(20.0);
        cfg.schedule[0].identity = 3;
        assert!(matches!(generate(&cfg), Err(Error::ImpossibleSchedule(_))));
        let cfg = SynthConfig {
            dropout_rate: 1.0,
            ..one_event(20.0)
        };
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = SynthConfig {
            random_schedule: Some(RandomSchedule {
                events_per_day: 3,
                min_minutes: 4.0,
                max_minutes: 9.0,
            }),
            ..one_event(20.0)
        };
        let text = toml::to_string(&cfg).unwrap();
        let back: SynthConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
