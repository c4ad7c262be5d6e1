//! Censored observations, datasets and event tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Covariate order produced by [`encode_campaign_covariates`].
pub const CAMPAIGN_COVARIATES: [&str; 5] = ["rain", "fog", "night", "experts", "universal"];

/// How the exit state of an observation is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensoringKind {
    /// The event was observed at `duration`.
    Uncensored,
    /// Observation ended at `duration` without the event.
    RightCensored,
    /// The event happened at an unknown time before entry.
    LeftCensored,
    /// The subject could not be observed at all in part of the window.
    Truncated,
}

impl CensoringKind {
    pub fn is_estimable(self) -> bool {
        matches!(
            self,
            CensoringKind::Uncensored | CensoringKind::RightCensored
        )
    }
}

impl fmt::Display for CensoringKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CensoringKind::Uncensored => "uncensored",
            CensoringKind::RightCensored => "right-censored",
            CensoringKind::LeftCensored => "left-censored",
            CensoringKind::Truncated => "truncated",
        })
    }
}

/// One subject: time under observation, whether it ended in the event, and its covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub duration: T,
    pub event: bool,
    pub covariates: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl<T: Scalar> Observation<T> {
    pub fn new(duration: T, event: bool, covariates: Vec<T>) -> Self {
        Observation {
            duration,
            event,
            covariates,
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn censoring(&self) -> CensoringKind {
        if self.event {
            CensoringKind::Uncensored
        } else {
            CensoringKind::RightCensored
        }
    }

    /// Linear predictor `beta . z`.
    pub fn linear_predictor(&self, beta: &[T]) -> T {
        self.covariates
            .iter()
            .zip(beta)
            .fold(T::zero(), |acc, (&z, &b)| acc + z * b)
    }
}

/// A non-empty collection of observations sharing one covariate layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    observations: Vec<Observation<T>>,
    covariate_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(observations: Vec<Observation<T>>, covariate_names: Vec<String>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Invalid("dataset has no observations".into()));
        }
        let p = covariate_names.len();
        for (i, obs) in observations.iter().enumerate() {
            if !obs.duration.is_finite() || obs.duration < T::zero() {
                return Err(Error::Invalid(format!(
                    "observation {}: duration {} must be finite and non-negative",
                    i + 1,
                    obs.duration
                )));
            }
            if obs.covariates.len() != p {
                return Err(Error::Invalid(format!(
                    "observation {}: expected {} covariates, got {}",
                    i + 1,
                    p,
                    obs.covariates.len()
                )));
            }
            if let Some(z) = obs.covariates.iter().find(|z| !z.is_finite()) {
                return Err(Error::Invalid(format!(
                    "observation {}: covariate value {} is not finite",
                    i + 1,
                    z
                )));
            }
        }
        Ok(Dataset {
            observations,
            covariate_names,
        })
    }

    /// Builds a dataset without covariates from parallel duration/event slices.
    pub fn from_durations(durations: &[T], events: &[bool]) -> Result<Self> {
        if durations.len() != events.len() {
            return Err(Error::Invalid(format!(
                "{} durations but {} event flags",
                durations.len(),
                events.len()
            )));
        }
        let obs = durations
            .iter()
            .zip(events)
            .map(|(&t, &e)| Observation::new(t, e, Vec::new()))
            .collect();
        Dataset::new(obs, Vec::new())
    }

    pub fn observations(&self) -> &[Observation<T>] {
        &self.observations
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate_count(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.observations.iter().filter(|o| o.event).count()
    }

    pub fn max_duration(&self) -> T {
        self.observations
            .iter()
            .map(|o| o.duration)
            .fold(T::zero(), T::max)
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    pub fn column(&self, index: usize) -> Vec<T> {
        self.observations
            .iter()
            .map(|o| o.covariates[index])
            .collect()
    }

    /// Observations matching `keep`, or `None` when nothing matches.
    pub fn filter<F>(&self, mut keep: F) -> Option<Self>
    where
        F: FnMut(&Observation<T>) -> bool,
    {
        let observations: Vec<_> = self
            .observations
            .iter()
            .filter(|o| keep(o))
            .cloned()
            .collect();
        if observations.is_empty() {
            None
        } else {
            Some(Dataset {
                observations,
                covariate_names: self.covariate_names.clone(),
            })
        }
    }

    /// Returns a copy with one more observation appended.
    pub fn with_observation(&self, obs: Observation<T>) -> Result<Self> {
        let mut observations = self.observations.clone();
        observations.push(obs);
        Dataset::new(observations, self.covariate_names.clone())
    }
}

/// One distinct event time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRow<T> {
    pub time: T,
    /// Subjects with duration >= `time`.
    pub at_risk: usize,
    /// Events at exactly `time`.
    pub deaths: usize,
    /// Censorings with duration in (previous event time, `time`].
    pub censored: usize,
}

/// Distinct event times with their risk-set counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTable<T> {
    pub rows: Vec<EventRow<T>>,
    /// Censored subjects whose duration exceeds the last event time (all subjects if there are no events).
    pub censored_after_last: usize,
    pub total: usize,
}

impl<T: Scalar> EventTable<T> {
    pub fn event_count(&self) -> usize {
        self.rows.iter().map(|r| r.deaths).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Aggregates a dataset into one row per distinct event time.
///
/// Censorings tied with an event time stay in the risk set at that time.
pub fn build_event_table<T: Scalar>(dataset: &Dataset<T>) -> Result<EventTable<T>> {
    let mut order: Vec<&Observation<T>> = dataset.observations().iter().collect();
    order.sort_by(|a, b| {
        a.duration
            .partial_cmp(&b.duration)
            .expect("finite durations")
    });

    let mut rows = Vec::new();
    let mut remaining = order.len();
    let mut pending_censored = 0;
    let mut i = 0;
    while i < order.len() {
        let time = order[i].duration;
        let mut j = i;
        let mut deaths = 0;
        while j < order.len() && order[j].duration == time {
            if order[j].event {
                deaths += 1;
            } else {
                pending_censored += 1;
            }
            j += 1;
        }
        if deaths > 0 {
            rows.push(EventRow {
                time,
                at_risk: remaining,
                deaths,
                censored: pending_censored,
            });
            pending_censored = 0;
        }
        remaining -= j - i;
        i = j;
    }
    Ok(EventTable {
        rows,
        censored_after_last: pending_censored,
        total: dataset.len(),
    })
}

/// Perception model driving a campaign run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelType {
    Baseline,
    Expert,
    Universal,
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelType::Baseline => "baseline",
            ModelType::Expert => "expert",
            ModelType::Universal => "universal",
        })
    }
}

impl FromStr for ModelType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(ModelType::Baseline),
            "expert" | "experts" => Ok(ModelType::Expert),
            "universal" => Ok(ModelType::Universal),
            other => Err(Error::Invalid(format!("unknown model type `{other}`"))),
        }
    }
}

/// Encodes raw campaign settings as `(rain, fog, night, experts, universal)`.
///
/// Rain and fog intensities pass through unchanged (0 when absent). Night is
/// set when the sun is strictly below the horizon.
pub fn encode_campaign_covariates<T: Scalar>(
    rain_raw: T,
    fog_raw: T,
    sun_position: T,
    model: ModelType,
) -> Result<[T; 5]> {
    let in_range = |v: T, lo: f64, hi: f64| v == T::zero() || (v >= T::lit(lo) && v <= T::lit(hi));
    if !in_range(rain_raw, 70.0, 100.0) {
        return Err(Error::Invalid(format!(
            "rain intensity {rain_raw} outside {{0}} or [70, 100]"
        )));
    }
    if !in_range(fog_raw, 50.0, 100.0) {
        return Err(Error::Invalid(format!(
            "fog density {fog_raw} outside {{0}} or [50, 100]"
        )));
    }
    if !(sun_position >= T::lit(-90.0) && sun_position <= T::lit(90.0)) {
        return Err(Error::Invalid(format!(
            "sun position {sun_position} outside [-90, 90]"
        )));
    }
    let flag = |b: bool| if b { T::one() } else { T::zero() };
    Ok([
        rain_raw,
        fog_raw,
        flag(sun_position < T::zero()),
        flag(model == ModelType::Expert),
        flag(model == ModelType::Universal),
    ])
}
