//! Seeded Monte-Carlo generator for right-censored driving campaigns.
//!
//! Every combination of perception model and weather receives a fixed budget
//! of driving minutes. Drives are generated back to back until the budget is
//! spent; each drive ends at its first event or at the horizon, whichever
//! comes first. Event times follow a proportional-hazards model with a
//! Weibull baseline, `H(t | z) = (rate * t)^shape * exp(beta . z)`; shape 1
//! gives exponential times.
//!
//! # Random stream
//!
//! Combination `i` draws from its own Xoshiro256++ generator seeded through
//! SplitMix64 with `seed ^ i`. A 64-bit output `x` maps to the open unit
//! interval as `((x >> 11) + 0.5) * 2^-53`. Each drive consumes exactly three
//! uniforms, in order:
//!
//! 1. intensity `u_w`: rain = `lo + (hi - lo) u_w` under rain, fog likewise under fog;
//! 2. sun `u_s`: sun position = `-90 u_s` at night, `90 u_s` otherwise;
//! 3. event `u_e`: `T = (-ln u_e)^(1/shape) / (rate * exp(beta . z / shape))`.

use std::fmt;
use std::str::FromStr;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{
    encode_campaign_covariates, Dataset, ModelType, Observation, CAMPAIGN_COVARIATES,
};
use crate::error::{Error, Result};

/// Drive horizon in seconds.
pub const STANDARD_HORIZON_S: f64 = 600.0;
pub const STANDARD_MINUTES_PER_COMBINATION: f64 = 120.0;
/// Corner cases observed over the whole reference campaign.
pub const REFERENCE_EVENT_TOTAL: usize = 48;
/// Drives performed over the whole reference campaign.
pub const REFERENCE_DRIVE_TOTAL: usize = 160;
/// Fitted hazard ratios for (rain, fog, night, experts, universal) used as planted effects.
pub const REFERENCE_HAZARD_RATIOS: [f64; 5] = [1.01, 1.01, 5.83, 0.02, 0.17];

const RATE_BRACKET: (f64, f64) = (1e-6, 1e-1);
const CALIBRATION_SLACK: f64 = 0.10;
const MAX_LOG_RATE: f64 = 700.0;
const MAX_DRIVES_PER_COMBINATION: usize = 10_000_000;
const QUADRATURE_INTERVALS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weather {
    Clear,
    Rain,
    Fog,
    Night,
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weather::Clear => "clear",
            Weather::Rain => "rain",
            Weather::Fog => "fog",
            Weather::Night => "night",
        })
    }
}

impl FromStr for Weather {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clear" => Ok(Weather::Clear),
            "rain" => Ok(Weather::Rain),
            "fog" => Ok(Weather::Fog),
            "night" => Ok(Weather::Night),
            other => Err(Error::Invalid(format!("unknown weather `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Combination {
    pub model: ModelType,
    pub weather: Weather,
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.model, self.weather)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub combinations: Vec<Combination>,
    pub minutes_per_combination: f64,
    pub horizon_s: f64,
    /// Log hazard ratios over (rain, fog, night, experts, universal).
    pub true_beta: [f64; 5],
    pub baseline_rate_per_s: f64,
    pub rain_raw_range: (f64, f64),
    pub fog_raw_range: (f64, f64),
    /// Weibull shape of the baseline; 1 for exponential event times.
    pub weibull_shape: f64,
    pub seed: u64,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.combinations.is_empty() {
            return Err(Error::Config("no combinations".into()));
        }
        if !positive(self.horizon_s) {
            return Err(Error::Config(format!(
                "horizon {} must be positive",
                self.horizon_s
            )));
        }
        if !positive(self.minutes_per_combination) {
            return Err(Error::Config(format!(
                "minutes per combination {} must be positive",
                self.minutes_per_combination
            )));
        }
        if !positive(self.baseline_rate_per_s) {
            return Err(Error::Config(format!(
                "baseline rate {} must be positive",
                self.baseline_rate_per_s
            )));
        }
        if !positive(self.weibull_shape) {
            return Err(Error::Config(format!(
                "Weibull shape {} must be positive",
                self.weibull_shape
            )));
        }
        if self.true_beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("true_beta must be finite".into()));
        }
        let ordered = |(lo, hi): (f64, f64), min: f64| lo >= min && lo <= hi && hi <= 100.0;
        if !ordered(self.rain_raw_range, 70.0) {
            return Err(Error::Config(format!(
                "rain range {:?} must be ordered within [70, 100]",
                self.rain_raw_range
            )));
        }
        if !ordered(self.fog_raw_range, 50.0) {
            return Err(Error::Config(format!(
                "fog range {:?} must be ordered within [50, 100]",
                self.fog_raw_range
            )));
        }
        Ok(())
    }

    pub fn total_minutes(&self) -> f64 {
        self.minutes_per_combination * self.combinations.len() as f64
    }

    fn budget_s(&self) -> f64 {
        self.minutes_per_combination * 60.0
    }
}

/// The eleven model/weather combinations of the reference campaign.
pub fn standard_combinations() -> Vec<Combination> {
    use ModelType::*;
    use Weather::*;
    let c = |model, weather| Combination { model, weather };
    vec![
        c(Baseline, Clear),
        c(Baseline, Rain),
        c(Baseline, Fog),
        c(Baseline, Night),
        c(Expert, Rain),
        c(Expert, Fog),
        c(Expert, Night),
        c(Universal, Clear),
        c(Universal, Rain),
        c(Universal, Fog),
        c(Universal, Night),
    ]
}

/// Reference campaign design with planted effects from the reference hazard
/// ratios and the baseline rate calibrated to [`REFERENCE_EVENT_TOTAL`] events.
pub fn standard_campaign_config(seed: u64) -> CampaignConfig {
    let mut config = CampaignConfig {
        combinations: standard_combinations(),
        minutes_per_combination: STANDARD_MINUTES_PER_COMBINATION,
        horizon_s: STANDARD_HORIZON_S,
        true_beta: REFERENCE_HAZARD_RATIOS.map(f64::ln),
        baseline_rate_per_s: 1e-3,
        rain_raw_range: (70.0, 100.0),
        fog_raw_range: (50.0, 100.0),
        weibull_shape: 1.0,
        seed,
    };
    config.baseline_rate_per_s = calibrate_baseline_rate(REFERENCE_EVENT_TOTAL, &config)
        .expect("reference target lies inside the calibration bracket");
    config
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinationSummary {
    pub model: ModelType,
    pub weather: Weather,
    pub drives: usize,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedCampaign {
    pub dataset: Dataset<f64>,
    pub per_combination: Vec<CombinationSummary>,
    pub total_drives: usize,
    pub total_events: usize,
    pub seed: u64,
}

impl SimulatedCampaign {
    pub fn summary_json(&self) -> serde_json::Value {
        json!({
            "per_combination": self.per_combination,
            "total_drives": self.total_drives,
            "total_events": self.total_events,
            "seed": self.seed,
        })
    }
}

struct UnitStream(Xoshiro256PlusPlus);

impl UnitStream {
    fn new(seed: u64) -> Self {
        UnitStream(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    /// Uniform on the open interval (0, 1).
    fn next_open(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

fn linear_predictor(beta: &[f64; 5], z: &[f64; 5]) -> f64 {
    beta.iter().zip(z).map(|(b, v)| b * v).sum()
}

fn simulate_combination(
    config: &CampaignConfig,
    index: usize,
    combination: Combination,
) -> Result<(Vec<Observation<f64>>, CombinationSummary)> {
    let mut stream = UnitStream::new(config.seed ^ index as u64);
    let budget = config.budget_s();
    let shape = config.weibull_shape;
    let label = combination.to_string();
    let mut used = 0.0;
    let mut drives = Vec::new();
    let mut events = 0;
    while used < budget {
        if drives.len() >= MAX_DRIVES_PER_COMBINATION {
            return Err(Error::Config(format!(
                "combination {combination} exceeded {MAX_DRIVES_PER_COMBINATION} drives; baseline rate too high"
            )));
        }
        let u_weather = stream.next_open();
        let u_sun = stream.next_open();
        let u_event = stream.next_open();
        let span = |(lo, hi): (f64, f64)| lo + (hi - lo) * u_weather;
        let rain = if combination.weather == Weather::Rain {
            span(config.rain_raw_range)
        } else {
            0.0
        };
        let fog = if combination.weather == Weather::Fog {
            span(config.fog_raw_range)
        } else {
            0.0
        };
        let sun = if combination.weather == Weather::Night {
            -90.0 * u_sun
        } else {
            90.0 * u_sun
        };
        let z = encode_campaign_covariates(rain, fog, sun, combination.model)?;

        let eta = linear_predictor(&config.true_beta, &z);
        if eta > MAX_LOG_RATE {
            return Err(Error::Config(format!(
                "log relative risk {eta} overflows for combination {combination}"
            )));
        }
        let scale = config.baseline_rate_per_s * (eta / shape).exp();
        let t = (-u_event.ln()).powf(1.0 / shape) / scale;
        let event = t < config.horizon_s;
        let duration = if event { t } else { config.horizon_s };
        used += duration;
        events += usize::from(event);
        drives.push(Observation::new(duration, event, z.to_vec()).with_label(label.clone()));
    }
    let summary = CombinationSummary {
        model: combination.model,
        weather: combination.weather,
        drives: drives.len(),
        events,
    };
    Ok((drives, summary))
}

/// Runs the campaign. Output is a pure function of the configuration.
pub fn simulate(config: &CampaignConfig) -> Result<SimulatedCampaign> {
    config.validate()?;
    let mut observations = Vec::new();
    let mut per_combination = Vec::with_capacity(config.combinations.len());
    for (i, &c) in config.combinations.iter().enumerate() {
        let (drives, summary) = simulate_combination(config, i, c)?;
        observations.extend(drives);
        per_combination.push(summary);
    }
    let total_drives = observations.len();
    let total_events = per_combination.iter().map(|c| c.events).sum();
    let names = CAMPAIGN_COVARIATES.iter().map(|s| s.to_string()).collect();
    Ok(SimulatedCampaign {
        dataset: Dataset::new(observations, names)?,
        per_combination,
        total_drives,
        total_events,
        seed: config.seed,
    })
}

fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, intervals: usize) -> f64 {
    if hi <= lo {
        return f(lo);
    }
    let n = intervals + intervals % 2;
    let h = (hi - lo) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(lo) + inner + f(hi)) * h / 3.0
}

/// Event probability and expected drive length for one drive with log relative risk `eta`.
fn drive_moments(rate: f64, eta: f64, shape: f64, horizon: f64) -> (f64, f64) {
    if shape == 1.0 {
        let lambda = rate * eta.exp();
        let p = -(-lambda * horizon).exp_m1();
        (p, p / lambda)
    } else {
        let c = rate.powf(shape) * eta.exp();
        let p = -(-c * horizon.powf(shape)).exp_m1();
        let mean = simpson(|t| (-c * t.powf(shape)).exp(), 0.0, horizon, 512);
        (p, mean)
    }
}

/// Long-run expected event count of one combination (renewal-reward).
fn expected_events(config: &CampaignConfig, combination: Combination, rate: f64) -> f64 {
    let beta = &config.true_beta;
    let night = if combination.weather == Weather::Night {
        1.0
    } else {
        0.0
    };
    let model = match combination.model {
        ModelType::Baseline => 0.0,
        ModelType::Expert => beta[3],
        ModelType::Universal => beta[4],
    };
    let fixed = beta[2] * night + model;
    let moments = |eta: f64| drive_moments(rate, eta, config.weibull_shape, config.horizon_s);
    let (p, m) = match combination.weather {
        Weather::Rain | Weather::Fog => {
            let (k, (lo, hi)) = if combination.weather == Weather::Rain {
                (beta[0], config.rain_raw_range)
            } else {
                (beta[1], config.fog_raw_range)
            };
            let width = (hi - lo).max(f64::MIN_POSITIVE);
            let p = simpson(|x| moments(fixed + k * x).0, lo, hi, QUADRATURE_INTERVALS) / width;
            let m = simpson(|x| moments(fixed + k * x).1, lo, hi, QUADRATURE_INTERVALS) / width;
            if hi > lo {
                (p, m)
            } else {
                moments(fixed + k * lo)
            }
        }
        Weather::Clear | Weather::Night => moments(fixed),
    };
    config.budget_s() * p / m
}

/// Expected event total over all combinations at baseline rate `rate`.
pub fn expected_total_events(config: &CampaignConfig, rate: f64) -> f64 {
    config
        .combinations
        .iter()
        .map(|&c| expected_events(config, c, rate))
        .sum()
}

/// Baseline rate whose expected event total matches `target_total_events`,
/// by bisection in log-rate over `[1e-6, 1e-1]` per second.
pub fn calibrate_baseline_rate(target_total_events: usize, config: &CampaignConfig) -> Result<f64> {
    if target_total_events == 0 {
        return Err(Error::Config(
            "calibration target must be at least one event".into(),
        ));
    }
    let mut probe = config.clone();
    probe.baseline_rate_per_s = RATE_BRACKET.0;
    probe.validate()?;

    let target = target_total_events as f64;
    let f = |r: f64| expected_total_events(config, r);
    let (mut lo, mut hi) = (RATE_BRACKET.0.ln(), RATE_BRACKET.1.ln());
    let (f_lo, f_hi) = (f(lo.exp()), f(hi.exp()));
    if target < f_lo * (1.0 - CALIBRATION_SLACK) || target > f_hi * (1.0 + CALIBRATION_SLACK) {
        return Err(Error::Config(format!(
            "target of {target_total_events} events unreachable: expected totals span [{f_lo:.3}, {f_hi:.3}] over rates [{}, {}]",
            RATE_BRACKET.0, RATE_BRACKET.1
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok((0.5 * (lo + hi))
        .exp()
        .clamp(RATE_BRACKET.0, RATE_BRACKET.1))
}
