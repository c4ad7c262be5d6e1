//! Product-limit survival, cumulative hazard and the observed/expected hazard ratio.

use std::fmt::Write as _;

use serde::Serialize;

use crate::data::{build_event_table, Dataset};
use crate::error::{Error, Result};
use crate::normal;
use crate::scalar::Scalar;

/// Right-continuous step estimate of the survival function.
///
/// `survival[i]` holds on `[times[i], times[i + 1])`; before `times[0]` the
/// survival is 1 and after the last step it is held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve<T> {
    pub times: Vec<T>,
    pub survival: Vec<T>,
    pub ci_lower: Vec<T>,
    pub ci_upper: Vec<T>,
    pub at_risk: Vec<usize>,
    /// Subjects at risk at time zero.
    pub total: usize,
    pub confidence_level: T,
    /// Set when the input had no events; the curve is then identically 1.
    pub all_censored: bool,
    /// Largest observed duration; the curve is defined up to here.
    pub max_time: T,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CurveColumns<T> {
    t: Vec<T>,
    survival: Vec<T>,
    ci_lower: Vec<T>,
    ci_upper: Vec<T>,
    at_risk: Vec<usize>,
}

impl<T: Scalar> SurvivalCurve<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn step_index(&self, t: T) -> Option<usize> {
        let k = self.times.partition_point(|&s| s <= t);
        k.checked_sub(1)
    }

    pub fn survival_at(&self, t: T) -> T {
        self.step_index(t).map_or(T::one(), |i| self.survival[i])
    }

    /// `(lower, upper)` confidence bounds in effect at `t`.
    pub fn interval_at(&self, t: T) -> (T, T) {
        self.step_index(t).map_or((T::one(), T::one()), |i| {
            (self.ci_lower[i], self.ci_upper[i])
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Rows as serialized: an origin row at t = 0 (unless a step sits there) then each step.
    fn columns(&self) -> CurveColumns<T> {
        let mut c = CurveColumns {
            t: Vec::with_capacity(self.len() + 1),
            survival: Vec::with_capacity(self.len() + 1),
            ci_lower: Vec::with_capacity(self.len() + 1),
            ci_upper: Vec::with_capacity(self.len() + 1),
            at_risk: Vec::with_capacity(self.len() + 1),
        };
        if self.times.first().is_none_or(|&t| t > T::zero()) {
            c.t.push(T::zero());
            c.survival.push(T::one());
            c.ci_lower.push(T::one());
            c.ci_upper.push(T::one());
            c.at_risk.push(self.total);
        }
        c.t.extend_from_slice(&self.times);
        c.survival.extend_from_slice(&self.survival);
        c.ci_lower.extend_from_slice(&self.ci_lower);
        c.ci_upper.extend_from_slice(&self.ci_upper);
        c.at_risk.extend_from_slice(&self.at_risk);
        c
    }

    /// CSV with header `t,survival,ci_lower,ci_upper,at_risk`.
    pub fn to_csv_string(&self) -> String {
        let c = self.columns();
        let mut out = String::from("t,survival,ci_lower,ci_upper,at_risk\n");
        for i in 0..c.t.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.t[i], c.survival[i], c.ci_lower[i], c.ci_upper[i], c.at_risk[i]
            );
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.columns()).expect("curve columns serialize")
    }
}

/// Step function `H(t) = -ln S(t)` on the steps of a survival curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardCurve<T> {
    pub times: Vec<T>,
    /// `+inf` where the survival estimate reached zero.
    pub cumulative_hazard: Vec<T>,
}

impl<T: Scalar> HazardCurve<T> {
    pub fn hazard_at(&self, t: T) -> T {
        let k = self.times.partition_point(|&s| s <= t);
        k.checked_sub(1)
            .map_or(T::zero(), |i| self.cumulative_hazard[i])
    }
}

/// Observed and log-rank expected event counts for two groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoGroupHR<T> {
    pub observed_a: usize,
    pub observed_b: usize,
    pub expected_a: T,
    pub expected_b: T,
    /// `(O_A / E_A) / (O_B / E_B)`; `None` when a denominator vanishes.
    pub hazard_ratio: Option<T>,
}

impl<T: Scalar> TwoGroupHR<T> {
    pub fn is_defined(&self) -> bool {
        self.hazard_ratio.is_some()
    }
}

fn check_level<T: Scalar>(level: T) -> Result<()> {
    if level > T::zero() && level < T::one() {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "confidence level {level} must lie in (0, 1)"
        )))
    }
}

/// Kaplan-Meier estimate with Greenwood log(-log) confidence bands.
pub fn kaplan_meier<T: Scalar>(
    dataset: &Dataset<T>,
    confidence_level: T,
) -> Result<SurvivalCurve<T>> {
    check_level(confidence_level)?;
    let table = build_event_table(dataset)?;
    let z = normal::two_sided_critical(confidence_level);

    let n = table.rows.len();
    let mut curve = SurvivalCurve {
        times: Vec::with_capacity(n),
        survival: Vec::with_capacity(n),
        ci_lower: Vec::with_capacity(n),
        ci_upper: Vec::with_capacity(n),
        at_risk: Vec::with_capacity(n),
        total: table.total,
        confidence_level,
        all_censored: table.rows.is_empty(),
        max_time: dataset.max_duration(),
        label: None,
    };

    let mut s = T::one();
    let mut greenwood = T::zero();
    for row in &table.rows {
        let at_risk = T::count(row.at_risk);
        let deaths = T::count(row.deaths);
        s *= (at_risk - deaths) / at_risk;
        let (lo, hi) = if row.at_risk > row.deaths {
            greenwood += deaths / (at_risk * (at_risk - deaths));
            let log_s = s.ln();
            let se = greenwood.sqrt() / log_s.abs();
            (s.powf((z * se).exp()), s.powf((-z * se).exp()))
        } else {
            (T::zero(), T::zero())
        };
        curve.times.push(row.time);
        curve.survival.push(s);
        curve.ci_lower.push(lo.min(s));
        curve.ci_upper.push(hi.max(s));
        curve.at_risk.push(row.at_risk);
    }
    Ok(curve)
}

/// `H(t) = -ln S(t)` at every step of `curve`.
pub fn cumulative_hazard<T: Scalar>(curve: &SurvivalCurve<T>) -> HazardCurve<T> {
    HazardCurve {
        times: curve.times.clone(),
        cumulative_hazard: curve
            .survival
            .iter()
            .map(|&s| {
                if s > T::zero() {
                    -s.ln()
                } else {
                    T::infinity()
                }
            })
            .collect(),
    }
}

/// Observed/expected hazard ratio between two groups.
///
/// Expected counts accumulate `n_g * d / n` over the distinct event times of
/// the pooled sample.
pub fn two_group_hazard_ratio<T: Scalar>(
    group_a: &Dataset<T>,
    group_b: &Dataset<T>,
) -> Result<TwoGroupHR<T>> {
    // (duration, event, in group a)
    let mut pooled: Vec<(T, bool, bool)> = group_a
        .observations()
        .iter()
        .map(|o| (o.duration, o.event, true))
        .chain(
            group_b
                .observations()
                .iter()
                .map(|o| (o.duration, o.event, false)),
        )
        .collect();
    pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite durations"));

    let observed_a = group_a.event_count();
    let observed_b = group_b.event_count();
    if observed_a + observed_b == 0 {
        return Err(Error::NoEvents);
    }

    let mut left_a = group_a.len();
    let mut left_b = group_b.len();
    let mut expected_a = T::zero();
    let mut expected_b = T::zero();
    let mut i = 0;
    while i < pooled.len() {
        let t = pooled[i].0;
        let (mut d, mut gone_a, mut gone_b) = (0usize, 0usize, 0usize);
        let mut j = i;
        while j < pooled.len() && pooled[j].0 == t {
            d += usize::from(pooled[j].1);
            if pooled[j].2 {
                gone_a += 1;
            } else {
                gone_b += 1;
            }
            j += 1;
        }
        if d > 0 {
            let n = T::count(left_a + left_b);
            let d = T::count(d);
            expected_a += T::count(left_a) * d / n;
            expected_b += T::count(left_b) * d / n;
        }
        left_a -= gone_a;
        left_b -= gone_b;
        i = j;
    }

    let hazard_ratio = if expected_a > T::zero() && expected_b > T::zero() && observed_b > 0 {
        Some((T::count(observed_a) / expected_a) / (T::count(observed_b) / expected_b))
    } else {
        None
    };
    Ok(TwoGroupHR {
        observed_a,
        observed_b,
        expected_a,
        expected_b,
        hazard_ratio,
    })
}
