//! Cox proportional-hazards regression.
//!
//! The partial log-likelihood, its gradient and Hessian are evaluated in one
//! backward sweep over distinct times, accumulating risk-set sums with a
//! running log-sum-exp shift so that no `exp` overflows. Covariates are
//! centered internally; the partial likelihood is invariant to that shift, so
//! coefficients need no back-transformation.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SquareMatrix};
use crate::nonparametric::{HazardCurve, SurvivalCurve};
use crate::normal;
use crate::numfmt;
use crate::scalar::Scalar;

/// Coefficients beyond this magnitude are treated as diverging.
pub const DIVERGENCE_LIMIT: f64 = 20.0;
const MAX_HALVINGS: usize = 20;

/// Handling of tied event times in the partial likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieMethod {
    /// Tied events share the full risk-set denominator.
    #[default]
    Breslow,
    /// Tied events progressively discount their own weight from the denominator.
    Efron,
}

impl fmt::Display for TieMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieMethod::Breslow => "breslow",
            TieMethod::Efron => "efron",
        })
    }
}

impl FromStr for TieMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "breslow" => Ok(TieMethod::Breslow),
            "efron" => Ok(TieMethod::Efron),
            other => Err(Error::Invalid(format!("unknown tie method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T> {
    /// Convergence threshold on the max-norm of the score.
    pub tolerance: T,
    pub max_iterations: usize,
    pub tie_method: TieMethod,
    pub confidence_level: T,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        FitOptions {
            tolerance: T::lit(1e-7),
            max_iterations: 50,
            tie_method: TieMethod::Breslow,
            confidence_level: T::lit(0.95),
        }
    }
}

impl<T: Scalar> FitOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if self.tolerance.is_nan() || self.tolerance <= T::zero() {
            return Err(Error::Invalid(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Invalid("max_iterations must be at least 1".into()));
        }
        if !(self.confidence_level > T::zero() && self.confidence_level < T::one()) {
            return Err(Error::Invalid(format!(
                "confidence level {} must lie in (0, 1)",
                self.confidence_level
            )));
        }
        Ok(())
    }
}

/// A fitted proportional-hazards model.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxFit<T> {
    pub covariate_names: Vec<String>,
    pub coefficients: Vec<T>,
    /// Inverse observed information at the optimum.
    pub covariance: Vec<Vec<T>>,
    pub standard_errors: Vec<T>,
    pub z_scores: Vec<T>,
    pub hazard_ratios: Vec<T>,
    pub ci_lower: Vec<T>,
    pub ci_upper: Vec<T>,
    pub p_values: Vec<T>,
    pub log_likelihood: T,
    /// Log partial likelihood at beta = 0.
    pub null_log_likelihood: T,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the score at the returned coefficients.
    pub gradient_norm: T,
    pub tie_method: TieMethod,
    pub confidence_level: T,
    /// Breslow estimate of the baseline cumulative hazard (all covariates zero).
    pub baseline_cumulative_hazard: HazardCurve<T>,
    /// Risk-set size at each baseline step.
    pub baseline_at_risk: Vec<usize>,
    pub n_observations: usize,
    pub n_events: usize,
}

/// Partial log-likelihood with value, score and information evaluated together.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    pub log_likelihood: T,
    pub gradient: Vec<T>,
    /// Row-major Hessian, empty unless requested.
    pub hessian: Vec<T>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Order {
    Value,
    Gradient,
    Hessian,
}

/// Risk-set structure of a dataset, prepared once and evaluated at many coefficient vectors.
#[derive(Debug, Clone)]
pub struct PartialLikelihood<T> {
    p: usize,
    ties: TieMethod,
    /// Centered covariates, row-major, sorted by ascending duration.
    z: Vec<T>,
    events: Vec<bool>,
    /// `[start, end)` ranges of equal durations, ascending.
    groups: Vec<(usize, usize)>,
    n_events: usize,
}

/// Streaming sums `sum w`, `sum w z`, `sum w z z^T` with `w = exp(eta - shift)`.
struct RiskAccumulator<T> {
    p: usize,
    order: Order,
    shift: T,
    s0: T,
    s1: Vec<T>,
    s2: Vec<T>,
}

impl<T: Scalar> RiskAccumulator<T> {
    fn new(p: usize, order: Order) -> Self {
        RiskAccumulator {
            p,
            order,
            shift: T::neg_infinity(),
            s0: T::zero(),
            s1: vec![T::zero(); if order >= Order::Gradient { p } else { 0 }],
            s2: vec![T::zero(); if order >= Order::Hessian { p * p } else { 0 }],
        }
    }

    fn add(&mut self, eta: T, z: &[T]) {
        if eta > self.shift {
            let rescale = (self.shift - eta).exp();
            self.s0 *= rescale;
            self.s1.iter_mut().for_each(|v| *v *= rescale);
            self.s2.iter_mut().for_each(|v| *v *= rescale);
            self.shift = eta;
        }
        let w = (eta - self.shift).exp();
        self.s0 += w;
        if self.order >= Order::Gradient {
            for (acc, &zi) in self.s1.iter_mut().zip(z) {
                *acc += w * zi;
            }
        }
        if self.order >= Order::Hessian {
            for i in 0..self.p {
                let wz = w * z[i];
                for (j, &zj) in z.iter().enumerate().take(i + 1) {
                    self.s2[i * self.p + j] += wz * zj;
                }
            }
        }
    }

    fn log_sum(&self) -> T {
        self.shift + self.s0.ln()
    }
}

impl<T: Scalar> PartialLikelihood<T> {
    pub fn new(dataset: &Dataset<T>, ties: TieMethod) -> Result<Self> {
        let n_events = dataset.event_count();
        if n_events == 0 {
            return Err(Error::NoEvents);
        }
        let p = dataset.covariate_count();
        let obs = dataset.observations();
        let mut order: Vec<usize> = (0..obs.len()).collect();
        order.sort_by(|&a, &b| {
            obs[a]
                .duration
                .partial_cmp(&obs[b].duration)
                .expect("finite durations")
        });

        let n = T::count(obs.len());
        let means: Vec<T> = (0..p)
            .map(|k| obs.iter().map(|o| o.covariates[k]).sum::<T>() / n)
            .collect();

        let mut z = Vec::with_capacity(obs.len() * p);
        let mut events = Vec::with_capacity(obs.len());
        let mut groups = Vec::new();
        for (pos, &i) in order.iter().enumerate() {
            z.extend(obs[i].covariates.iter().zip(&means).map(|(&v, &m)| v - m));
            events.push(obs[i].event);
            if pos == 0 || obs[i].duration != obs[order[pos - 1]].duration {
                groups.push((pos, pos + 1));
            } else {
                groups.last_mut().expect("group opened").1 = pos + 1;
            }
        }
        Ok(PartialLikelihood {
            p,
            ties,
            z,
            events,
            groups,
            n_events,
        })
    }

    pub fn covariate_count(&self) -> usize {
        self.p
    }

    pub fn event_count(&self) -> usize {
        self.n_events
    }

    fn check_dim(&self, beta: &[T]) -> Result<()> {
        if beta.len() == self.p {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.p,
                got: beta.len(),
            })
        }
    }

    pub fn value(&self, beta: &[T]) -> Result<T> {
        self.check_dim(beta)?;
        Ok(self.evaluate(beta, Order::Value).log_likelihood)
    }

    pub fn gradient(&self, beta: &[T]) -> Result<Vec<T>> {
        self.check_dim(beta)?;
        Ok(self.evaluate(beta, Order::Gradient).gradient)
    }

    /// Value, score and row-major Hessian.
    pub fn evaluate_all(&self, beta: &[T]) -> Result<Evaluation<T>> {
        self.check_dim(beta)?;
        Ok(self.evaluate(beta, Order::Hessian))
    }

    fn row(&self, i: usize) -> &[T] {
        &self.z[i * self.p..(i + 1) * self.p]
    }

    fn eta(&self, beta: &[T], i: usize) -> T {
        self.row(i)
            .iter()
            .zip(beta)
            .fold(T::zero(), |acc, (&z, &b)| acc + z * b)
    }

    fn evaluate(&self, beta: &[T], order: Order) -> Evaluation<T> {
        let p = self.p;
        let mut ll = T::zero();
        let mut grad = vec![T::zero(); if order >= Order::Gradient { p } else { 0 }];
        let mut hess = vec![T::zero(); if order >= Order::Hessian { p * p } else { 0 }];
        let mut risk = RiskAccumulator::new(p, order);
        let mut mean = vec![T::zero(); p];

        for &(start, end) in self.groups.iter().rev() {
            for i in start..end {
                risk.add(self.eta(beta, i), self.row(i));
            }
            let deaths: Vec<usize> = (start..end).filter(|&i| self.events[i]).collect();
            if deaths.is_empty() {
                continue;
            }
            for &i in &deaths {
                ll += self.eta(beta, i);
                for (g, &zi) in grad.iter_mut().zip(self.row(i)) {
                    *g += zi;
                }
            }

            let d = deaths.len();
            let efron = self.ties == TieMethod::Efron && d > 1;
            // Weights of the tied deaths on the risk accumulator's scale.
            let mut tied = RiskAccumulator::new(p, order);
            if efron {
                tied.shift = risk.shift;
                for &i in &deaths {
                    tied.add(self.eta(beta, i), self.row(i));
                }
            }
            let steps = if efron { d } else { 1 };
            let multiplicity = if efron { T::one() } else { T::count(d) };
            for l in 0..steps {
                let frac = T::count(l) / T::count(d);
                let den0 = if efron {
                    risk.s0 - frac * tied.s0
                } else {
                    risk.s0
                };
                ll -= multiplicity * (risk.shift + den0.ln());
                if order < Order::Gradient {
                    continue;
                }
                for k in 0..p {
                    let s1 = if efron {
                        risk.s1[k] - frac * tied.s1[k]
                    } else {
                        risk.s1[k]
                    };
                    mean[k] = s1 / den0;
                    grad[k] -= multiplicity * mean[k];
                }
                if order < Order::Hessian {
                    continue;
                }
                for a in 0..p {
                    for b in 0..=a {
                        let s2 = if efron {
                            risk.s2[a * p + b] - frac * tied.s2[a * p + b]
                        } else {
                            risk.s2[a * p + b]
                        };
                        hess[a * p + b] -= multiplicity * (s2 / den0 - mean[a] * mean[b]);
                    }
                }
            }
        }
        for a in 0..p.min(hess.len()) {
            for b in 0..a {
                hess[b * p + a] = hess[a * p + b];
            }
        }
        Evaluation {
            log_likelihood: ll,
            gradient: grad,
            hessian: hess,
        }
    }
}

/// Breslow partial log-likelihood `sum_d [beta . z_d - ln sum_{R(t_d)} exp(beta . z_j)]`.
pub fn partial_log_likelihood<T: Scalar>(dataset: &Dataset<T>, beta: &[T]) -> Result<T> {
    PartialLikelihood::new(dataset, TieMethod::Breslow)?.value(beta)
}

/// Score vector of [`partial_log_likelihood`].
pub fn partial_gradient<T: Scalar>(dataset: &Dataset<T>, beta: &[T]) -> Result<Vec<T>> {
    PartialLikelihood::new(dataset, TieMethod::Breslow)?.gradient(beta)
}

/// Hessian of [`partial_log_likelihood`] as nested rows.
pub fn partial_hessian<T: Scalar>(dataset: &Dataset<T>, beta: &[T]) -> Result<Vec<Vec<T>>> {
    let eval = PartialLikelihood::new(dataset, TieMethod::Breslow)?.evaluate_all(beta)?;
    Ok(SquareMatrix {
        n: beta.len(),
        data: eval.hessian,
    }
    .rows())
}

fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn information<T: Scalar>(p: usize, hessian: &[T]) -> SquareMatrix<T> {
    SquareMatrix {
        n: p,
        data: hessian.iter().map(|&h| -h).collect(),
    }
}

/// Fits the model by damped Newton-Raphson from beta = 0.
///
/// Converged means the score max-norm is below `options.tolerance` and the
/// Newton step has stopped moving the coefficients.
pub fn fit<T: Scalar>(dataset: &Dataset<T>, options: &FitOptions<T>) -> Result<CoxFit<T>> {
    options.validate()?;
    let names = dataset.covariate_names().to_vec();
    let p = names.len();

    let constant: Vec<&str> = (0..p)
        .filter(|&k| {
            let col = dataset.column(k);
            col.iter().all(|&v| v == col[0])
        })
        .map(|k| names[k].as_str())
        .collect();
    if !constant.is_empty() {
        return Err(Error::Singular(format!(
            " (constant covariate: {})",
            constant.join(", ")
        )));
    }

    let model = PartialLikelihood::new(dataset, options.tie_method)?;
    let step_tolerance = options.tolerance.sqrt();
    let limit = T::lit(DIVERGENCE_LIMIT);
    let singular = |k: usize| Error::Singular(format!(" (pivot at covariate `{}`)", names[k]));

    let mut beta = vec![T::zero(); p];
    let mut eval = model.evaluate(&beta, Order::Hessian);
    let null_log_likelihood = eval.log_likelihood;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        let chol = Cholesky::new(&information(p, &eval.hessian)).map_err(singular)?;
        let step = chol.solve(&eval.gradient);
        let small_step = beta
            .iter()
            .zip(&step)
            .all(|(&b, &s)| s.abs() <= step_tolerance * (T::one() + b.abs()));
        if max_abs(&eval.gradient) < options.tolerance && small_step {
            converged = true;
            break;
        }
        iterations += 1;

        let slack = T::lit(64.0) * T::epsilon() * (T::one() + eval.log_likelihood.abs());
        let mut scale = T::one();
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<T> = beta
                .iter()
                .zip(&step)
                .map(|(&b, &s)| b + scale * s)
                .collect();
            let ll = model.evaluate(&trial, Order::Value).log_likelihood;
            if ll >= eval.log_likelihood - slack {
                accepted = Some(trial);
                break;
            }
            scale /= T::lit(2.0);
        }
        let Some(next) = accepted else {
            break;
        };
        if let Some(k) = next.iter().position(|b| b.abs() > limit || !b.is_finite()) {
            return Err(Error::Separation {
                covariate: names[k].clone(),
            });
        }
        beta = next;
        eval = model.evaluate(&beta, Order::Hessian);
    }
    if !converged && max_abs(&eval.gradient) < options.tolerance {
        // ran out of iterations or line search exactly at the optimum
        let chol = Cholesky::new(&information(p, &eval.hessian)).map_err(singular)?;
        let step = chol.solve(&eval.gradient);
        converged = beta
            .iter()
            .zip(&step)
            .all(|(&b, &s)| s.abs() <= step_tolerance * (T::one() + b.abs()));
    }

    let covariance = Cholesky::new(&information(p, &eval.hessian))
        .map_err(singular)?
        .inverse();
    let z = normal::two_sided_critical(options.confidence_level);
    let standard_errors: Vec<T> = (0..p).map(|k| covariance.get(k, k).sqrt()).collect();
    let z_scores: Vec<T> = beta
        .iter()
        .zip(&standard_errors)
        .map(|(&b, &se)| b / se)
        .collect();
    let (baseline, baseline_at_risk) = breslow_baseline(dataset, &beta);

    Ok(CoxFit {
        hazard_ratios: beta.iter().map(|b| b.exp()).collect(),
        ci_lower: beta
            .iter()
            .zip(&standard_errors)
            .map(|(&b, &se)| (b - z * se).exp())
            .collect(),
        ci_upper: beta
            .iter()
            .zip(&standard_errors)
            .map(|(&b, &se)| (b + z * se).exp())
            .collect(),
        p_values: z_scores.iter().map(|&s| normal::two_sided_p(s)).collect(),
        covariance: covariance.rows(),
        covariate_names: names,
        coefficients: beta,
        standard_errors,
        z_scores,
        log_likelihood: eval.log_likelihood,
        null_log_likelihood,
        iterations,
        converged,
        gradient_norm: max_abs(&eval.gradient),
        tie_method: options.tie_method,
        confidence_level: options.confidence_level,
        baseline_cumulative_hazard: baseline,
        baseline_at_risk,
        n_observations: dataset.len(),
        n_events: model.event_count(),
    })
}

/// `H0(t) = sum_{t_i <= t} d_i / sum_{R(t_i)} exp(beta . z_j)` on uncentered covariates.
fn breslow_baseline<T: Scalar>(dataset: &Dataset<T>, beta: &[T]) -> (HazardCurve<T>, Vec<usize>) {
    let mut obs: Vec<(T, bool, T)> = dataset
        .observations()
        .iter()
        .map(|o| (o.duration, o.event, o.linear_predictor(beta)))
        .collect();
    obs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite durations"));

    // descending sweep collecting (time, deaths, ln risk sum, at risk)
    let mut steps = Vec::new();
    let mut risk = RiskAccumulator::new(0, Order::Value);
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].0;
        let mut deaths = 0;
        while i < obs.len() && obs[i].0 == t {
            risk.add(obs[i].2, &[]);
            deaths += usize::from(obs[i].1);
            i += 1;
        }
        if deaths > 0 {
            steps.push((t, deaths, risk.log_sum(), i));
        }
    }
    steps.reverse();

    let mut h = T::zero();
    let mut curve = HazardCurve {
        times: Vec::with_capacity(steps.len()),
        cumulative_hazard: Vec::with_capacity(steps.len()),
    };
    let mut at_risk = Vec::with_capacity(steps.len());
    for (t, d, log_sum, n) in steps {
        h += T::count(d) * (-log_sum).exp();
        curve.times.push(t);
        curve.cumulative_hazard.push(h);
        at_risk.push(n);
    }
    (curve, at_risk)
}

/// `exp(beta . (z - z_star))`.
pub fn relative_risk<T: Scalar>(beta: &[T], z: &[T], z_star: &[T]) -> Result<T> {
    for v in [z, z_star] {
        if v.len() != beta.len() {
            return Err(Error::Dimension {
                expected: beta.len(),
                got: v.len(),
            });
        }
    }
    let exponent = beta
        .iter()
        .zip(z.iter().zip(z_star))
        .fold(T::zero(), |acc, (&b, (&a, &s))| acc + b * (a - s));
    Ok(exponent.exp())
}

/// Hazard ratio between covariate profiles `z` and `z_star`; constant in time.
pub fn hazard_ratio_between<T: Scalar>(fit: &CoxFit<T>, z: &[T], z_star: &[T]) -> Result<T> {
    relative_risk(&fit.coefficients, z, z_star)
}

/// `S(t | z) = exp(-H0(t) exp(beta . z))` at each of `times`.
pub fn predict_survival<T: Scalar>(
    fit: &CoxFit<T>,
    z: &[T],
    times: &[T],
) -> Result<SurvivalCurve<T>> {
    if !fit.converged {
        return Err(Error::NotConverged {
            iterations: fit.iterations,
            gradient_norm: fit.gradient_norm.to_f64().unwrap_or(f64::NAN),
        });
    }
    if z.len() != fit.coefficients.len() {
        return Err(Error::Dimension {
            expected: fit.coefficients.len(),
            got: z.len(),
        });
    }
    if times
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        || times.iter().any(|t| !t.is_finite())
    {
        return Err(Error::Invalid(
            "prediction times must be finite and strictly ascending".into(),
        ));
    }
    let risk = z
        .iter()
        .zip(&fit.coefficients)
        .fold(T::zero(), |acc, (&v, &b)| acc + v * b)
        .exp();
    let base = &fit.baseline_cumulative_hazard;
    let survival: Vec<T> = times
        .iter()
        .map(|&t| (-base.hazard_at(t) * risk).exp())
        .collect();
    let at_risk = times
        .iter()
        .map(|&t| {
            let k = base.times.partition_point(|&s| s < t);
            fit.baseline_at_risk.get(k).copied().unwrap_or(0)
        })
        .collect();
    Ok(SurvivalCurve {
        times: times.to_vec(),
        ci_lower: survival.clone(),
        ci_upper: survival.clone(),
        survival,
        at_risk,
        total: fit.n_observations,
        confidence_level: fit.confidence_level,
        all_censored: false,
        max_time: times.last().copied().unwrap_or_else(T::zero),
        label: None,
    })
}

impl<T: Scalar> CoxFit<T> {
    /// Report object: per-covariate statistics plus fit diagnostics.
    pub fn report_json(&self) -> serde_json::Value {
        let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
        let covariates: Vec<_> = (0..self.coefficients.len())
            .map(|k| {
                json!({
                    "name": self.covariate_names[k],
                    "coef": f(self.coefficients[k]),
                    "hr": f(self.hazard_ratios[k]),
                    "hr_ci_lower": f(self.ci_lower[k]),
                    "hr_ci_upper": f(self.ci_upper[k]),
                    "se": f(self.standard_errors[k]),
                    "z": f(self.z_scores[k]),
                    "p": f(self.p_values[k]),
                })
            })
            .collect();
        json!({
            "covariates": covariates,
            "log_likelihood": f(self.log_likelihood),
            "iterations": self.iterations,
            "converged": self.converged,
            "tie_method": self.tie_method,
        })
    }

    /// Aligned text table: covariate, hazard ratio, confidence interval, p.
    pub fn table(&self) -> String {
        let f = |x: T| numfmt::sig(x.to_f64().unwrap_or(f64::NAN), 6);
        let level = numfmt::sig(
            self.confidence_level.to_f64().unwrap_or(f64::NAN) * 100.0,
            6,
        );
        let header = [
            "covariate".to_string(),
            "HR".to_string(),
            format!("{level}% CI"),
            "p".to_string(),
        ];
        let rows: Vec<[String; 4]> = (0..self.coefficients.len())
            .map(|k| {
                [
                    self.covariate_names[k].clone(),
                    f(self.hazard_ratios[k]),
                    format!("{} - {}", f(self.ci_lower[k]), f(self.ci_upper[k])),
                    f(self.p_values[k]),
                ]
            })
            .collect();
        let mut widths = header.each_ref().map(String::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: &[String; 4]| {
            let _ = writeln!(
                out,
                "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
                cells[0],
                cells[1],
                cells[2],
                cells[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
        };
        line(&header);
        for row in &rows {
            line(row);
        }
        out
    }
}
