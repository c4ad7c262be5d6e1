mod common;

use common::{random_dataset, TestRng};
use hazardlab_core::coxph::PartialLikelihood;
use hazardlab_core::{
    fit, hazard_ratio_between, partial_gradient, partial_hessian, partial_log_likelihood,
    predict_survival, Dataset, FitOptions, Observation, TieMethod,
};
use nalgebra::DMatrix;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn random_beta(rng: &mut TestRng, p: usize) -> Vec<f64> {
    (0..p).map(|_| 0.5 * rng.normal()).collect()
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = TestRng::new(31);
    let h = 1e-5;
    for _ in 0..100 {
        let (n, p) = (2 + rng.below(49), 1 + rng.below(4));
        let d = random_dataset(&mut rng, n, p);
        let beta = random_beta(&mut rng, p);
        for ties in [TieMethod::Breslow, TieMethod::Efron] {
            let model = PartialLikelihood::new(&d, ties).unwrap();
            let g = model.gradient(&beta).unwrap();
            for k in 0..p {
                let mut up = beta.clone();
                let mut down = beta.clone();
                up[k] += h;
                down[k] -= h;
                let fd = (model.value(&up).unwrap() - model.value(&down).unwrap()) / (2.0 * h);
                assert!(close(g[k], fd, 1e-6), "{ties}: {} vs {fd}", g[k]);
            }
        }
    }
}

#[test]
fn hessian_matches_differences_of_gradient() {
    let mut rng = TestRng::new(32);
    let h = 1e-5;
    for _ in 0..100 {
        let (n, p) = (2 + rng.below(49), 1 + rng.below(4));
        let d = random_dataset(&mut rng, n, p);
        let beta = random_beta(&mut rng, p);
        for ties in [TieMethod::Breslow, TieMethod::Efron] {
            let model = PartialLikelihood::new(&d, ties).unwrap();
            let hess = model.evaluate_all(&beta).unwrap().hessian;
            for k in 0..p {
                let mut up = beta.clone();
                let mut down = beta.clone();
                up[k] += h;
                down[k] -= h;
                let gu = model.gradient(&up).unwrap();
                let gd = model.gradient(&down).unwrap();
                for j in 0..p {
                    let fd = (gu[j] - gd[j]) / (2.0 * h);
                    assert!(close(hess[j * p + k], fd, 1e-4));
                }
            }
        }
    }
}

#[test]
fn breslow_hessian_is_negative_semidefinite() {
    let mut rng = TestRng::new(33);
    for _ in 0..100 {
        let (n, p) = (2 + rng.below(49), 1 + rng.below(4));
        let d = random_dataset(&mut rng, n, p);
        let beta: Vec<f64> = (0..p).map(|_| 2.0 * rng.normal()).collect();
        let rows = partial_hessian(&d, &beta).unwrap();
        let m = DMatrix::from_fn(p, p, |i, j| rows[i][j]);
        let eig = m.symmetric_eigen();
        assert!(
            eig.eigenvalues.iter().all(|&l| l <= 1e-9),
            "{:?}",
            eig.eigenvalues
        );
    }
}

#[test]
fn value_is_invariant_to_covariate_shift() {
    let mut rng = TestRng::new(34);
    for _ in 0..30 {
        let d = random_dataset(&mut rng, 20, 2);
        let shifted = Dataset::new(
            d.observations()
                .iter()
                .map(|o| {
                    Observation::new(
                        o.duration,
                        o.event,
                        vec![o.covariates[0] + 100.0, o.covariates[1] - 3.0],
                    )
                })
                .collect(),
            d.covariate_names().to_vec(),
        )
        .unwrap();
        let beta = random_beta(&mut rng, 2);
        let a = partial_log_likelihood(&d, &beta).unwrap();
        let b = partial_log_likelihood(&shifted, &beta).unwrap();
        assert!((a - b).abs() < 1e-9);
        let ga = partial_gradient(&d, &beta).unwrap();
        let gb = partial_gradient(&shifted, &beta).unwrap();
        assert!(ga.iter().zip(&gb).all(|(x, y)| (x - y).abs() < 1e-9));
    }
}

fn transform(d: &Dataset<f64>, f: impl Fn(usize, f64) -> f64) -> Dataset<f64> {
    Dataset::new(
        d.observations()
            .iter()
            .map(|o| {
                let z = o
                    .covariates
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| f(k, v))
                    .collect();
                Observation::new(o.duration, o.event, z)
            })
            .collect(),
        d.covariate_names().to_vec(),
    )
    .unwrap()
}

/// Exponential two-covariate data with enough events for a finite optimum.
fn regular_dataset(seed: u64, n: usize) -> Dataset<f64> {
    let mut rng = TestRng::new(seed);
    let obs = (0..n)
        .map(|_| {
            let z = vec![rng.normal(), f64::from(u8::from(rng.unit() < 0.5))];
            let rate = 0.1 * (0.4 * z[0] - 0.7 * z[1]).exp();
            let t = -rng.unit().ln() / rate;
            let c = 5.0 + 20.0 * rng.unit();
            Observation::new(t.min(c), t < c, z)
        })
        .collect();
    Dataset::new(obs, vec!["x".into(), "g".into()]).unwrap()
}

#[test]
fn centering_does_not_move_the_optimum() {
    for seed in 0..10 {
        let d = regular_dataset(seed, 80);
        let means: Vec<f64> = (0..2)
            .map(|k| d.column(k).iter().sum::<f64>() / d.len() as f64)
            .collect();
        let centered = transform(&d, |k, v| v - means[k]);
        let a = fit(&d, &FitOptions::default()).unwrap();
        let b = fit(&centered, &FitOptions::default()).unwrap();
        for k in 0..2 {
            assert!((a.coefficients[k] - b.coefficients[k]).abs() < 1e-8);
        }
        assert!((a.log_likelihood - b.log_likelihood).abs() < 1e-8);
    }
}

#[test]
fn scaling_a_covariate_rescales_its_coefficient() {
    for seed in 0..10 {
        let d = regular_dataset(100 + seed, 80);
        let c = 7.5;
        let scaled = transform(&d, |k, v| if k == 0 { v * c } else { v });
        let a = fit(&d, &FitOptions::default()).unwrap();
        let b = fit(&scaled, &FitOptions::default()).unwrap();
        assert!(close(b.coefficients[0], a.coefficients[0] / c, 1e-6));
        assert!(close(b.coefficients[1], a.coefficients[1], 1e-6));
        assert!((a.log_likelihood - b.log_likelihood).abs() < 1e-8);
    }
}

#[test]
fn coefficient_sign_follows_planted_ratio() {
    let planted = 2.5f64;
    let mut agree = 0;
    for seed in 0..100 {
        let mut rng = TestRng::new(5000 + seed);
        let obs = (0..120)
            .map(|i| {
                let g = (i % 2) as f64;
                let rate = 0.05 * planted.powf(g);
                let t = -rng.unit().ln() / rate;
                Observation::new(t.min(30.0), t < 30.0, vec![g])
            })
            .collect();
        let d = Dataset::new(obs, vec!["g".into()]).unwrap();
        let f = fit(&d, &FitOptions::default()).unwrap();
        if f.coefficients[0].signum() == planted.ln().signum() {
            agree += 1;
        }
    }
    assert!(agree >= 99, "{agree}/100");
}

#[test]
fn recovers_planted_night_hazard_ratio() {
    let planted = 5.83f64;
    let mut rng = TestRng::new(7);
    let obs = (0..10_000)
        .map(|_| {
            let night = f64::from(u8::from(rng.unit() < 0.5));
            let rate = 1e-3 * planted.powf(night);
            let t = -rng.unit().ln() / rate;
            Observation::new(t.min(600.0), t < 600.0, vec![night])
        })
        .collect();
    let d = Dataset::new(obs, vec!["night".into()]).unwrap();
    let f = fit(&d, &FitOptions::default()).unwrap();
    assert!(f.converged);
    let hr = f.hazard_ratios[0];
    assert!(hr > planted * 0.9 && hr < planted * 1.1, "HR = {hr}");
}

#[test]
fn prediction_is_power_of_baseline() {
    let d = regular_dataset(3, 100);
    let f = fit(&d, &FitOptions::default()).unwrap();
    let times: Vec<f64> = (0..40).map(|k| k as f64 * 0.7).collect();
    let base = predict_survival(&f, &[0.0, 0.0], &times).unwrap();
    for z in [[1.0, 0.0], [-0.5, 1.0], [2.0, 1.0]] {
        let curve = predict_survival(&f, &z, &times).unwrap();
        let rr = hazard_ratio_between(&f, &z, &[0.0, 0.0]).unwrap();
        for i in 0..times.len() {
            assert!((curve.survival[i] - base.survival[i].powf(rr)).abs() < 1e-12);
        }
        assert_eq!(curve.survival[0], 1.0);
    }
}

#[test]
fn efron_and_breslow_agree_without_ties() {
    let d = regular_dataset(11, 60);
    let b = fit(&d, &FitOptions::default()).unwrap();
    let e = fit(
        &d,
        &FitOptions {
            tie_method: TieMethod::Efron,
            ..FitOptions::default()
        },
    )
    .unwrap();
    for k in 0..2 {
        assert!((b.coefficients[k] - e.coefficients[k]).abs() < 1e-10);
    }
}

#[test]
fn non_convergence_is_reported_not_hidden() {
    let d = regular_dataset(12, 60);
    let f = fit(
        &d,
        &FitOptions {
            max_iterations: 1,
            ..FitOptions::default()
        },
    )
    .unwrap();
    assert!(!f.converged);
    assert!(f.gradient_norm > 1e-7);
    assert!(predict_survival(&f, &[0.0, 0.0], &[1.0]).is_err());
}

#[test]
fn fits_in_single_precision() {
    let d64 = regular_dataset(4, 200);
    let obs = d64
        .observations()
        .iter()
        .map(|o| {
            Observation::new(
                o.duration as f32,
                o.event,
                o.covariates.iter().map(|&v| v as f32).collect(),
            )
        })
        .collect();
    let d32 = Dataset::<f32>::new(obs, d64.covariate_names().to_vec()).unwrap();
    let f64fit = fit(&d64, &FitOptions::default()).unwrap();
    let f32fit = fit(
        &d32,
        &FitOptions {
            tolerance: 1e-3,
            ..FitOptions::default()
        },
    )
    .unwrap();
    assert!(f32fit.converged);
    for k in 0..2 {
        assert!((f32fit.coefficients[k] as f64 - f64fit.coefficients[k]).abs() < 1e-3);
    }
}
