//! Standard normal CDF and quantile by rational approximation.
//!
//! `erfc` uses the five-term Hastings form (Abramowitz & Stegun 7.1.26),
//! absolute error below 1.5e-7. The quantile uses the two-term rational form
//! (Abramowitz & Stegun 26.2.23), absolute error below 4.5e-4.

use crate::scalar::Scalar;

const ERFC_P: f64 = 0.327_591_1;
const ERFC_A: [f64; 5] = [
    0.254_829_592,
    -0.284_496_736,
    1.421_413_741,
    -1.453_152_027,
    1.061_405_429,
];

const QUANTILE_C: [f64; 3] = [2.515_517, 0.802_853, 0.010_328];
const QUANTILE_D: [f64; 3] = [1.432_788, 0.189_269, 0.001_308];

/// Complementary error function.
pub fn erfc<T: Scalar>(x: T) -> T {
    let ax = x.abs();
    let t = T::one() / (T::one() + T::lit(ERFC_P) * ax);
    let poly = ERFC_A
        .iter()
        .rev()
        .fold(T::zero(), |acc, &a| (acc + T::lit(a)) * t);
    let tail = poly * (-ax * ax).exp();
    if x >= T::zero() {
        tail
    } else {
        T::lit(2.0) - tail
    }
}

/// Standard normal cumulative distribution function.
pub fn cdf<T: Scalar>(x: T) -> T {
    T::lit(0.5) * erfc(-x / T::lit(std::f64::consts::SQRT_2))
}

/// Two-sided tail probability `2 (1 - cdf(|z|))`.
pub fn two_sided_p<T: Scalar>(z: T) -> T {
    erfc(z.abs() / T::lit(std::f64::consts::SQRT_2)).min(T::one())
}

/// Inverse of [`cdf`] for `p` in (0, 1).
pub fn quantile<T: Scalar>(p: T) -> T {
    assert!(
        p > T::zero() && p < T::one(),
        "quantile needs p in (0, 1), got {p}"
    );
    let upper_tail = |q: T| {
        let t = (T::lit(-2.0) * q.ln()).sqrt();
        let num = T::lit(QUANTILE_C[0]) + t * (T::lit(QUANTILE_C[1]) + t * T::lit(QUANTILE_C[2]));
        let den = T::one()
            + t * (T::lit(QUANTILE_D[0]) + t * (T::lit(QUANTILE_D[1]) + t * T::lit(QUANTILE_D[2])));
        t - num / den
    };
    if p < T::lit(0.5) {
        -upper_tail(p)
    } else {
        upper_tail(T::one() - p)
    }
}

/// Critical value `z` with `cdf(z) - cdf(-z) = level`.
pub fn two_sided_critical<T: Scalar>(level: T) -> T {
    quantile(T::lit(0.5) + level / T::lit(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn erfc_within_documented_error() {
        let n = Normal::standard();
        for i in -800..=800 {
            let x = i as f64 / 100.0;
            assert!((cdf(x) - n.cdf(x)).abs() < 1.5e-7, "x = {x}");
        }
    }

    #[test]
    fn quantile_within_documented_error() {
        let n = Normal::standard();
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            assert!((quantile(p) - n.inverse_cdf(p)).abs() < 4.5e-4, "p = {p}");
        }
        assert!((two_sided_critical(0.95f64) - 1.959_964).abs() < 4.5e-4);
    }

    #[test]
    fn symmetric_and_bounded() {
        assert!((quantile(0.5f64)).abs() < 1e-3);
        assert!((quantile(0.1f64) + quantile(0.9f64)).abs() < 1e-12);
        assert!((two_sided_p(0.0f64) - 1.0).abs() < 1.5e-7);
        assert!(two_sided_p(40.0f64) < 1e-300);
        assert!((two_sided_p(1.96f32) - 0.05).abs() < 1e-3);
    }
}
