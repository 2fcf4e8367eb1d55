//! Sample statistics used by the Monte Carlo checks.

use num_complex::Complex64;
use statrs::function::erf::erf;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

/// Unbiased sample covariance.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1) as f64
}

/// `E[X^k]` estimated by the sample mean of `x^k`.
pub fn raw_moment(x: &[f64], k: i32) -> f64 {
    mean(&x.iter().map(|v| v.powi(k)).collect::<Vec<_>>())
}

/// Standard error of the sample mean.
pub fn standard_error(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    (variance(x) / x.len() as f64).sqrt()
}

/// Mean and standard error in one call.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    (mean(x), standard_error(x))
}

/// Mean of complex samples with the standard error of its modulus error,
/// `sqrt((Var Re + Var Im) / n)`.
pub fn complex_mean_se(z: &[Complex64]) -> (Complex64, f64) {
    let re: Vec<f64> = z.iter().map(|c| c.re).collect();
    let im: Vec<f64> = z.iter().map(|c| c.im).collect();
    let se = ((variance(&re) + variance(&im)) / z.len().max(1) as f64).sqrt();
    (Complex64::new(mean(&re), mean(&im)), se)
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// `P(a < Z <= b)` for a standard normal `Z`; infinite ends allowed.
pub fn normal_interval_probability(a: f64, b: f64) -> f64 {
    let cdf = |x: f64| {
        if x == f64::INFINITY {
            1.0
        } else if x == f64::NEG_INFINITY {
            0.0
        } else {
            normal_cdf(x)
        }
    };
    (cdf(b) - cdf(a)).max(0.0)
}

/// Kolmogorov-Smirnov distance between the sample and `N(0, 1)`.
pub fn ks_statistic_normal(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at level 0.001.
pub fn ks_critical_001(n: usize) -> f64 {
    1.949 / (n as f64).sqrt()
}

/// Two-proportion z statistic with pooled variance. Returns `None` when the
/// pooled frequency is 0 or 1 (the comparison carries no information).
pub fn two_proportion_z(p1: f64, n1: usize, p2: f64, n2: usize) -> Option<f64> {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (p1 * n1f + p2 * n2f) / (n1f + n2f);
    if pooled <= 0.0 || pooled >= 1.0 {
        return None;
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    Some((p1 - p2) / se)
}

/// `(2k - 1)!!` with `(-1)!! = 1`.
pub fn double_factorial_odd(k: u32) -> f64 {
    (1..=k).map(|j| (2 * j - 1) as f64).product()
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_interval_at_1_96() {
        assert_abs_diff_eq!(normal_interval_probability(-1.96, 1.96), 0.9500042, epsilon = 1e-6);
        assert_eq!(normal_interval_probability(f64::NEG_INFINITY, f64::INFINITY), 1.0);
    }

    #[test]
    fn basic_moments() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert_abs_diff_eq!(variance(&x), 5.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(covariance(&x, &x), variance(&x), epsilon = 1e-15);
        assert_eq!(raw_moment(&x, 2), 7.5);
    }

    #[test]
    fn two_proportion_degenerate() {
        assert!(two_proportion_z(1.0, 10, 1.0, 10).is_none());
        assert_abs_diff_eq!(two_proportion_z(0.5, 100, 0.5, 100).unwrap(), 0.0);
    }

    #[test]
    fn double_factorials() {
        assert_eq!(double_factorial_odd(0), 1.0);
        assert_eq!(double_factorial_odd(2), 3.0);
        assert_eq!(double_factorial_odd(4), 105.0);
    }
}
