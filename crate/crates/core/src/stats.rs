//! Small statistics helpers shared by the experiments.

use serde::{Deserialize, Serialize};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Mean with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub std_error: f64,
    pub low: f64,
    pub high: f64,
}

pub fn mean_ci(xs: &[f64]) -> MeanCi {
    let m = mean(xs);
    let se = if xs.len() > 1 { std_error(xs) } else { f64::NAN };
    MeanCi {
        mean: m,
        std_error: se,
        low: m - 1.96 * se,
        high: m + 1.96 * se,
    }
}

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need two points for a fit");
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Kolmogorov-Smirnov distance between the empirical law of `xs` and `cdf`.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i as f64 + 1.0) / m - f;
            let below = f - i as f64 / m;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Smallest sample value `t` with at most a fraction `eps` of samples
/// strictly above it; zero when `eps >= 1`.
pub fn upper_quantile(samples: &[f64], eps: f64) -> f64 {
    if eps >= 1.0 || samples.is_empty() {
        return 0.0;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let allowed_above = (eps.max(0.0) * m as f64).floor() as usize;
    if allowed_above >= m {
        return 0.0;
    }
    sorted[m - 1 - allowed_above]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let fit = linear_fit(&x, &y);
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept + 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_of_point_mass() {
        let d = ks_statistic(&[1.0; 50], |x| 1.0 - (-x).exp());
        assert!((d - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn quantile_edges() {
        let s = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(upper_quantile(&s, 1.0), 0.0);
        assert_eq!(upper_quantile(&s, 0.0), 4.0);
        assert_eq!(upper_quantile(&s, 0.25), 3.0);
        assert_eq!(upper_quantile(&s, 0.5), 2.0);
    }
}
