//! The weak-topology metric
//! `d(a, b) = sum_k 2^{-|k|} |<a, e_k> - <b, e_k>|`
//! with `e_0 = 1`, `e_k = sqrt2 cos(2 pi k theta)`, `e_{-k} = sqrt2 sin(2 pi k theta)`.

use super::DensitySlice;
use crate::model::Configuration;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

/// Default truncation order; the neglected tail is below `2.6e-12`.
pub const DEFAULT_TRUNCATION: usize = 40;

/// Pairings `<rho, e_k>` for `|k| <= K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCoeffs {
    /// `cos[k] = <rho, e_k>`, with `cos[0]` the total mass.
    pub cos: Vec<f64>,
    /// `sin[k] = <rho, e_{-k}>`; `sin[0]` is unused and zero.
    pub sin: Vec<f64>,
}

impl FourierCoeffs {
    pub fn truncation(&self) -> usize {
        self.cos.len() - 1
    }

    pub fn mass(&self) -> f64 {
        self.cos[0]
    }

    /// Pairings of the trigonometric interpolant of a density slice: the
    /// periodic trapezoidal rule for `2k < M`, half of it at `2k = M`, zero
    /// above. Modes the grid cannot resolve carry nothing, so a constant
    /// slice of any size pairs like [`FourierCoeffs::of_constant`].
    pub fn of_slice(slice: &DensitySlice, k_max: usize) -> Self {
        let m = slice.len();
        let resolved = k_max.min(m / 2);
        let mut cos = vec![0.0; k_max + 1];
        let mut sin = vec![0.0; k_max + 1];
        for (j, &rho) in slice.values().iter().enumerate() {
            let theta = j as f64 / m as f64;
            cos[0] += rho;
            for k in 1..=resolved {
                let arg = 2.0 * PI * k as f64 * theta;
                cos[k] += rho * SQRT_2 * arg.cos();
                sin[k] += rho * SQRT_2 * arg.sin();
            }
        }
        for v in cos.iter_mut().chain(sin.iter_mut()) {
            *v /= m as f64;
        }
        if m % 2 == 0 && resolved == m / 2 && resolved > 0 {
            cos[resolved] *= 0.5;
            sin[resolved] = 0.0;
        }
        Self { cos, sin }
    }

    /// Pairings of a constant density (only the mass survives).
    pub fn of_constant(rho: f64, k_max: usize) -> Self {
        let mut cos = vec![0.0; k_max + 1];
        cos[0] = rho;
        Self {
            cos,
            sin: vec![0.0; k_max + 1],
        }
    }

    /// Exact pairings of the empirical measure `(1/n) sum_x eta(x) delta_{x/n}`.
    pub fn of_configuration(config: &Configuration, k_max: usize) -> Self {
        let n = config.n();
        let mut cos = vec![0.0; k_max + 1];
        let mut sin = vec![0.0; k_max + 1];
        for (x, &b) in config.bits().iter().enumerate() {
            if b == 0 {
                continue;
            }
            let theta = x as f64 / n as f64;
            cos[0] += 1.0;
            for k in 1..=k_max {
                let arg = 2.0 * PI * k as f64 * theta;
                cos[k] += SQRT_2 * arg.cos();
                sin[k] += SQRT_2 * arg.sin();
            }
        }
        for v in cos.iter_mut().chain(sin.iter_mut()) {
            *v /= n as f64;
        }
        Self { cos, sin }
    }
}

/// Truncated metric value with a rigorous bound on the neglected modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub tail_bound: f64,
}

impl MetricValue {
    pub fn lower(&self) -> f64 {
        self.value
    }

    pub fn upper(&self) -> f64 {
        self.value + self.tail_bound
    }
}

/// Sum over `|k| <= K` of the metric series. Each neglected pairing
/// difference is at most `sqrt2 (m_a + m_b)`, so the tail is bounded by
/// `2 sqrt2 (m_a + m_b) 2^{-K}`.
pub fn fourier_metric(a: &FourierCoeffs, b: &FourierCoeffs, k_max: usize) -> MetricValue {
    assert!(k_max >= 1, "truncation order must be at least 1");
    assert!(a.truncation() >= k_max && b.truncation() >= k_max);
    let mut value = (a.cos[0] - b.cos[0]).abs();
    let mut weight = 1.0;
    for k in 1..=k_max {
        weight *= 0.5;
        value += weight * ((a.cos[k] - b.cos[k]).abs() + (a.sin[k] - b.sin[k]).abs());
    }
    let masses = a.mass().abs() + b.mass().abs();
    MetricValue {
        value,
        tail_bound: 2.0 * SQRT_2 * masses * weight,
    }
}

/// Fourier pairings of a configuration's empirical measure, updated in
/// `O(K)` per occupation change.
#[derive(Debug, Clone)]
pub struct FourierTracker {
    n: usize,
    k_max: usize,
    /// `cos_tab[x * (K+1) + k] = sqrt2 cos(2 pi k x / n) / n`
    cos_tab: Vec<f64>,
    sin_tab: Vec<f64>,
    coeffs: FourierCoeffs,
}

impl FourierTracker {
    pub fn new(config: &Configuration, k_max: usize) -> Self {
        let n = config.n();
        let stride = k_max + 1;
        let mut cos_tab = vec![0.0; n * stride];
        let mut sin_tab = vec![0.0; n * stride];
        for x in 0..n {
            cos_tab[x * stride] = 1.0 / n as f64;
            for k in 1..=k_max {
                let arg = 2.0 * PI * (k * x) as f64 / n as f64;
                cos_tab[x * stride + k] = SQRT_2 * arg.cos() / n as f64;
                sin_tab[x * stride + k] = SQRT_2 * arg.sin() / n as f64;
            }
        }
        Self {
            n,
            k_max,
            cos_tab,
            sin_tab,
            coeffs: FourierCoeffs::of_configuration(config, k_max),
        }
    }

    pub fn coeffs(&self) -> &FourierCoeffs {
        &self.coeffs
    }

    pub fn truncation(&self) -> usize {
        self.k_max
    }

    /// Site `x` changed occupation by `delta` (`+1` or `-1`).
    #[inline]
    pub fn apply(&mut self, x: usize, delta: f64) {
        let stride = self.k_max + 1;
        let base = x * stride;
        let ct = &self.cos_tab[base..base + stride];
        let st = &self.sin_tab[base..base + stride];
        for k in 0..stride {
            self.coeffs.cos[k] += delta * ct[k];
            self.coeffs.sin[k] += delta * st[k];
        }
    }

    /// Recompute from scratch to shed accumulated rounding.
    pub fn resync(&mut self, config: &Configuration) {
        debug_assert_eq!(config.n(), self.n);
        self.coeffs = FourierCoeffs::of_configuration(config, self.k_max);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_inputs_and_constants() {
        let s = DensitySlice::from_fn(64, |t| 0.5 + 0.2 * (2.0 * PI * t).sin()).unwrap();
        let c = FourierCoeffs::of_slice(&s, 40);
        assert_eq!(fourier_metric(&c, &c, 40).value, 0.0);
        let one = FourierCoeffs::of_slice(&DensitySlice::constant(64, 1.0).unwrap(), 40);
        let zero = FourierCoeffs::of_slice(&DensitySlice::constant(64, 0.0).unwrap(), 40);
        let d = fourier_metric(&one, &zero, 40);
        assert!((d.value - 1.0).abs() < 1e-12, "{}", d.value);
        assert!(d.tail_bound < 2.6e-12);
    }

    #[test]
    fn coarse_constant_slices_pair_like_constants() {
        for m in [1, 2, 3, 8] {
            let c = FourierCoeffs::of_slice(&DensitySlice::constant(m, 0.3).unwrap(), 40);
            let d = fourier_metric(&c, &FourierCoeffs::of_constant(0.3, 40), 40).value;
            assert!(d < 1e-15, "m = {m}: {d}");
        }
    }

    #[test]
    fn nyquist_mode_is_halved() {
        // 1010 samples 0.5 + 0.5 cos(2 pi 2 theta): <rho, e_2> = 0.5 / sqrt2
        let s = DensitySlice::new(vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let c = FourierCoeffs::of_slice(&s, 5);
        assert!((c.cos[2] - 0.5 / SQRT_2).abs() < 1e-15);
        assert!(c.cos[1].abs() < 1e-15 && c.cos[3] == 0.0 && c.cos[4] == 0.0);
    }

    #[test]
    fn single_mode_weight() {
        // rho = 0.5 + 0.1 cos(2 pi theta): <rho, e_1> = 0.1 / sqrt2
        let s = DensitySlice::from_fn(128, |t| 0.5 + 0.1 * (2.0 * PI * t).cos()).unwrap();
        let c = FourierCoeffs::of_slice(&s, 10);
        let flat = FourierCoeffs::of_constant(0.5, 10);
        let d = fourier_metric(&c, &flat, 10).value;
        assert!((d - 0.5 * 0.1 / SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn tracker_matches_direct_pairings() {
        let mut cfg = Configuration::parse("1100101000111010").unwrap();
        let mut tr = FourierTracker::new(&cfg, 12);
        for (x, step) in [(3usize, 1.0), (0, -1.0), (14, -1.0), (7, 1.0)] {
            cfg.toggle(x);
            tr.apply(x, step);
        }
        let direct = FourierCoeffs::of_configuration(&cfg, 12);
        let d = fourier_metric(tr.coeffs(), &direct, 12).value;
        assert!(d < 1e-14);
    }
}
