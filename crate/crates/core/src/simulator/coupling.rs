//! Monotone grand coupling of two copies for attractive rates.

use super::tree::IndexSet;
use crate::model::{exchange_rate, is_attractive, Configuration, LocalRate};
use crate::rng::{self, SimRng};
use crate::stats::upper_quantile;
use crate::{Error, Result};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone)]
struct Side {
    bits: Vec<u8>,
    windows: Vec<usize>,
}

impl Side {
    fn new(config: &Configuration, rate: &LocalRate) -> Self {
        Self {
            bits: config.bits().to_vec(),
            windows: (0..config.n()).map(|x| rate.window_index(config, x)).collect(),
        }
    }

    fn toggle(&mut self, x: usize, radius: usize) {
        let n = self.bits.len();
        self.bits[x] ^= 1;
        for o in 0..=2 * radius {
            self.windows[(x + n + o - radius) % n] ^= 1 << o;
        }
    }
}

/// Two copies driven by one event stream so that `upper >= lower` sitewise.
///
/// Exchanges: every bond active in either copy rings at rate `n^2/2` and is
/// exchanged in both. Flips: each site rings at rate `max_birth + max_death`
/// and a shared uniform `u` decides; a copy with an empty site is born when
/// `u < c`, one with an occupied site dies when `u >= max_birth + max_death - c`.
#[derive(Debug, Clone)]
pub struct CoupledPair {
    upper: Side,
    lower: Side,
    rate: LocalRate,
    rng: SimRng,
    time: f64,
    site_rate: f64,
    bond_rate: f64,
    bonds: IndexSet,
    discrepancies: usize,
    coalesced_at: Option<f64>,
}

impl CoupledPair {
    pub fn new(
        upper: &Configuration,
        lower: &Configuration,
        rate: LocalRate,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        if !is_attractive(&rate) {
            return Err(Error::AttractivityRequired);
        }
        let n = upper.n();
        if lower.n() != n {
            return Err(Error::InvalidArgument("copies differ in size".into()));
        }
        rate.check_fits(n)?;
        if upper.bits().iter().zip(lower.bits()).any(|(u, l)| u < l) {
            return Err(Error::InvalidArgument(
                "upper copy must dominate lower copy".into(),
            ));
        }
        let mut bonds = IndexSet::new(n);
        for b in 0..n {
            let y = (b + 1) % n;
            if upper.bits()[b] != upper.bits()[y] || lower.bits()[b] != lower.bits()[y] {
                bonds.insert(b);
            }
        }
        let discrepancies = upper
            .bits()
            .iter()
            .zip(lower.bits())
            .filter(|(u, l)| u != l)
            .count();
        Ok(Self {
            upper: Side::new(upper, &rate),
            lower: Side::new(lower, &rate),
            site_rate: rate.max_birth() + rate.max_death(),
            bond_rate: exchange_rate(n),
            rate,
            rng: rng::stream(seed, stream),
            time: 0.0,
            bonds,
            coalesced_at: (discrepancies == 0).then_some(0.0),
            discrepancies,
        })
    }

    /// The extreme pair (all ones, all zeros).
    pub fn extremes(n: usize, rate: LocalRate, seed: u64, stream: u64) -> Result<Self> {
        Self::new(&Configuration::full(n), &Configuration::empty(n), rate, seed, stream)
    }

    pub fn n(&self) -> usize {
        self.upper.bits.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn upper(&self) -> Configuration {
        Configuration::from_bits(self.upper.bits.clone())
    }

    pub fn lower(&self) -> Configuration {
        Configuration::from_bits(self.lower.bits.clone())
    }

    /// Number of sites where the copies differ.
    pub fn discrepancies(&self) -> usize {
        self.discrepancies
    }

    pub fn coalescence_time(&self) -> Option<f64> {
        self.coalesced_at
    }

    pub fn dominance_holds(&self) -> bool {
        self.upper.bits.iter().zip(&self.lower.bits).all(|(u, l)| u >= l)
    }

    /// One event of the coupled stream, or `false` if the next event falls
    /// after `t_limit` (the clock then stops at `t_limit`).
    pub fn step(&mut self, t_limit: f64) -> bool {
        let n = self.n();
        let flip_total = self.site_rate * n as f64;
        let total = flip_total + self.bond_rate * self.bonds.len() as f64;
        let e: f64 = self.rng.sample(Exp1);
        let t_next = self.time + e / total;
        if t_next > t_limit {
            self.time = t_limit;
            return false;
        }
        self.time = t_next;
        let r = self.rate.radius();
        let v = self.rng.random::<f64>() * total;
        if v < flip_total {
            let x = ((v / self.site_rate) as usize).min(n - 1);
            let u = self.rng.random::<f64>() * self.site_rate;
            let before = self.upper.bits[x] != self.lower.bits[x];
            for copy in [&mut self.upper, &mut self.lower] {
                let c = self.rate.at(copy.windows[x]);
                let fires = if copy.bits[x] == 0 {
                    u < c
                } else {
                    u >= self.site_rate - c
                };
                if fires {
                    copy.toggle(x, r);
                }
            }
            let after = self.upper.bits[x] != self.lower.bits[x];
            self.discrepancies = self.discrepancies + after as usize - before as usize;
            self.refresh_bond((x + n - 1) % n);
            self.refresh_bond(x);
            debug_assert!(self.upper.bits[x] >= self.lower.bits[x], "dominance lost at {x}");
        } else {
            let k = self.rng.random_range(0..self.bonds.len());
            let b = self.bonds.nth(k);
            let y = (b + 1) % n;
            let before = (self.upper.bits[b] != self.lower.bits[b]) as usize
                + (self.upper.bits[y] != self.lower.bits[y]) as usize;
            for copy in [&mut self.upper, &mut self.lower] {
                if copy.bits[b] != copy.bits[y] {
                    copy.toggle(b, r);
                    copy.toggle(y, r);
                }
            }
            let after = (self.upper.bits[b] != self.lower.bits[b]) as usize
                + (self.upper.bits[y] != self.lower.bits[y]) as usize;
            self.discrepancies = self.discrepancies + after - before;
            self.refresh_bond((b + n - 1) % n);
            self.refresh_bond(b);
            self.refresh_bond(y);
            debug_assert!(
                self.upper.bits[b] >= self.lower.bits[b] && self.upper.bits[y] >= self.lower.bits[y],
                "dominance lost at bond {b}"
            );
        }
        if self.discrepancies == 0 && self.coalesced_at.is_none() {
            self.coalesced_at = Some(self.time);
        }
        true
    }

    /// Runs to `t_end`, returning the coalescence time if it has happened.
    pub fn advance(&mut self, t_end: f64) -> Option<f64> {
        while self.step(t_end) {}
        self.coalesced_at
    }

    /// Runs until the copies agree or `t_max` is reached.
    pub fn run_to_coalescence(&mut self, t_max: f64) -> Option<f64> {
        while self.coalesced_at.is_none() && self.step(t_max) {}
        self.coalesced_at
    }

    fn refresh_bond(&mut self, b: usize) {
        let y = (b + 1) % self.n();
        let active = self.upper.bits[b] != self.upper.bits[y] || self.lower.bits[b] != self.lower.bits[y];
        self.bonds.assign(b, active);
    }
}

/// Coalescence times of the extreme pair over `replicas` independent streams,
/// `+inf` for runs still apart at `t_max`. Replica `i` uses stream `i` of
/// `seed`, so the result does not depend on scheduling.
pub fn coalescence_times(
    rate: &LocalRate,
    n: usize,
    replicas: usize,
    seed: u64,
    t_max: f64,
) -> Result<Vec<f64>> {
    if !is_attractive(rate) {
        return Err(Error::AttractivityRequired);
    }
    rate.check_fits(n)?;
    (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut pair = CoupledPair::extremes(n, rate.clone(), seed, i)?;
            Ok(pair.run_to_coalescence(t_max).unwrap_or(f64::INFINITY))
        })
        .collect()
}

/// Empirical upper bound on `t_mix(eps)` from coalescence of the extreme pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingEstimate {
    /// Empirical `(1 - eps)`-quantile of the coalescence time.
    pub time: f64,
    /// The quantile at `eps - delta`, with `delta` the 95% DKW band width;
    /// `None` when `eps <= delta`.
    pub conservative: Option<f64>,
    pub replicas: usize,
    pub eps: f64,
    /// Runs that had not coalesced by `t_max`.
    pub censored: usize,
    pub note: String,
}

/// Monotone sandwiching gives `max_eta TV(P_eta(eta_t), mu) <= P(T_coal > t)`
/// for the extreme pair, so the `(1 - eps)`-quantile of `T_coal` bounds
/// `t_mix(eps)` from above, up to sampling error.
pub fn tv_mixing_upper_estimate(
    rate: &LocalRate,
    n: usize,
    eps: f64,
    replicas: usize,
    seed: u64,
    t_max: f64,
) -> Result<CouplingEstimate> {
    let samples = coalescence_times(rate, n, replicas, seed, t_max)?;
    Ok(estimate_from_samples(&samples, eps))
}

pub(crate) fn estimate_from_samples(samples: &[f64], eps: f64) -> CouplingEstimate {
    let m = samples.len();
    let delta = ((2.0f64 / 0.05).ln() / (2.0 * m as f64)).sqrt();
    let censored = samples.iter().filter(|t| !t.is_finite()).count();
    let conservative = (eps < 1.0 && eps > delta).then(|| upper_quantile(samples, eps - delta));
    CouplingEstimate {
        time: upper_quantile(samples, eps),
        conservative,
        replicas: m,
        eps,
        censored,
        note: format!(
            "empirical quantile over {m} replicas; 95% DKW band +-{delta:.3} in probability"
        ),
    }
}

impl CouplingEstimate {
    /// Estimate for another threshold on the same sample.
    pub fn requantile(samples: &[f64], eps: f64) -> Self {
        estimate_from_samples(samples, eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominance_along_the_run() {
        let rate = LocalRate::example_2_1(0.25).unwrap();
        let mut pair = CoupledPair::extremes(32, rate, 4, 0).unwrap();
        let mut events = 0;
        while pair.step(0.5) {
            events += 1;
            assert!(pair.dominance_holds());
            let direct = pair
                .upper()
                .bits()
                .iter()
                .zip(pair.lower().bits())
                .filter(|(a, b)| a != b)
                .count();
            assert_eq!(direct, pair.discrepancies());
        }
        assert!(events > 1000);
    }

    #[test]
    fn identical_after_coalescence() {
        let rate = LocalRate::example_2_1(0.0).unwrap();
        let mut pair = CoupledPair::extremes(8, rate, 1, 0).unwrap();
        let t = pair.run_to_coalescence(1e3).expect("coalesces");
        assert!(t > 0.0);
        for _ in 0..2000 {
            pair.step(f64::INFINITY);
            assert_eq!(pair.upper(), pair.lower());
        }
    }

    #[test]
    fn rejects_non_attractive_rates() {
        let rate = LocalRate::example_2_1_printed(0.8).unwrap();
        assert_eq!(
            CoupledPair::extremes(8, rate.clone(), 0, 0).unwrap_err(),
            Error::AttractivityRequired
        );
        assert_eq!(
            tv_mixing_upper_estimate(&rate, 8, 0.25, 4, 0, 10.0).unwrap_err(),
            Error::AttractivityRequired
        );
    }

    #[test]
    fn estimate_edges_and_monotonicity() {
        let rate = LocalRate::example_2_1(0.0).unwrap();
        let samples = coalescence_times(&rate, 16, 64, 3, 1e3).unwrap();
        assert_eq!(CouplingEstimate::requantile(&samples, 1.0).time, 0.0);
        let mut last = f64::INFINITY;
        for eps in [0.05, 0.1, 0.25, 0.5, 0.9] {
            let t = CouplingEstimate::requantile(&samples, eps).time;
            assert!(t <= last);
            last = t;
        }
        let again = coalescence_times(&rate, 16, 64, 3, 1e3).unwrap();
        assert_eq!(samples, again);
    }
}
