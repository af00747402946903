//! Escape times from metastable neighbourhoods.
//!
//! A neighbourhood is three Fourier-metric balls around a centre profile:
//! `A = B(alpha)`, the annulus `B = B[2 beta] \ B(beta)` and `C = B(gamma)`.
//! A replica starts in `A` and runs until its empirical measure leaves `C`.
//! Along the way the excursions `sigma_k` (first visit to `B` after
//! `tau_k`) and `tau_{k+1}` (next visit to `A` or exit from `C`) are logged.

mod sweeps;

pub use sweeps::{
    escape_scaling_sweep, evenly_spaced, hypothesis_report, mixing_scaling_sweep, EscapeRow, EscapeSweep,
    HypothesisReport, MixingMode, MixingRow, MixingSweep, ReportOptions,
};

use crate::exact::StateSet;
use crate::hydro::{fourier_metric, DensitySlice, FourierCoeffs, FourierTracker, MetricValue, DEFAULT_TRUNCATION};
use crate::model::{Configuration, Dynamics, LocalRate};
use crate::simulator::{parse_event_log, Event, SimState};
use crate::stats::{ks_statistic, mean};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Events between recomputations of the tracked Fourier pairings.
const RESYNC_EVERY: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    center: DensitySlice,
    center_coeffs: FourierCoeffs,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k_max: usize,
}

/// Where a configuration sits relative to the balls, decided with the tail
/// bound against the caller: inside `A` only if `d + tail < alpha`, outside
/// `C` only if `d - tail > gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    InA,
    InB,
    Escaped,
    Other,
}

impl NeighborhoodSpec {
    /// Requires `0 < alpha < beta` and `2 beta < gamma`.
    pub fn new(center: DensitySlice, alpha: f64, beta: f64, gamma: f64, k_max: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < beta && 2.0 * beta < gamma) {
            return Err(Error::InvalidRadii(format!(
                "need 0 < alpha < beta and 2 beta < gamma, got {alpha}, {beta}, {gamma}"
            )));
        }
        if k_max == 0 {
            return Err(Error::InvalidArgument("truncation order must be positive".into()));
        }
        let center_coeffs = FourierCoeffs::of_slice(&center, k_max);
        Ok(Self {
            center,
            center_coeffs,
            alpha,
            beta,
            gamma,
            k_max,
        })
    }

    /// Balls around the constant profile `rho`, default truncation.
    pub fn constant(rho: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let mut spec = Self::new(DensitySlice::constant(1, rho)?, alpha, beta, gamma, DEFAULT_TRUNCATION)?;
        spec.center_coeffs = FourierCoeffs::of_constant(rho, DEFAULT_TRUNCATION);
        Ok(spec)
    }

    pub fn center(&self) -> &DensitySlice {
        &self.center
    }

    pub fn distance_coeffs(&self, coeffs: &FourierCoeffs) -> MetricValue {
        fourier_metric(coeffs, &self.center_coeffs, self.k_max)
    }

    pub fn distance(&self, config: &Configuration) -> MetricValue {
        self.distance_coeffs(&FourierCoeffs::of_configuration(config, self.k_max))
    }

    pub fn region_of(&self, d: MetricValue) -> Region {
        if d.value - d.tail_bound > self.gamma {
            Region::Escaped
        } else if d.value + d.tail_bound < self.alpha {
            Region::InA
        } else if d.value >= self.beta && d.value <= 2.0 * self.beta {
            Region::InB
        } else {
            Region::Other
        }
    }

    pub fn region(&self, config: &Configuration) -> Region {
        self.region_of(self.distance(config))
    }

    /// The exit set `[C^n]^c` as a state set for exact computations, with the
    /// same conservative membership rule as the simulations.
    pub fn exit_set(&self, n: usize) -> Result<StateSet> {
        StateSet::from_predicate(n, |c| self.region(c) == Region::Escaped)
    }
}

/// One excursion: first visit `sigma` to the annulus after the previous
/// return, then the next time `tau` in `A` or outside `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    pub sigma: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingSample {
    pub seed: u64,
    pub stream: u64,
    /// Exit time from `C`; `+inf` if still inside at the horizon.
    pub hitting_time: f64,
    /// Completed excursions; the last one ends with the exit. A jump across
    /// the annulus straight out of `C` is logged with `sigma = tau`.
    pub excursions: Vec<Excursion>,
    /// Index of the escaping excursion (1-based), as in `Z_nu` outside `C`.
    pub nu: Option<usize>,
    /// `Z_k = eta_{tau_k}` for `k >= 1`, when requested.
    pub chain: Option<Vec<Configuration>>,
    pub event_log: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingOptions {
    pub samples: usize,
    pub seed: u64,
    /// Horizon after which a replica is reported as censored.
    pub t_max: f64,
    pub record_chain: bool,
    pub record_events: bool,
}

impl Default for HittingOptions {
    fn default() -> Self {
        Self {
            samples: 100,
            seed: 0,
            t_max: 1e6,
            record_chain: false,
            record_events: false,
        }
    }
}

/// Excursion bookkeeping shared by live runs and replays.
struct Tracker<'a> {
    spec: &'a NeighborhoodSpec,
    fourier: FourierTracker,
    seeking_b: bool,
    sigma: f64,
    excursions: Vec<Excursion>,
    chain: Option<Vec<Configuration>>,
    events: u64,
}

impl<'a> Tracker<'a> {
    fn new(spec: &'a NeighborhoodSpec, start: &Configuration, record_chain: bool) -> Self {
        Self {
            spec,
            fourier: FourierTracker::new(start, spec.k_max),
            seeking_b: true,
            sigma: f64::NAN,
            excursions: Vec::new(),
            chain: record_chain.then(Vec::new),
            events: 0,
        }
    }

    /// Processes one event at time `t`; returns `true` on exit from `C`.
    fn observe(&mut self, config: &Configuration, event: Event, t: f64) -> bool {
        self.events += 1;
        if self.events % RESYNC_EVERY == 0 {
            self.fourier.resync(config);
        } else {
            for (x, delta) in event.deltas(config) {
                if delta != 0.0 {
                    self.fourier.apply(x, delta);
                }
            }
        }
        let region = self.spec.region_of(self.spec.distance_coeffs(self.fourier.coeffs()));
        match region {
            Region::Escaped => {
                let sigma = if self.seeking_b { t } else { self.sigma };
                self.close(config, sigma, t);
                return true;
            }
            Region::InB if self.seeking_b => {
                self.sigma = t;
                self.seeking_b = false;
            }
            Region::InA if !self.seeking_b => {
                self.close(config, self.sigma, t);
                self.seeking_b = true;
            }
            _ => {}
        }
        false
    }

    fn close(&mut self, config: &Configuration, sigma: f64, tau: f64) {
        self.excursions.push(Excursion { sigma, tau });
        if let Some(chain) = &mut self.chain {
            chain.push(config.clone());
        }
    }
}

/// Outcome of a single escape run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeRun {
    pub hitting_time: f64,
    pub excursions: Vec<Excursion>,
    pub chain: Option<Vec<Configuration>>,
    pub event_log: Option<Vec<u8>>,
}

/// Runs `state` until its empirical measure leaves `C` or `t_max` passes.
/// No condition on the start: a start already outside `C` gives `H = 0`.
pub fn run_escape(
    mut state: SimState,
    spec: &NeighborhoodSpec,
    t_max: f64,
    record_chain: bool,
    record_events: bool,
) -> EscapeRun {
    if spec.region(state.config()) == Region::Escaped {
        return EscapeRun {
            hitting_time: state.time(),
            excursions: Vec::new(),
            chain: record_chain.then(Vec::new),
            event_log: record_events.then(Vec::new),
        };
    }
    if record_events {
        state.enable_event_log();
    }
    let mut tracker = Tracker::new(spec, state.config(), record_chain);
    let mut hitting_time = f64::INFINITY;
    while let Some(ev) = state.step(t_max) {
        if tracker.observe(state.config(), ev, state.time()) {
            hitting_time = state.time();
            break;
        }
    }
    EscapeRun {
        hitting_time,
        excursions: tracker.excursions,
        chain: tracker.chain,
        event_log: record_events.then(|| state.take_event_log()),
    }
}

/// Independent escape runs from `start`; replica `i` uses stream `i`.
pub fn hitting_experiment(
    rate: &LocalRate,
    n: usize,
    spec: &NeighborhoodSpec,
    start: &Configuration,
    opts: &HittingOptions,
) -> Result<Vec<HittingSample>> {
    if start.n() != n {
        return Err(Error::InvalidArgument(format!("start has {} sites, expected {n}", start.n())));
    }
    rate.check_fits(n)?;
    let d = spec.distance(start);
    if spec.region_of(d) != Region::InA {
        return Err(Error::StartOutsideA {
            distance: d.value,
            alpha: spec.alpha,
        });
    }
    (0..opts.samples as u64)
        .into_par_iter()
        .map(|i| {
            let state = SimState::new(start.clone(), rate.clone(), Dynamics::GlauberKawasaki, opts.seed, i)?;
            let run = run_escape(state, spec, opts.t_max, opts.record_chain, opts.record_events);
            Ok(HittingSample {
                seed: opts.seed,
                stream: i,
                hitting_time: run.hitting_time,
                nu: run.hitting_time.is_finite().then_some(run.excursions.len()),
                excursions: run.excursions,
                chain: run.chain,
                event_log: run.event_log,
            })
        })
        .collect()
}

/// Recomputes the excursion record of a logged run from its start.
pub fn replay_excursions(
    start: &Configuration,
    log: &[u8],
    spec: &NeighborhoodSpec,
) -> Result<(f64, Vec<Excursion>, Option<usize>)> {
    let mut config = start.clone();
    let mut tracker = Tracker::new(spec, start, false);
    let mut t = 0.0;
    for rec in parse_event_log(log)? {
        t += rec.dt;
        match rec.event {
            Event::Flip { site, .. } => config = crate::model::flip_map(&config, site),
            Event::Exchange { bond } => config = crate::model::exchange_map(&config, bond),
        }
        if tracker.observe(&config, rec.event, t) {
            let nu = tracker.excursions.len();
            return Ok((t, tracker.excursions, Some(nu)));
        }
    }
    Ok((f64::INFINITY, tracker.excursions, None))
}

/// Kolmogorov-Smirnov comparison of `H / mean(H)` with `Exp(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpLawReport {
    pub statistic: f64,
    pub samples: usize,
    /// `1.63 / sqrt(m)`, the 0.01-level critical value.
    pub threshold: f64,
    pub mean: f64,
    pub passed: bool,
}

pub fn exp_law_test(samples: &[f64]) -> Result<ExpLawReport> {
    const MIN_SAMPLES: usize = 100;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if samples.iter().any(|h| !h.is_finite() || *h < 0.0) {
        return Err(Error::InvalidArgument("hitting samples must be finite and nonnegative".into()));
    }
    let m = mean(samples);
    let normalized: Vec<f64> = samples.iter().map(|h| h / m).collect();
    let statistic = ks_statistic(&normalized, |x| 1.0 - (-x).exp());
    let threshold = 1.63 / (samples.len() as f64).sqrt();
    Ok(ExpLawReport {
        statistic,
        samples: samples.len(),
        threshold,
        mean: m,
        passed: statistic < threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn half_spec() -> NeighborhoodSpec {
        NeighborhoodSpec::constant(0.5, 0.05, 0.1, 0.3).unwrap()
    }

    fn alternating(n: usize) -> Configuration {
        Configuration::from_bits((0..n).map(|x| (x % 2) as u8).collect())
    }

    #[test]
    fn radii_are_validated() {
        for (a, b, g) in [(0.1, 0.1, 0.5), (0.0, 0.1, 0.5), (0.05, 0.1, 0.2), (0.2, 0.1, 0.5)] {
            let err = NeighborhoodSpec::constant(0.5, a, b, g).unwrap_err();
            assert!(matches!(err, Error::InvalidRadii(_)), "{a} {b} {g}: {err:?}");
        }
    }

    #[test]
    fn start_outside_c_hits_at_once() {
        let spec = half_spec();
        let empty = Configuration::from_bits(vec![0; 16]);
        assert_eq!(spec.region(&empty), Region::Escaped);
        let rate = LocalRate::example_2_1(0.5).unwrap();
        let state = SimState::new(empty, rate, Dynamics::GlauberKawasaki, 1, 0).unwrap();
        let run = run_escape(state, &spec, 100.0, false, false);
        assert_eq!(run.hitting_time, 0.0);
        assert!(run.excursions.is_empty());
    }

    #[test]
    fn start_must_lie_in_a() {
        let spec = half_spec();
        let rate = LocalRate::example_2_1(0.5).unwrap();
        let mut bits = vec![0u8; 8];
        bits[..4].fill(1);
        let err = hitting_experiment(&rate, 8, &spec, &Configuration::from_bits(bits), &HittingOptions::default());
        assert!(matches!(err, Err(Error::StartOutsideA { .. })), "{err:?}");
    }

    #[test]
    fn replay_reproduces_the_excursions() {
        let spec = half_spec();
        let rate = LocalRate::example_2_1(0.5).unwrap();
        let start = alternating(8);
        let opts = HittingOptions {
            samples: 20,
            seed: 7,
            record_events: true,
            ..Default::default()
        };
        for s in hitting_experiment(&rate, 8, &spec, &start, &opts).unwrap() {
            let (t, exc, nu) = replay_excursions(&start, s.event_log.as_ref().unwrap(), &spec).unwrap();
            assert!((t - s.hitting_time).abs() < 1e-9 * t.max(1.0));
            assert_eq!(exc, s.excursions);
            assert_eq!(nu, s.nu);
            for e in &exc {
                assert!(e.sigma <= e.tau);
            }
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let spec = half_spec();
        let rate = LocalRate::example_2_1(0.5).unwrap();
        let opts = HittingOptions {
            samples: 8,
            seed: 3,
            ..Default::default()
        };
        let a = hitting_experiment(&rate, 8, &spec, &alternating(8), &opts).unwrap();
        let b = hitting_experiment(&rate, 8, &spec, &alternating(8), &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn larger_system_gives_finite_samples() {
        let spec = NeighborhoodSpec::constant(0.5, 0.05, 0.1, 0.3).unwrap();
        let rate = LocalRate::example_2_1(0.25).unwrap();
        let opts = HittingOptions {
            samples: 4,
            t_max: 1e4,
            ..Default::default()
        };
        let samples = hitting_experiment(&rate, 32, &spec, &evenly_spaced(32, 0.5), &opts).unwrap();
        assert!(samples.iter().all(|s| s.hitting_time.is_finite() && s.hitting_time > 0.0));
    }

    #[test]
    fn exp_law_accepts_exponential_data() {
        let mut rng = stream(11, 0);
        let xs: Vec<f64> = (0..1000).map(|_| -(1.0 - rng.random::<f64>()).ln() * 3.0).collect();
        let r = exp_law_test(&xs).unwrap();
        assert!(r.passed, "{r:?}");
        assert!((r.mean - 3.0).abs() < 0.3);
    }

    #[test]
    fn exp_law_rejects_constants() {
        let r = exp_law_test(&[2.0; 200]).unwrap();
        assert!((r.statistic - (1.0 - (-1.0f64).exp())).abs() < 1e-9);
        assert!(!r.passed);
        assert!(matches!(exp_law_test(&[1.0; 50]), Err(Error::TooFewSamples { needed: 100, got: 50 })));
        let mut bad = vec![1.0; 150];
        bad[3] = f64::INFINITY;
        assert!(exp_law_test(&bad).is_err());
    }
}
