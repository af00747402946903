//! Scaling sweeps over the system size and the separation-of-scales report.

use super::{hitting_experiment, HittingOptions, HittingSample, NeighborhoodSpec, Region};
use crate::exact::{build_generator, rate_into_set, stationary_distribution, MixingOptions, StationaryMethod};
use crate::model::{Configuration, Dynamics, LocalRate};
use crate::simulator::{tv_mixing_upper_estimate, CouplingEstimate, SimState};
use crate::stats::{linear_fit, mean_ci, LinearFit};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// `round(rho n)` particles at sites `floor(i n / k)`.
pub fn evenly_spaced(n: usize, rho: f64) -> Configuration {
    let k = (rho.clamp(0.0, 1.0) * n as f64).round() as usize;
    let mut bits = vec![0u8; n];
    for i in 0..k {
        bits[i * n / k] = 1;
    }
    Configuration::from_bits(bits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeRow {
    pub n: usize,
    pub samples: usize,
    pub censored: usize,
    /// Mean over the uncensored samples.
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeSweep {
    pub rows: Vec<EscapeRow>,
    /// Least squares fit of `log(mean H)` against `n`.
    pub fit: Option<LinearFit>,
}

/// Mean escape times for each `n`, all runs starting from the evenly spaced
/// configuration at `start_density`.
pub fn escape_scaling_sweep(
    rate: &LocalRate,
    spec: &NeighborhoodSpec,
    ns: &[usize],
    start_density: f64,
    opts: &HittingOptions,
) -> Result<EscapeSweep> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let start = evenly_spaced(n, start_density);
        let samples = hitting_experiment(rate, n, spec, &start, opts)?;
        let finite: Vec<f64> = samples
            .iter()
            .map(|s| s.hitting_time)
            .filter(|h| h.is_finite())
            .collect();
        let ci = mean_ci(&finite);
        rows.push(EscapeRow {
            n,
            samples: samples.len(),
            censored: samples.len() - finite.len(),
            mean: ci.mean,
            ci_low: ci.low,
            ci_high: ci.high,
        });
    }
    let usable: Vec<&EscapeRow> = rows.iter().filter(|r| r.mean > 0.0 && r.mean.is_finite()).collect();
    let fit = (usable.len() >= 2).then(|| {
        let x: Vec<f64> = usable.iter().map(|r| r.n as f64).collect();
        let y: Vec<f64> = usable.iter().map(|r| r.mean.ln()).collect();
        linear_fit(&x, &y)
    });
    Ok(EscapeSweep { rows, fit })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MixingMode {
    Exact(MixingOptions),
    Coupling { replicas: usize, seed: u64, t_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingRow {
    pub n: usize,
    pub t_mix: f64,
    /// `t_mix / log n`
    pub per_log_n: f64,
    pub coupling: Option<CouplingEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingSweep {
    pub eps: f64,
    pub rows: Vec<MixingRow>,
    /// `t(n_{i+1}) / t(n_i)`
    pub ratios: Vec<f64>,
    /// Fit of `log t_mix` against `n`.
    pub log_linear: Option<LinearFit>,
}

/// `t_mix(eps)` for each `n`, exactly or as a coupling upper estimate.
pub fn mixing_scaling_sweep(rate: &LocalRate, ns: &[usize], eps: f64, mode: &MixingMode) -> Result<MixingSweep> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let (t_mix, coupling) = if eps >= 1.0 {
            (0.0, None)
        } else {
            match *mode {
                MixingMode::Exact(opts) => {
                    let gen = build_generator(n, rate)?;
                    let mu = stationary_distribution(&gen, StationaryMethod::Auto)?;
                    let t = crate::exact::mixing_time_exact(&gen, &mu, &MixingOptions { eps, ..opts })?;
                    (t, None)
                }
                MixingMode::Coupling { replicas, seed, t_max } => {
                    let est = tv_mixing_upper_estimate(rate, n, eps, replicas, seed, t_max)?;
                    (est.time, Some(est))
                }
            }
        };
        rows.push(MixingRow {
            n,
            t_mix,
            per_log_n: t_mix / (n as f64).ln(),
            coupling,
        });
    }
    let ratios = rows.windows(2).map(|w| w[1].t_mix / w[0].t_mix).collect();
    let positive = rows.len() >= 2 && rows.iter().all(|r| r.t_mix > 0.0 && r.t_mix.is_finite());
    let log_linear = positive.then(|| {
        let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.t_mix.ln()).collect();
        linear_fit(&x, &y)
    });
    Ok(MixingSweep {
        eps,
        rows,
        ratios,
        log_linear,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    /// Largest `n` for which the exit-set quantities are computed exactly.
    pub exact_max_n: usize,
    pub burn_in: f64,
    pub run_time: f64,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            exact_max_n: 12,
            burn_in: 10.0,
            run_time: 200.0,
            seed: 0,
        }
    }
}

/// The four quantities behind the separation of scales
/// `t_mix << S_n << E_mu[H]`, for the exit set of `spec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub n: usize,
    /// Stationary mass of the exit set.
    pub exit_mass: f64,
    /// Average jump rate into the exit set from its complement.
    pub entry_rate: f64,
    /// `"exact"` or `"simulation"`.
    pub source: String,
    pub mixing: f64,
    pub mean_hitting: f64,
    /// `sqrt(mixing * mean_hitting)`
    pub s_n: f64,
    /// Fraction of samples with `H < S_n`.
    pub hit_before_s: f64,
    pub samples: usize,
}

pub fn hypothesis_report(
    rate: &LocalRate,
    n: usize,
    spec: &NeighborhoodSpec,
    samples: &[HittingSample],
    mixing: f64,
    opts: &ReportOptions,
) -> Result<HypothesisReport> {
    let hits: Vec<f64> = samples.iter().map(|s| s.hitting_time).filter(|h| h.is_finite()).collect();
    if hits.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let (exit_mass, entry_rate, source) = if n <= opts.exact_max_n {
        let gen = build_generator(n, rate)?;
        let mu = stationary_distribution(&gen, StationaryMethod::Auto)?;
        let set = spec.exit_set(n)?;
        match rate_into_set(&gen, &mu, &set) {
            Ok(r) => (r.mass, r.rate, "exact"),
            Err(Error::DegenerateSet { mass }) => (mass, f64::NAN, "exact"),
            Err(e) => return Err(e),
        }
    } else {
        let (m, r) = simulated_exit_statistics(rate, n, spec, opts)?;
        (m, r, "simulation")
    };
    let mean_hitting = hits.iter().sum::<f64>() / hits.len() as f64;
    let s_n = (mixing * mean_hitting).sqrt();
    let hit_before_s = hits.iter().filter(|&&h| h < s_n).count() as f64 / hits.len() as f64;
    Ok(HypothesisReport {
        n,
        exit_mass,
        entry_rate,
        source: source.into(),
        mixing,
        mean_hitting,
        s_n,
        hit_before_s,
        samples: hits.len(),
    })
}

/// Occupation fraction of the exit set and entries per unit time spent
/// outside it, along one long run started at the centre density.
fn simulated_exit_statistics(
    rate: &LocalRate,
    n: usize,
    spec: &NeighborhoodSpec,
    opts: &ReportOptions,
) -> Result<(f64, f64)> {
    let start = evenly_spaced(n, spec.center().mass());
    let mut sim = SimState::new(start, rate.clone(), Dynamics::GlauberKawasaki, opts.seed, 0)?;
    sim.advance(opts.burn_in);
    let end = opts.burn_in + opts.run_time;
    let mut inside = spec.region(sim.config()) == Region::Escaped;
    let (mut time_in, mut time_out, mut entries) = (0.0, 0.0, 0usize);
    let mut last = sim.time();
    let mut tracker = crate::hydro::FourierTracker::new(sim.config(), spec.k_max);
    let mut events = 0u64;
    while let Some(ev) = sim.step(end) {
        events += 1;
        if events % super::RESYNC_EVERY == 0 {
            tracker.resync(sim.config());
        }
        let dt = sim.time() - last;
        last = sim.time();
        if inside {
            time_in += dt;
        } else {
            time_out += dt;
        }
        if events % super::RESYNC_EVERY != 0 {
            for (x, delta) in ev.deltas(sim.config()) {
                if delta != 0.0 {
                    tracker.apply(x, delta);
                }
            }
        }
        let now = spec.region_of(spec.distance_coeffs(tracker.coeffs())) == Region::Escaped;
        if now && !inside {
            entries += 1;
        }
        inside = now;
    }
    let tail = end - last;
    if inside {
        time_in += tail;
    } else {
        time_out += tail;
    }
    let rate_estimate = if time_out > 0.0 { entries as f64 / time_out } else { f64::NAN };
    Ok((time_in / opts.run_time, rate_estimate))
}
