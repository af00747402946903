use crate::config::{self, invalid, neighborhood, positive, probability, reject, Loaded};
use crate::output::{header, num, Output};
use anyhow::Result;
use rdlab_core::exact::{
    build_generator, mean_hitting_exact, mixing_time_exact, rate_into_set, stationary_distribution, tv_curve,
    MixingOptions, StateSet, StationaryMethod,
};
use rdlab_core::hitting::{
    escape_scaling_sweep, evenly_spaced, exp_law_test, hitting_experiment, hypothesis_report, mixing_scaling_sweep,
    HittingOptions, MixingMode, ReportOptions,
};
use rdlab_core::hydro::{evolve, fourier_metric, l2_distance, sup_distance, DensitySlice, FourierCoeffs};
use rdlab_core::ldp::{quasipotential_homogeneous, rate_function, well_depths, QuasiOptions, RateOptions};
use rdlab_core::model::{
    is_attractive, potential_minima, reaction_polynomials, Configuration, Dynamics, LocalRate, ReactionPolynomials,
};
use rdlab_core::rng::stream;
use rdlab_core::simulator::{
    coalescence_times, empirical_profile, sample_profile_configuration, tv_mixing_upper_estimate, CouplingEstimate,
    SimState,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::f64::consts::PI;

/// Initial conditions draw from streams above this offset so they never
/// share a stream with a replica's dynamics.
const START_STREAMS: u64 = 1 << 32;

fn d_truncation() -> usize {
    rdlab_core::hydro::DEFAULT_TRUNCATION
}
fn d_eps() -> f64 {
    0.25
}
fn d_half() -> f64 {
    0.5
}
fn d_one() -> usize {
    1
}

fn exact_method(name: &str) -> Result<StationaryMethod> {
    Ok(match name {
        "auto" => StationaryMethod::Auto,
        "direct" => StationaryMethod::Direct,
        "iterative" => StationaryMethod::Iterative,
        other => reject!("method: expected auto, direct or iterative, got {other:?}"),
    })
}

fn parse_config(n: usize, bits: &str, key: &str) -> Result<Configuration> {
    match Configuration::parse(bits) {
        Some(c) if c.n() == n => Ok(c),
        Some(c) => reject!("{key}: has {} sites, n = {n}", c.n()),
        None => reject!("{key}: expected a string of 0s and 1s, got {bits:?}"),
    }
}

fn cosine_profile(m: usize, density: f64, amplitude: f64) -> Result<DensitySlice> {
    DensitySlice::from_fn(m, |x| density + amplitude * (2.0 * PI * x).cos())
        .map_err(|e| invalid(format!("start_density/start_amplitude: {e}")))
}

/// `"bernoulli"` samples the cosine profile, `"even"` spreads particles
/// evenly at `start_density`, anything else is an explicit 0/1 string.
fn initial_configuration(
    n: usize,
    start: &str,
    density: f64,
    amplitude: f64,
    seed: u64,
    replica: u64,
) -> Result<Configuration> {
    Ok(match start {
        "even" => evenly_spaced(n, density),
        "bernoulli" => {
            let profile = cosine_profile(n, density, amplitude)?;
            sample_profile_configuration(&profile, n, &mut stream(seed, START_STREAMS + replica))
        }
        bits => parse_config(n, bits, "start")?,
    })
}

fn bits_of(c: &Configuration) -> String {
    c.to_string()
}

// potential

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialConfig {
    #[serde(default = "d_grid")]
    grid: usize,
    #[serde(default)]
    depths: bool,
    #[serde(default = "d_depth_radius")]
    depth_radius: f64,
}
fn d_grid() -> usize {
    201
}
fn d_depth_radius() -> f64 {
    0.05
}

fn coefficients(p: &ReactionPolynomials) -> serde_json::Value {
    json!({ "B": p.b.coeffs(), "D": p.d.coeffs(), "F": p.f.coeffs(), "V": p.v.coeffs() })
}

pub fn potential(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c: PotentialConfig = cfg.command("potential")?;
    if c.grid < 2 {
        reject!("grid: need at least 2 points");
    }
    let rate = cfg.common.local_rate()?;
    let p = reaction_polynomials(&rate);
    let profile = potential_minima(&p, 1e-10)?;
    let depths = if c.depths && profile.ell() >= 2 {
        Some(well_depths(&p, c.depth_radius, &QuasiOptions::default())?)
    } else {
        None
    };
    out.json(
        "polynomials.json",
        &json!({
            "coefficients": coefficients(&p),
            "attractive": is_attractive(&rate),
            "reaction_lipschitz": p.reaction_lipschitz(),
        }),
    )?;
    let mut w = out.csv("potential.csv", &header(&["rho", "B", "D", "F", "V"], "", 0))?;
    for i in 0..c.grid {
        let r = i as f64 / (c.grid - 1) as f64;
        w.write_record([r, p.birth(r), p.death(r), p.reaction(r), p.potential(r)].map(num))?;
    }
    w.flush()?;
    let mut w = out.csv("minima.csv", &header(&["rho", "V", "depth"], "", 0))?;
    for (i, &m) in profile.minima.iter().enumerate() {
        let depth = depths.as_ref().map_or(f64::NAN, |d| d.wells[i].upper_estimate);
        w.write_record([num(m), num(p.potential(m)), num(depth)])?;
    }
    w.flush()?;
    if let Some(d) = &depths {
        out.json("well_depths.json", d)?;
    }
    Ok(())
}

// simulate

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    n: usize,
    t_end: f64,
    snapshot_dt: f64,
    #[serde(default = "d_one")]
    bins: usize,
    #[serde(default = "d_one")]
    replicas: usize,
    #[serde(default = "d_bernoulli")]
    start: String,
    #[serde(default = "d_half")]
    start_density: f64,
    #[serde(default)]
    start_amplitude: f64,
    #[serde(default = "d_dynamics")]
    dynamics: String,
    #[serde(default)]
    event_log: bool,
}
fn d_bernoulli() -> String {
    "bernoulli".into()
}
fn d_dynamics() -> String {
    "glauber-kawasaki".into()
}

fn snapshot_times(t_end: f64, dt: f64) -> Vec<f64> {
    let k = (t_end / dt - 1e-9).ceil() as usize;
    (0..=k).map(|i| (i as f64 * dt).min(t_end)).collect()
}

pub fn simulate(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c: SimulateConfig = cfg.command("simulate")?;
    positive("t_end", c.t_end)?;
    positive("snapshot_dt", c.snapshot_dt)?;
    if c.bins == 0 || c.n % c.bins != 0 {
        reject!("bins: must divide n = {}, got {}", c.n, c.bins);
    }
    let dynamics = match c.dynamics.as_str() {
        "glauber-kawasaki" => Dynamics::GlauberKawasaki,
        "kawasaki" => Dynamics::KawasakiOnly,
        other => reject!("dynamics: expected glauber-kawasaki or kawasaki, got {other:?}"),
    };
    let rate = cfg.common.local_rate()?;
    let seed = cfg.common.seed;
    let times = snapshot_times(c.t_end, c.snapshot_dt);
    let mut w = out.csv("trajectory.csv", &header(&["replica", "time", "density"], "bin", c.bins))?;
    for r in 0..c.replicas as u64 {
        let start = initial_configuration(c.n, &c.start, c.start_density, c.start_amplitude, seed, r)?;
        let mut sim = SimState::new(start, rate.clone(), dynamics, seed, r)?;
        if c.event_log {
            sim.enable_event_log();
        }
        for &t in &times {
            sim.advance(t);
            let prof = empirical_profile(&sim, c.bins)?;
            let mut row = vec![r.to_string(), num(t), num(sim.config().density())];
            row.extend(prof.bins.iter().map(|&b| num(b)));
            w.write_record(&row)?;
        }
        if c.event_log {
            out.bytes(&format!("events_{r}.bin"), &sim.take_event_log())?;
        }
    }
    w.flush()?;
    Ok(())
}

// hydro

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HydroConfig {
    n: usize,
    times: Vec<f64>,
    #[serde(default = "d_bins")]
    bins: usize,
    #[serde(default = "d_pde_grid")]
    grid: usize,
    #[serde(default = "d_dt")]
    dt: f64,
    #[serde(default = "d_replicas_hydro")]
    replicas: usize,
    #[serde(default = "d_half")]
    start_density: f64,
    #[serde(default = "d_amplitude")]
    start_amplitude: f64,
    #[serde(default = "d_truncation")]
    k_max: usize,
}
fn d_bins() -> usize {
    16
}
fn d_pde_grid() -> usize {
    256
}
fn d_dt() -> f64 {
    1e-3
}
fn d_replicas_hydro() -> usize {
    8
}
fn d_amplitude() -> f64 {
    0.3
}

pub fn hydro(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c: HydroConfig = cfg.command("hydro")?;
    if c.times.is_empty() || c.times.iter().any(|&t| !(t >= 0.0)) || c.times.windows(2).any(|w| w[1] < w[0]) {
        reject!("times: need a nonempty nondecreasing list of nonnegative times");
    }
    if c.bins == 0 || c.n % c.bins != 0 || c.grid % c.bins != 0 {
        reject!("bins: must divide both n = {} and grid = {}, got {}", c.n, c.grid, c.bins);
    }
    if c.replicas == 0 || c.k_max == 0 {
        reject!("replicas and k_max must be positive");
    }
    positive("dt", c.dt)?;
    let rate = cfg.common.local_rate()?;
    let p = reaction_polynomials(&rate);
    let rho0 = cosine_profile(c.grid, c.start_density, c.start_amplitude)?;
    let t_end = c.times.last().copied().unwrap_or(0.0).max(c.dt);
    let pde = evolve(&rho0, &p, t_end, c.dt)?;
    let seed = cfg.common.seed;
    let k = c.k_max;
    let mut mean_bins = vec![vec![0.0; c.bins]; c.times.len()];
    let mut mean_metric = vec![0.0; c.times.len()];
    for r in 0..c.replicas as u64 {
        let start = initial_configuration(c.n, "bernoulli", c.start_density, c.start_amplitude, seed, r)?;
        let mut sim = SimState::new(start, rate.clone(), Dynamics::GlauberKawasaki, seed, r)?;
        for (i, &t) in c.times.iter().enumerate() {
            sim.advance(t);
            let prof = empirical_profile(&sim, c.bins)?;
            for (m, b) in mean_bins[i].iter_mut().zip(&prof.bins) {
                *m += b / c.replicas as f64;
            }
            let exact = FourierCoeffs::of_slice(pde.at_time(t), k);
            let d = fourier_metric(&FourierCoeffs::of_configuration(sim.config(), k), &exact, k);
            mean_metric[i] += d.value / c.replicas as f64;
        }
    }
    let mut w = out.csv("hydro.csv", &header(&["time", "l2", "sup", "metric"], "", 0))?;
    let mut p_w = out.csv("profiles.csv", &header(&["time", "source"], "bin", c.bins))?;
    for (i, &t) in c.times.iter().enumerate() {
        let exact = DensitySlice::from_values_unchecked(pde.at_time(t).block_average(c.bins)?);
        let emp = DensitySlice::from_values_unchecked(mean_bins[i].clone());
        w.write_record([
            num(t),
            num(l2_distance(&emp, &exact)?),
            num(sup_distance(&emp, &exact)?),
            num(mean_metric[i]),
        ])?;
        for (source, s) in [("pde", &exact), ("empirical", &emp)] {
            let mut row = vec![num(t), source.to_string()];
            row.extend(s.values().iter().map(|&v| num(v)));
            p_w.write_record(&row)?;
        }
    }
    w.flush()?;
    p_w.flush()?;
    Ok(())
}

// mix-exact

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixExactConfig {
    n: usize,
    #[serde(default = "d_eps")]
    eps: f64,
    #[serde(default = "d_rel_tol")]
    rel_tol: f64,
    #[serde(default = "d_t_max_exact")]
    t_max: f64,
    #[serde(default = "d_auto")]
    method: String,
    tv_start: Option<String>,
    tv_times: Option<Vec<f64>>,
}
fn d_rel_tol() -> f64 {
    1e-3
}
fn d_t_max_exact() -> f64 {
    1e6
}
fn d_auto() -> String {
    "auto".into()
}

fn write_tv(
    out: &mut Output,
    gen: &rdlab_core::exact::GeneratorMatrix,
    mu: &[f64],
    n: usize,
    start: Option<&String>,
    times: &[f64],
) -> Result<()> {
    let start = match start {
        Some(bits) => parse_config(n, bits, "tv_start")?,
        None => Configuration::empty(n),
    };
    let tv = tv_curve(gen, mu, start.to_mask() as usize, times).map_err(|e| invalid(format!("tv_times: {e}")))?;
    let mut w = out.csv("tv.csv", &header(&["time", "tv"], "", 0))?;
    for (t, d) in times.iter().zip(tv) {
        w.write_record([num(*t), num(d)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn mix_exact(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c: MixExactConfig = cfg.command("mix-exact")?;
    positive("eps", c.eps)?;
    let rate = cfg.common.local_rate()?;
    let gen = build_generator(c.n, &rate)?;
    let mu = stationary_distribution(&gen, exact_method(&c.method)?)?;
    let opts = MixingOptions {
        eps: c.eps,
        rel_tol: c.rel_tol,
        t_max: c.t_max,
        ..Default::default()
    };
    let t = mixing_time_exact(&gen, &mu, &opts)?;
    out.json(
        "mixing.json",
        &json!({ "n": c.n, "gamma": cfg.common.gamma, "eps": c.eps, "t_mix": t, "rel_tol": c.rel_tol }),
    )?;
    if let Some(times) = &c.tv_times {
        write_tv(out, &gen, &mu, c.n, c.tv_start.as_ref(), times)?;
    }
    Ok(())
}

// mix-couple

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixCoupleConfig {
    n: usize,
    #[serde(default = "d_eps")]
    eps: f64,
    #[serde(default = "d_replicas")]
    replicas: usize,
    #[serde(default = "d_t_max_sim")]
    t_max: f64,
}
fn d_replicas() -> usize {
    100
}
fn d_t_max_sim() -> f64 {
    1e4
}

pub fn mix_couple(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c: MixCoupleConfig = cfg.command("mix-couple")?;
    positive("eps", c.eps)?;
    positive("t_max", c.t_max)?;
    if c.replicas == 0 {
        reject!("replicas: must be positive");
    }
    let rate = cfg.common.local_rate()?;
    let samples = coalescence_times(&rate, c.n, c.replicas, cfg.common.seed, c.t_max)?;
    let est = CouplingEstimate::requantile(&samples, c.eps);
    out.json("coupling.json", &est)?;
    let mut w = out.csv("coalescence.csv", &header(&["replica", "time"], "", 0))?;
    for (i, t) in samples.iter().enumerate() {
        w.write_record([i.to_string(), num(*t)])?;
    }
    w.flush()?;
    Ok(())
}

// hit

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HitConfig {
    n: usize,
    #[serde(default = "d_half")]
    center: f64,
    #[serde(default = "d_alpha")]
    alpha: f64,
    #[serde(default = "d_beta")]
    beta: f64,
    #[serde(default = "d_escape")]
    escape_radius: f64,
    #[serde(default = "d_truncation")]
    k_max: usize,
    #[serde(default = "d_replicas")]
    samples: usize,
    #[serde(default = "d_t_max_exact")]
    t_max: f64,
    /// `"even"` or an explicit 0/1 string.
    #[serde(default = "d_even")]
    start: String,
    #[serde(default)]
    record_events: bool,
    #[serde(default)]
    report: bool,
    mixing: Option<f64>,
}
fn d_alpha() -> f64 {
    0.02
}
fn d_beta() -> f64 {
    0.05
}
fn d_escape() -> f64 {
    0.15
}
fn d_even() -> String {
    "even".into()
}

#[derive(Serialize)]
struct HitSummary {
    samples: usize,
    censored: usize,
    exp_law: Option<rdlab_core::hitting::ExpLawReport>,
    exp_law_note: Option<String>,
}

fn mixing_estimate(rate: &LocalRate, n: usize, seed: u64) -> Result<f64> {
    if n <= 12 {
        let gen = build_generator(n, rate)?;
        let mu = stationary_distribution(&gen, StationaryMethod::Auto)?;
        Ok(mixing_time_exact(&gen, &mu, &MixingOptions::default())?)
    } else {
        Ok(tv_mixing_upper_estimate(rate, n, 0.25, 64, seed, 1e4)?.time)
    }
}

pub fn hit(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c: HitConfig = cfg.command("hit")?;
    let spec = neighborhood(c.center, c.alpha, c.beta, c.escape_radius, c.k_max)?;
    positive("t_max", c.t_max)?;
    let rate = cfg.common.local_rate()?;
    let start = match c.start.as_str() {
        "even" => evenly_spaced(c.n, c.center),
        bits => parse_config(c.n, bits, "start")?,
    };
    let opts = HittingOptions {
        samples: c.samples,
        seed: cfg.common.seed,
        t_max: c.t_max,
        record_chain: false,
        record_events: c.record_events,
    };
    let samples = hitting_experiment(&rate, c.n, &spec, &start, &opts)?;
    let mut w = out.csv("samples.csv", &header(&["seed", "stream", "H", "nu", "num_excursions"], "", 0))?;
    let mut e_w = out.csv("excursions.csv", &header(&["stream", "k", "sigma", "tau"], "", 0))?;
    for s in &samples {
        let nu = s.nu.map_or(String::new(), |v| v.to_string());
        w.write_record([
            s.seed.to_string(),
            s.stream.to_string(),
            num(s.hitting_time),
            nu,
            s.excursions.len().to_string(),
        ])?;
        for (k, e) in s.excursions.iter().enumerate() {
            e_w.write_record([s.stream.to_string(), k.to_string(), num(e.sigma), num(e.tau)])?;
        }
    }
    w.flush()?;
    e_w.flush()?;
    if c.record_events {
        for s in &samples {
            if let Some(log) = &s.event_log {
                out.bytes(&format!("events_{}.bin", s.stream), log)?;
            }
        }
    }
    let finite: Vec<f64> = samples.iter().map(|s| s.hitting_time).filter(|h| h.is_finite()).collect();
    let (exp_law, exp_law_note) = match exp_law_test(&finite) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    out.json(
        "exp_law.json",
        &HitSummary {
            samples: samples.len(),
            censored: samples.len() - finite.len(),
            exp_law,
            exp_law_note,
        },
    )?;
    if c.report {
        let mixing = match c.mixing {
            Some(m) => m,
            None => mixing_estimate(&rate, c.n, cfg.common.seed)?,
        };
        let report = hypothesis_report(&rate, c.n, &spec, &samples, mixing, &ReportOptions {
            seed: cfg.common.seed,
            ..Default::default()
        })?;
        out.json("report.json", &report)?;
    }
    Ok(())
}

// sweep-mix

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepMixConfig {
    ns: Vec<usize>,
    #[serde(default = "d_eps")]
    eps: f64,
    #[serde(default = "d_exact")]
    mode: String,
    #[serde(default = "d_replicas")]
    replicas: usize,
    #[serde(default = "d_t_max_sim")]
    t_max: f64,
}
fn d_exact() -> String {
    "exact".into()
}

pub fn sweep_mix(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c: SweepMixConfig = cfg.command("sweep-mix")?;
    positive("eps", c.eps)?;
    if c.ns.is_empty() {
        reject!("ns: need at least one system size");
    }
    let mode = match c.mode.as_str() {
        "exact" => MixingMode::Exact(MixingOptions::default()),
        "coupling" => MixingMode::Coupling {
            replicas: c.replicas,
            seed: cfg.common.seed,
            t_max: c.t_max,
        },
        other => reject!("mode: expected exact or coupling, got {other:?}"),
    };
    let rate = cfg.common.local_rate()?;
    let sweep = mixing_scaling_sweep(&rate, &c.ns, c.eps, &mode)?;
    let gamma = cfg.common.gamma.map(num).unwrap_or_default();
    let mut w = out.csv("sweep_mix.csv", &header(&["n", "gamma", "eps", "t_mix", "t_mix_over_log_n"], "", 0))?;
    for r in &sweep.rows {
        w.write_record([r.n.to_string(), gamma.clone(), num(c.eps), num(r.t_mix), num(r.per_log_n)])?;
    }
    w.flush()?;
    out.json("sweep_mix.json", &sweep)?;
    Ok(())
}

// sweep-escape

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepEscapeConfig {
    ns: Vec<usize>,
    #[serde(default = "d_half")]
    center: f64,
    #[serde(default = "d_alpha")]
    alpha: f64,
    #[serde(default = "d_beta")]
    beta: f64,
    #[serde(default = "d_escape")]
    escape_radius: f64,
    #[serde(default = "d_truncation")]
    k_max: usize,
    #[serde(default = "d_replicas")]
    samples: usize,
    #[serde(default = "d_t_max_exact")]
    t_max: f64,
    start_density: Option<f64>,
    #[serde(default = "d_depth_radius")]
    depth_radius: f64,
}

pub fn sweep_escape(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c: SweepEscapeConfig = cfg.command("sweep-escape")?;
    let spec = neighborhood(c.center, c.alpha, c.beta, c.escape_radius, c.k_max)?;
    if c.ns.is_empty() {
        reject!("ns: need at least one system size");
    }
    let start_density = c.start_density.unwrap_or(c.center);
    probability("start_density", start_density)?;
    let rate = cfg.common.local_rate()?;
    let opts = HittingOptions {
        samples: c.samples,
        seed: cfg.common.seed,
        t_max: c.t_max,
        ..Default::default()
    };
    let sweep = escape_scaling_sweep(&rate, &spec, &c.ns, start_density, &opts)?;
    let mut w = out.csv(
        "sweep_escape.csv",
        &header(&["n", "samples", "censored", "mean_h", "ci_low", "ci_high"], "", 0),
    )?;
    for r in &sweep.rows {
        w.write_record([
            r.n.to_string(),
            r.samples.to_string(),
            r.censored.to_string(),
            num(r.mean),
            num(r.ci_low),
            num(r.ci_high),
        ])?;
    }
    w.flush()?;
    let h0 = well_depths(&reaction_polynomials(&rate), c.depth_radius, &QuasiOptions::default())
        .ok()
        .map(|d| d.h0);
    out.json("sweep_escape.json", &json!({ "fit": sweep.fit, "rows": sweep.rows, "h0_estimate": h0 }))?;
    Ok(())
}

// action

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionConfig {
    /// `"path"` or `"quasipotential"`.
    mode: String,
    #[serde(default = "d_action_grid")]
    grid: usize,
    #[serde(default = "d_dt")]
    dt: f64,
    #[serde(default = "d_t_end")]
    t_end: f64,
    #[serde(default = "d_half")]
    start_density: f64,
    #[serde(default = "d_amplitude")]
    start_amplitude: f64,
    #[serde(default)]
    shift: f64,
    #[serde(default = "d_tol")]
    tol: f64,
    #[serde(default = "d_max_iter")]
    max_iterations: usize,
    target: Option<f64>,
    well: Option<f64>,
    #[serde(default = "d_horizon")]
    horizon: f64,
    #[serde(default = "d_steps")]
    steps: usize,
}
fn d_action_grid() -> usize {
    64
}
fn d_t_end() -> f64 {
    1.0
}
fn d_tol() -> f64 {
    1e-7
}
fn d_max_iter() -> usize {
    10_000
}
fn d_horizon() -> f64 {
    50.0
}
fn d_steps() -> usize {
    400
}

fn write_trace(out: &mut Output, trace: &[rdlab_core::ldp::TracePoint]) -> Result<()> {
    let mut w = out.csv("trace.csv", &header(&["iteration", "value", "gradient"], "", 0))?;
    for t in trace {
        w.write_record([t.iteration.to_string(), num(t.value), num(t.gradient)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn action(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c: ActionConfig = cfg.command("action")?;
    let p = reaction_polynomials(&cfg.common.local_rate()?);
    match c.mode.as_str() {
        "path" => {
            positive("dt", c.dt)?;
            positive("t_end", c.t_end)?;
            let rho0 = cosine_profile(c.grid, c.start_density, c.start_amplitude)?;
            let path = evolve(&rho0, &p, c.t_end, c.dt)?.shifted(c.shift);
            let opts = RateOptions {
                tol: c.tol,
                max_iterations: c.max_iterations,
                ..Default::default()
            };
            let r = rate_function(&path, path.first(), &p, &opts)?;
            out.json(
                "action.json",
                &json!({
                    "value": r.value,
                    "energy": r.energy,
                    "breakdown": r.breakdown,
                    "iterations": r.iterations,
                    "gradient": r.gradient,
                    "shift": c.shift,
                }),
            )?;
            write_trace(out, &r.trace)
        }
        "quasipotential" => {
            let target = c.target.ok_or_else(|| invalid("target: required by mode = \"quasipotential\""))?;
            let well = match c.well {
                Some(w) => w,
                None => {
                    let minima = potential_minima(&p, 1e-10)?.minima;
                    minima
                        .iter()
                        .copied()
                        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
                        .ok_or_else(|| invalid("well: no minimum of the potential found; set it explicitly"))?
                }
            };
            let opts = QuasiOptions {
                horizon: c.horizon,
                steps: c.steps,
                tol: c.tol,
                max_iterations: c.max_iterations,
            };
            let q = quasipotential_homogeneous(&p, target, well, &opts)?;
            out.json(
                "quasipotential.json",
                &json!({
                    "well": well,
                    "target": target,
                    "value": q.value,
                    "oracle": q.oracle,
                    "iterations": q.iterations,
                }),
            )?;
            let mut w = out.csv("path.csv", &header(&["step", "time", "rho"], "", 0))?;
            let dt = c.horizon / c.steps as f64;
            for (i, r) in q.path.iter().enumerate() {
                w.write_record([i.to_string(), num(i as f64 * dt), num(*r)])?;
            }
            w.flush()?;
            write_trace(out, &q.trace)
        }
        other => reject!("mode: expected path or quasipotential, got {other:?}"),
    }
}

// exact

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExactConfig {
    n: usize,
    #[serde(default = "d_auto")]
    method: String,
    tv_start: Option<String>,
    tv_times: Option<Vec<f64>>,
    target_lo: Option<f64>,
    target_hi: Option<f64>,
}

pub fn exact(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c: ExactConfig = cfg.command("exact")?;
    let rate = cfg.common.local_rate()?;
    let gen = build_generator(c.n, &rate)?;
    let mu = stationary_distribution(&gen, exact_method(&c.method)?)?;
    let mut w = out.csv("stationary.csv", &header(&["state", "config", "density", "mu"], "", 0))?;
    for (s, m) in mu.iter().enumerate() {
        let conf = Configuration::from_mask(s as u64, c.n);
        w.write_record([s.to_string(), bits_of(&conf), num(conf.density()), num(*m)])?;
    }
    w.flush()?;
    if let Some(times) = &c.tv_times {
        write_tv(out, &gen, &mu, c.n, c.tv_start.as_ref(), times)?;
    }
    match (c.target_lo, c.target_hi) {
        (None, None) => {}
        (Some(lo), Some(hi)) => {
            if !(lo <= hi) {
                reject!("target_lo/target_hi: need target_lo <= target_hi");
            }
            let set = StateSet::density_window(c.n, lo, hi)?;
            let e = mean_hitting_exact(&gen, &set)?;
            let mut w = out.csv("hitting.csv", &header(&["state", "config", "mean_hitting"], "", 0))?;
            for (s, v) in e.iter().enumerate() {
                w.write_record([s.to_string(), bits_of(&Configuration::from_mask(s as u64, c.n)), num(*v)])?;
            }
            w.flush()?;
            let r = rate_into_set(&gen, &mu, &set)?;
            out.json(
                "set_rate.json",
                &json!({
                    "target_lo": lo,
                    "target_hi": hi,
                    "mass": r.mass,
                    "rate": r.rate,
                    "boundary_size": r.boundary.len(),
                    "bound": (c.n as f64).powi(3) / 2.0 + c.n as f64 * rate.max_rate(),
                }),
            )?;
        }
        _ => reject!("target_lo/target_hi: give both or neither"),
    }
    Ok(())
}

pub fn dispatch(command: &str, cfg: &Loaded, out: &mut Output) -> Result<()> {
    match command {
        "potential" => potential(cfg, out),
        "simulate" => simulate(cfg, out),
        "hydro" => hydro(cfg, out),
        "mix-exact" => mix_exact(cfg, out),
        "mix-couple" => mix_couple(cfg, out),
        "hit" => hit(cfg, out),
        "sweep-mix" => sweep_mix(cfg, out),
        "sweep-escape" => sweep_escape(cfg, out),
        "action" => action(cfg, out),
        "exact" => exact(cfg, out),
        other => Err(config::invalid(format!("command: unknown command {other:?}"))),
    }
}
