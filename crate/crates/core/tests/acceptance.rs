//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p rdlab-core --test acceptance -- 2 7`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdlab_core::exact::*;
use rdlab_core::hitting::*;
use rdlab_core::hydro::*;
use rdlab_core::ldp::*;
use rdlab_core::model::*;
use rdlab_core::poly::Polynomial;
use rdlab_core::rng::stream;
use rdlab_core::simulator::*;
use rdlab_core::stats::linear_fit;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rate(g: f64) -> LocalRate {
    LocalRate::example_2_1(g).unwrap()
}

fn poly(g: f64) -> ReactionPolynomials {
    reaction_polynomials(&rate(g))
}

fn cosine_profile(m: usize) -> DensitySlice {
    DensitySlice::from_fn(m, |x| 0.5 + 0.3 * (2.0 * PI * x).cos()).unwrap()
}

fn max_coeff_gap(a: &Polynomial, b: &Polynomial) -> f64 {
    let len = a.coeffs().len().max(b.coeffs().len());
    (0..len).map(|k| (a.coeff(k) - b.coeff(k)).abs()).fold(0.0, f64::max)
}

fn c1_reaction_polynomials() -> Outcome {
    let rho = Polynomial::linear(0.0, 1.0);
    let one = Polynomial::constant(1.0);
    let u = Polynomial::linear(1.0, -2.0); // 1 - 2 rho
    let x = Polynomial::linear(-0.5, 1.0); // rho - 1/2
    let mut worst: f64 = 0.0;
    for g in [0.0, 0.25, 0.5, 0.75] {
        let uu = &u * &u;
        let b = &(&one - &rho) * &(&(&one - &u.scale(2.0 * g)) + &uu.scale(g * g));
        let d = &rho * &(&(&one + &u.scale(2.0 * g)) + &uu.scale(g * g));
        let xx = &x * &x;
        let f = &x.scale(-2.0) * &(&Polynomial::constant(1.0 - 2.0 * g) + &xx.scale(4.0 * g * g));
        let v = &xx.scale(1.0 - 2.0 * g) + &(&xx * &xx).scale(2.0 * g * g);
        let p = poly(g);
        for (got, want) in [(&p.b, &b), (&p.d, &d), (&p.f, &f), (&p.v, &v)] {
            worst = worst.max(max_coeff_gap(got, want));
        }
    }
    outcome(worst < 1e-12, format!("max coefficient gap {worst:.2e} (tol 1e-12)"))
}

fn exact_mixing_series(g: f64) -> Vec<f64> {
    [6usize, 8, 10, 12]
        .iter()
        .map(|&n| {
            let gen = build_generator(n, &rate(g)).unwrap();
            let mu = stationary_distribution(&gen, StationaryMethod::Auto).unwrap();
            mixing_time_exact(&gen, &mu, &MixingOptions::default()).unwrap()
        })
        .collect()
}

fn c2_phase_transition() -> Outcome {
    let ns = [6.0, 8.0, 10.0, 12.0];
    let hot = exact_mixing_series(0.75);
    let cold = exact_mixing_series(0.25);
    let ratios: Vec<f64> = hot.windows(2).map(|w| w[1] / w[0]).collect();
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    let log = |v: &[f64]| v.iter().map(|t| t.ln()).collect::<Vec<_>>();
    let fit_hot = linear_fit(&ns, &log(&hot));
    let fit_cold = linear_fit(&ns, &log(&cold));
    let factor = fit_hot.slope / fit_cold.slope;
    let pass = increasing && fit_hot.slope > 0.0 && fit_hot.r_squared > 0.9 && factor >= 5.0;
    outcome(
        pass,
        format!(
            "g=0.75 t_mix {hot:.4?}, ratios {ratios:.4?} (increasing: {increasing}), slope {:.4} R2 {:.4}; \
             g=0.25 t_mix {cold:.4?}, slope {:.4}; slope factor {factor:.2} (need >= 5)",
            fit_hot.slope, fit_hot.r_squared, fit_cold.slope
        ),
    )
}

fn c3_coupling_mixing() -> Outcome {
    let ns = [64usize, 128, 256, 512];
    let per_log: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let est = tv_mixing_upper_estimate(&rate(0.25), n, 0.25, 40, 3, 1e4).unwrap();
            est.time / (n as f64).ln()
        })
        .collect();
    let (lo, hi) = per_log
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    let spread = hi / lo;
    outcome(
        spread < 2.0 && lo > 0.0,
        format!("t_hat / log n over n = {ns:?}: {per_log:.4?}; spread {spread:.3} (need < 2)"),
    )
}

fn c4_hydrodynamic_limit() -> Outcome {
    let (bins, replicas, times) = (16usize, 8u64, [0.25, 0.5, 1.0]);
    let p = poly(0.25);
    let pde = evolve(&cosine_profile(512), &p, 1.0, 1e-3).unwrap();
    let mut sups = Vec::new();
    for n in [128usize, 256, 512] {
        let mut mean = vec![vec![0.0; bins]; times.len()];
        for r in 0..replicas {
            let mut rng = stream(4, 1000 + r);
            let start = sample_profile_configuration(&cosine_profile(n), n, &mut rng);
            let mut sim = SimState::new(start, rate(0.25), Dynamics::GlauberKawasaki, 4, r).unwrap();
            for (i, &t) in times.iter().enumerate() {
                sim.advance(t);
                let prof = empirical_profile(&sim, bins).unwrap();
                for (m, b) in mean[i].iter_mut().zip(&prof.bins) {
                    *m += b / replicas as f64;
                }
            }
        }
        let sup = times
            .iter()
            .zip(&mean)
            .map(|(&t, emp)| {
                let exact = pde.at_time(t).block_average(bins).unwrap();
                let sq: f64 = emp.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum();
                (sq / bins as f64).sqrt()
            })
            .fold(0.0, f64::max);
        sups.push(sup);
    }
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    outcome(
        decreasing && sups[2] < 0.05,
        format!("sup_t L2 for n = 128, 256, 512: {sups:.4?} (decreasing: {decreasing}, last < 0.05)"),
    )
}

fn c5_zero_rate() -> Outcome {
    let p = poly(0.25);
    let rho0 = cosine_profile(128);
    let opts = RateOptions::default();
    let path = evolve(&rho0, &p, 1.0, 1e-3).unwrap();
    let floor = rate_function(&path, &rho0, &p, &opts).unwrap().value;
    let bumped = path.shifted(0.05);
    let shifted = rate_function(&bumped, bumped.first(), &p, &opts).unwrap().value;
    outcome(
        floor <= 1e-3 && shifted >= 10.0 * floor,
        format!("I on PDE path {floor:.3e} (<= 1e-3), shifted {shifted:.3e} (>= 10x)"),
    )
}

fn c6_holding_cost() -> Outcome {
    let p = poly(0.0);
    let s = DensitySlice::constant(16, 0.25).unwrap();
    let path = DensityPath::constant(s.clone(), 0.01, 100).unwrap();
    let value = rate_function(&path, &s, &p, &RateOptions::default()).unwrap().value;
    let oracle = (p.birth(0.25).sqrt() - p.death(0.25).sqrt()).powi(2);
    let target = 0.13397;
    outcome(
        (value / target - 1.0).abs() <= 0.05 && (oracle / target - 1.0).abs() < 1e-4,
        format!("I = {value:.5}, Legendre oracle {oracle:.5}, target 0.13397 +- 5%"),
    )
}

fn c7_quasipotential() -> Outcome {
    let p = poly(0.0);
    let q = quasipotential_homogeneous(&p, 0.75, 0.5, &QuasiOptions::default()).unwrap();
    let target = 0.13081;
    outcome(
        (q.value / target - 1.0).abs() <= 0.02,
        format!("optimizer {:.5}, quadrature {:.5}, target 0.13081 +- 2%", q.value, q.oracle),
    )
}

fn c8_exponential_law() -> Outcome {
    let spec = NeighborhoodSpec::constant(0.5, 0.02, 0.05, 0.15).unwrap();
    let opts = HittingOptions {
        samples: 500,
        seed: 8,
        ..Default::default()
    };
    let samples = hitting_experiment(&rate(0.25), 64, &spec, &evenly_spaced(64, 0.5), &opts).unwrap();
    let hs: Vec<f64> = samples.iter().map(|s| s.hitting_time).collect();
    let censored = hs.iter().filter(|h| !h.is_finite()).count();
    if censored > 0 {
        return outcome(false, format!("{censored} censored samples"));
    }
    let r = exp_law_test(&hs).unwrap();
    outcome(
        r.statistic < 0.0729,
        format!("KS {:.4} vs 0.0729 over {} samples, mean H {:.4}", r.statistic, r.samples, r.mean),
    )
}

fn c9_exact_vs_simulated() -> Outcome {
    let n = 8;
    let spec = NeighborhoodSpec::constant(0.5, 0.05, 0.1, 0.3).unwrap();
    let start = evenly_spaced(n, 0.5);
    let gen = build_generator(n, &rate(0.5)).unwrap();
    let exact = mean_hitting_exact(&gen, &spec.exit_set(n).unwrap()).unwrap()[start.to_mask() as usize];
    let opts = HittingOptions {
        samples: 2000,
        seed: 9,
        ..Default::default()
    };
    let samples = hitting_experiment(&rate(0.5), n, &spec, &start, &opts).unwrap();
    let sim = samples.iter().map(|s| s.hitting_time).sum::<f64>() / samples.len() as f64;
    let rel = (sim / exact - 1.0).abs();
    outcome(rel <= 0.05, format!("simulated {sim:.4}, exact {exact:.4}, relative gap {rel:.4} (<= 0.05)"))
}

fn random_slice(rng: &mut ChaCha8Rng, m: usize) -> DensitySlice {
    let base: f64 = rng.random_range(0.3..0.7);
    let a: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.08..0.08));
    let ph: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
    DensitySlice::from_fn(m, |x| {
        (base + (0..3).map(|k| a[k] * (2.0 * PI * (k + 1) as f64 * x + ph[k]).cos()).sum::<f64>())
            .clamp(0.05, 0.95)
    })
    .unwrap()
}

fn c10_metric_and_pde() -> Outcome {
    let k = DEFAULT_TRUNCATION;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut metric_bad = 0;
    for _ in 0..1000 {
        let (a, b) = (random_slice(&mut rng, 64), random_slice(&mut rng, 64));
        let d = fourier_metric(&FourierCoeffs::of_slice(&a, k), &FourierCoeffs::of_slice(&b, k), k);
        if d.value > 3.0 * l2_distance(&a, &b).unwrap() + d.tail_bound {
            metric_bad += 1;
        }
    }
    let p = poly(0.75);
    let c0 = p.reaction_lipschitz() + 1e-3;
    let mut contraction_bad = 0;
    for _ in 0..100 {
        let (a, b) = (random_slice(&mut rng, 32), random_slice(&mut rng, 32));
        let d0 = l2_distance(&a, &b).unwrap();
        let (pa, pb) = (evolve(&a, &p, 2.0, 0.01).unwrap(), evolve(&b, &p, 2.0, 0.01).unwrap());
        for (i, (sa, sb)) in pa.slices().iter().zip(pb.slices()).enumerate() {
            if l2_distance(sa, sb).unwrap() > (c0 * pa.time(i)).exp() * d0 + 1e-12 {
                contraction_bad += 1;
            }
        }
    }
    let p = poly(0.5);
    let mut order_bad = 0;
    for _ in 0..50 {
        let a = random_slice(&mut rng, 32);
        let lift: f64 = rng.random_range(0.0..0.04);
        let b = DensitySlice::new(a.values().iter().map(|v| v + lift).collect()).unwrap();
        let (pa, pb) = (evolve(&a, &p, 1.0, 0.01).unwrap(), evolve(&b, &p, 1.0, 0.01).unwrap());
        for (sa, sb) in pa.slices().iter().zip(pb.slices()) {
            order_bad += sa.values().iter().zip(sb.values()).filter(|(x, y)| x > y).count();
        }
    }
    outcome(
        metric_bad + contraction_bad + order_bad == 0,
        format!("violations: metric bound {metric_bad}/1000, contraction {contraction_bad}, ordering {order_bad}"),
    )
}

fn c11_bimodality() -> Outcome {
    let n = 12;
    let gen = build_generator(n, &rate(0.75)).unwrap();
    let mu = stationary_distribution(&gen, StationaryMethod::Auto).unwrap();
    let (mut tails, mut middle) = (0.0, 0.0);
    for (s, m) in mu.iter().enumerate() {
        let d = s.count_ones() as f64 / n as f64;
        if !(0.2..=0.8).contains(&d) {
            tails += m;
        }
        if (0.4..=0.6).contains(&d) {
            middle += m;
        }
    }
    outcome(tails > middle, format!("mass outside [0.2, 0.8] {tails:.4}, mass in [0.4, 0.6] {middle:.4}"))
}

fn c12_rate_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut checked, mut violations, mut worst) = (0usize, 0usize, 0.0f64);
    for g in [0.0, 0.5, 0.75] {
        let r = rate(g);
        for n in [4usize, 6, 8, 10, 12] {
            let gen = build_generator(n, &r).unwrap();
            let mu = stationary_distribution(&gen, StationaryMethod::Auto).unwrap();
            let bound = (n as f64).powi(3) / 2.0 + n as f64 * r.max_rate();
            let center = FourierCoeffs::of_constant(0.5, DEFAULT_TRUNCATION);
            let mut sets = vec![
                StateSet::density_window(n, 0.0, 0.2).unwrap(),
                StateSet::density_window(n, 0.4, 0.6).unwrap(),
                StateSet::density_window(n, 0.8, 1.0).unwrap(),
                StateSet::metric_ball(n, &center, 0.15, DEFAULT_TRUNCATION).unwrap(),
            ];
            for _ in 0..5 {
                let pick: Vec<usize> = (0..1usize << n).filter(|_| rng.random_bool(0.3)).collect();
                sets.push(StateSet::from_states(n, &pick).unwrap());
            }
            for set in &sets {
                let Ok(rn) = rate_into_set(&gen, &mu, set) else { continue };
                checked += 1;
                worst = worst.max(rn.rate / bound);
                if rn.rate > bound {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        violations == 0 && checked > 0,
        format!("{checked} sets, {violations} violations, largest r / bound {worst:.4}"),
    )
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 12] = [
        (1, "reaction polynomials", c1_reaction_polynomials),
        (2, "phase transition signature in exact mixing", c2_phase_transition),
        (3, "coupling mixing time over log n", c3_coupling_mixing),
        (4, "hydrodynamic limit", c4_hydrodynamic_limit),
        (5, "zero-rate characterization", c5_zero_rate),
        (6, "homogeneous holding cost", c6_holding_cost),
        (7, "homogeneous quasi-potential", c7_quasipotential),
        (8, "exponential hitting law", c8_exponential_law),
        (9, "exact vs simulated mean hitting time", c9_exact_vs_simulated),
        (10, "metric and PDE property suites", c10_metric_and_pde),
        (11, "stationary bimodality", c11_bimodality),
        (12, "rate bound into sets", c12_rate_bound),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {id:>2} ({name}): {} [{:.1}s]",
            result.detail,
            start.elapsed().as_secs_f64()
        );
        if !result.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
