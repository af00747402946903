//! Transition laws by uniformization, TV curves and exact mixing times.

use super::GeneratorMatrix;
use crate::model::LocalRate;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Poisson mass neglected per uniformization segment.
const TRUNCATION: f64 = 1e-12;
/// Upper bound on `Lambda * segment length`.
const SEGMENT_EVENTS: f64 = 1000.0;
/// Starting states screened together by the mixing-time search.
const BATCH: usize = 16;

/// `v exp(t Q)` for a row vector `v`.
///
/// Uniformization with `Lambda = max exit rate`: the series
/// `sum_k Pois(Lambda t; k) v P^k`, `P = I + Q / Lambda`, is cut once the
/// accumulated Poisson weight reaches `1 - 1e-12`, so each segment loses at
/// most `1e-12` in total mass.
pub fn propagate(gen: &GeneratorMatrix, v: &[f64], t: f64) -> Vec<f64> {
    propagate_with(gen, v, t, TRUNCATION)
}

fn propagate_with(gen: &GeneratorMatrix, v: &[f64], t: f64, truncation: f64) -> Vec<f64> {
    assert!(t >= 0.0, "negative time");
    let mut cur = v.to_vec();
    uniformize(gen, &mut cur, 1, t, truncation);
    cur
}

/// `v exp(t Q)` for several row vectors at once, stored interleaved so that
/// each matrix entry is read once per step for the whole batch.
pub fn propagate_many(gen: &GeneratorMatrix, vs: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    assert!(t >= 0.0, "negative time");
    let states = gen.states();
    let mut out = Vec::with_capacity(vs.len());
    let mut rest = vs;
    while !rest.is_empty() {
        let k = [16, 8, 4, 1].into_iter().find(|&k| k <= rest.len()).unwrap_or(1);
        let (group, tail) = rest.split_at(k);
        rest = tail;
        let mut cur = vec![0.0; states * k];
        for (j, v) in group.iter().enumerate() {
            assert_eq!(v.len(), states, "vector length differs from the state count");
            for (s, &x) in v.iter().enumerate() {
                cur[s * k + j] = x;
            }
        }
        uniformize(gen, &mut cur, k, t, TRUNCATION);
        out.extend((0..k).map(|j| (0..states).map(|s| cur[s * k + j]).collect::<Vec<f64>>()));
    }
    out
}

/// In place `cur exp(t Q)` for `k` interleaved row vectors.
fn uniformize(gen: &GeneratorMatrix, cur: &mut [f64], k: usize, t: f64, truncation: f64) {
    let lambda = gen.max_exit_rate();
    if k == 0 || t == 0.0 || lambda == 0.0 {
        return;
    }
    let segments = (lambda * t / SEGMENT_EVENTS).ceil().max(1.0) as usize;
    let q = lambda * t / segments as f64;
    let kmax = (q + 50.0 * q.sqrt() + 100.0) as usize;
    let weight = |m: usize| (-q + m as f64 * q.ln() - ln_gamma(m as f64 + 1.0)).exp();
    let mut term = vec![0.0; cur.len()];
    let mut next = vec![0.0; cur.len()];
    for _ in 0..segments {
        term.copy_from_slice(cur);
        let w0 = weight(0);
        for x in cur.iter_mut() {
            *x *= w0;
        }
        let mut cumulative = w0;
        for m in 1..=kmax {
            if cumulative >= 1.0 - truncation {
                break;
            }
            let w = weight(m);
            gen.uniformized_step(&term, &mut next, cur, k, lambda, w);
            std::mem::swap(&mut term, &mut next);
            cumulative += w;
        }
    }
}

/// `(1/2) sum |p - mu|`.
pub fn tv_distance(p: &[f64], mu: &[f64]) -> f64 {
    0.5 * p.iter().zip(mu).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn point_mass(states: usize, s: usize) -> Vec<f64> {
    let mut v = vec![0.0; states];
    v[s] = 1.0;
    v
}

/// `TV(P_{start}(eta_t in .), mu)` at each of the nondecreasing `times`.
pub fn tv_curve(gen: &GeneratorMatrix, mu: &[f64], start: usize, times: &[f64]) -> Result<Vec<f64>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidArgument(
            "times must be nonnegative and nondecreasing".into(),
        ));
    }
    let mut v = point_mass(gen.states(), start);
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        v = propagate(gen, &v, t - now);
        now = t;
        out.push(tv_distance(&v, mu).clamp(0.0, 1.0));
    }
    Ok(out)
}

/// One state per orbit of the symmetry group of the dynamics, with the orbit
/// size. Rotations are always symmetries; the reflection `x -> -x` and the
/// particle-hole exchange are used only when the rate table has them.
pub fn orbit_representatives(n: usize, rate: &LocalRate) -> Vec<(usize, usize)> {
    let full = (1usize << n) - 1;
    let reflect = rate.is_reflection_symmetric();
    let spin = rate.is_spin_symmetric();
    let rotate = |s: usize, r: usize| ((s << r) | (s >> ((n - r) % n))) & full;
    let mirror = |s: usize| (0..n).fold(0usize, |m, x| m | (((s >> x) & 1) << ((n - x) % n)));
    let mut images = Vec::with_capacity(4 * n);
    let mut reps = Vec::new();
    for s in 0..=full {
        images.clear();
        let mut bases = vec![s];
        if reflect {
            bases.push(mirror(s));
        }
        if spin {
            let flipped: Vec<usize> = bases.iter().map(|b| b ^ full).collect();
            bases.extend(flipped);
        }
        for &b in &bases {
            for r in 0..n {
                images.push(rotate(b, r));
            }
        }
        if images.iter().all(|&i| i >= s) {
            images.sort_unstable();
            images.dedup();
            reps.push((s, images.len()));
        }
    }
    reps
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingOptions {
    pub eps: f64,
    /// Relative bisection tolerance on `t`.
    pub rel_tol: f64,
    /// First bracketing step; later steps grow to a quarter of the elapsed time.
    pub initial_step: f64,
    pub t_max: f64,
}

impl Default for MixingOptions {
    fn default() -> Self {
        Self {
            eps: 0.25,
            rel_tol: 1e-3,
            initial_step: 0.05,
            t_max: 1e6,
        }
    }
}

/// `inf {t : max_eta TV(P_eta(eta_t in .), mu) <= eps}` up to `rel_tol`.
///
/// Each `t -> TV_eta(t)` is nonincreasing, so the answer is the largest of
/// the per-state crossing times. States are scanned one per symmetry orbit,
/// far-from-half-filling first, and a state whose TV is already below `eps`
/// at the running maximum is skipped. The returned time is an upper end of
/// the final bisection bracket.
pub fn mixing_time_exact(gen: &GeneratorMatrix, mu: &[f64], opts: &MixingOptions) -> Result<f64> {
    if opts.eps >= 1.0 {
        return Ok(0.0);
    }
    if !(opts.eps > 0.0 && opts.rel_tol > 0.0 && opts.initial_step > 0.0) {
        return Err(Error::InvalidArgument(
            "eps, rel_tol and initial_step must be positive".into(),
        ));
    }
    let n = gen.n();
    let mut reps = orbit_representatives(n, gen.rate());
    reps.sort_by_key(|&(s, _)| std::cmp::Reverse((2 * s.count_ones() as isize - n as isize).abs()));
    let mut t_star: f64 = 0.0;
    let mut pending = reps.into_iter().map(|(s, _)| s);
    // the most polarised state fixes a first bracket, the rest are screened in batches
    if let Some(first) = pending.next() {
        t_star = crossing_time(gen, mu, opts, point_mass(gen.states(), first), 0.0)?;
    }
    let rest: Vec<usize> = pending.collect();
    for chunk in rest.chunks(BATCH) {
        let starts: Vec<Vec<f64>> = chunk.iter().map(|&s| point_mass(gen.states(), s)).collect();
        let screened_at = t_star;
        let mut laws = propagate_many(gen, &starts, screened_at);
        for v in laws.iter_mut() {
            if t_star > screened_at {
                *v = propagate(gen, v, t_star - screened_at);
            }
            if tv_distance(v, mu) <= opts.eps {
                continue;
            }
            t_star = crossing_time(gen, mu, opts, std::mem::take(v), t_star)?;
        }
    }
    Ok(t_star)
}

/// Upper end of the bisection bracket for the first time after `t` at which
/// the law `v` (the law at time `t`) is within `eps` of `mu`.
fn crossing_time(gen: &GeneratorMatrix, mu: &[f64], opts: &MixingOptions, mut v: Vec<f64>, mut t: f64) -> Result<f64> {
    if tv_distance(&v, mu) <= opts.eps {
        return Ok(t);
    }
    let (mut lo, mut hi, mut v_lo) = loop {
        let step = opts.initial_step.max(0.25 * t);
        let w = propagate(gen, &v, step);
        if tv_distance(&w, mu) <= opts.eps {
            break (t, t + step, v);
        }
        v = w;
        t += step;
        if t > opts.t_max {
            return Err(Error::HorizonExceeded { t_max: opts.t_max });
        }
    };
    while hi - lo > opts.rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        let w = propagate(gen, &v_lo, mid - lo);
        if tv_distance(&w, mu) <= opts.eps {
            hi = mid;
        } else {
            lo = mid;
            v_lo = w;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{build_generator, stationary_distribution, StationaryMethod};

    fn setup(n: usize, g: f64) -> (GeneratorMatrix, Vec<f64>) {
        let gen = build_generator(n, &LocalRate::example_2_1(g).unwrap()).unwrap();
        let mu = stationary_distribution(&gen, StationaryMethod::Auto).unwrap();
        (gen, mu)
    }

    #[test]
    fn two_state_closed_form() {
        // n = 1 with a constant rate: symmetric two-state chain with rate c
        let gen = build_generator(1, &LocalRate::constant(0.7).unwrap()).unwrap();
        let p = propagate(&gen, &[1.0, 0.0], 0.9);
        let exact = 0.5 + 0.5 * (-2.0f64 * 0.7 * 0.9).exp();
        assert!((p[0] - exact).abs() < 1e-12);
    }

    #[test]
    fn curve_starts_at_point_mass_and_decreases() {
        let (gen, mu) = setup(6, 0.4);
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let tv = tv_curve(&gen, &mu, 0b000111, &times).unwrap();
        assert!((tv[0] - (1.0 - mu[0b000111])).abs() < 1e-14);
        for w in tv.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(tv.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn truncation_is_stable_under_segmentation() {
        let (gen, _) = setup(5, 0.3);
        let v = point_mass(32, 3);
        let once = propagate(&gen, &v, 0.8);
        let twice = propagate(&gen, &propagate(&gen, &v, 0.3), 0.5);
        let diff = once.iter().zip(&twice).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
    }

    #[test]
    fn batched_propagation_matches_single() {
        let (gen, _) = setup(7, 0.6);
        let starts: Vec<Vec<f64>> = [0usize, 5, 77, 127, 3, 9, 64].iter().map(|&s| point_mass(128, s)).collect();
        let batch = propagate_many(&gen, &starts, 1.7);
        for (v, b) in starts.iter().zip(&batch) {
            let single = propagate(&gen, v, 1.7);
            let diff = single.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-13);
        }
    }

    #[test]
    fn tighter_truncation_changes_little() {
        let (gen, mu) = setup(8, 0.75);
        let v = point_mass(256, 0);
        for t in [0.1, 2.0, 30.0] {
            let a = tv_distance(&propagate(&gen, &v, t), &mu);
            let b = tv_distance(&propagate_with(&gen, &v, t, 1e-15), &mu);
            assert!((a - b).abs() < 1e-10, "t = {t}: {a} vs {b}");
        }
    }

    #[test]
    fn orbit_counts() {
        let r = LocalRate::example_2_1(0.3).unwrap();
        let reps = orbit_representatives(6, &r);
        assert_eq!(reps.iter().map(|r| r.1).sum::<usize>(), 64);
        // binary bracelets of length 6 up to complement: 8
        assert_eq!(reps.len(), 8);
        let skew: Vec<f64> = (0..8).map(|w| 1.0 + w as f64).collect();
        let plain = orbit_representatives(6, &LocalRate::new(1, skew).unwrap());
        // necklaces of length 6: 14
        assert_eq!(plain.len(), 14);
    }

    #[test]
    fn mixing_time_edges_and_monotonicity() {
        let (gen, mu) = setup(6, 0.25);
        let at = |eps| {
            mixing_time_exact(&gen, &mu, &MixingOptions { eps, ..Default::default() }).unwrap()
        };
        assert_eq!(at(1.0), 0.0);
        let (a, b, c) = (at(0.1), at(0.25), at(0.5));
        assert!(a >= b && b >= c && c > 0.0);
        // crossing time of the worst state really is a crossing
        let tv = tv_curve(&gen, &mu, 0, &[b * 0.99, b]).unwrap();
        assert!(tv[1] <= 0.25 + 1e-12);
    }
}
