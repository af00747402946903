//! Strang-split solver for `d_t rho = (1/2) rho'' + F(rho)` on the unit torus
//! and a Newton search for solutions of `(1/2) rho'' + F(rho) = 0`.

use super::{DensityPath, DensitySlice};
use crate::linalg::cyclic_tridiagonal;
use crate::model::{reaction_roots, ReactionPolynomials};
use crate::poly::Polynomial;
use crate::rng;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Values within this distance of `[0, 1]` are clamped; farther is an error.
const OVERSHOOT_TOL: f64 = 1e-12;

/// Constant-coefficient periodic system `-a u_{j-1} + (1 + 2a) u_j - a u_{j+1} = f_j`.
struct PeriodicImplicitDiffusion {
    sub: Vec<f64>,
    diag: Vec<f64>,
}

impl PeriodicImplicitDiffusion {
    fn new(a: f64, m: usize) -> Self {
        Self {
            sub: vec![-a; m],
            diag: vec![1.0 + 2.0 * a; m],
        }
    }

    fn solve(&self, rhs: &mut [f64]) {
        let x = cyclic_tridiagonal(&self.sub, &self.diag, &self.sub, rhs);
        rhs.copy_from_slice(&x);
    }
}

fn rk4_reaction(f: &Polynomial, rho: f64, dt: f64) -> f64 {
    let k1 = f.eval(rho);
    let k2 = f.eval(rho + 0.5 * dt * k1);
    let k3 = f.eval(rho + 0.5 * dt * k2);
    let k4 = f.eval(rho + dt * k3);
    rho + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Evolves `rho0` up to `t_end`, recording every time level.
///
/// Each step is a backward-Euler diffusion half step, an RK4 reaction step
/// and a second diffusion half step. The step must satisfy
/// `dt <= 0.1 / sup|F'|`; it is shrunk so that `t_end` is hit exactly.
pub fn evolve(
    rho0: &DensitySlice,
    poly: &ReactionPolynomials,
    t_end: f64,
    dt: f64,
) -> Result<DensityPath> {
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need positive horizon and step, got T = {t_end}, dt = {dt}"
        )));
    }
    let lip = poly.reaction_lipschitz();
    let budget = if lip > 0.0 { 0.1 / lip } else { f64::INFINITY };
    if dt > budget {
        return Err(Error::StepTooLarge { dt, budget });
    }
    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let m = rho0.len();
    let h = 1.0 / m as f64;
    let solver = PeriodicImplicitDiffusion::new(0.5 * dt * 0.5 / (h * h), m);

    let mut slices = Vec::with_capacity(steps + 1);
    slices.push(rho0.clone());
    let mut u = rho0.values().to_vec();
    for i in 0..steps {
        solver.solve(&mut u);
        for v in u.iter_mut() {
            *v = rk4_reaction(&poly.f, *v, dt);
        }
        solver.solve(&mut u);
        let t = (i + 1) as f64 * dt;
        for v in u.iter_mut() {
            let over = (-*v).max(*v - 1.0);
            if over > OVERSHOOT_TOL {
                return Err(Error::Overshoot { amount: over, time: t });
            }
            *v = v.clamp(0.0, 1.0);
        }
        slices.push(DensitySlice::from_values_unchecked(u.clone()));
    }
    DensityPath::new(0.0, dt, slices)
}

/// Options for the elliptic-equation search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarySearch {
    /// Grid size `M` for nonconstant candidates; zero disables the search.
    pub grid: usize,
    pub seeds: usize,
    pub rng_seed: u64,
    pub max_newton: usize,
    pub residual_tol: f64,
}

impl Default for StationarySearch {
    fn default() -> Self {
        Self {
            grid: 256,
            seeds: 50,
            rng_seed: 0,
            max_newton: 50,
            residual_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarySolution {
    pub slice: DensitySlice,
    /// `||(1/2) Laplacian_h(rho) + F(rho)||_inf`
    pub residual: f64,
    pub constant: bool,
}

fn elliptic_residual(u: &[f64], f: &Polynomial) -> Vec<f64> {
    let m = u.len();
    let inv_h2 = (m * m) as f64;
    (0..m)
        .map(|j| {
            let lap = (u[(j + 1) % m] - 2.0 * u[j] + u[(j + m - 1) % m]) * inv_h2;
            0.5 * lap + f.eval(u[j])
        })
        .collect()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Solutions of `(1/2) rho'' + F(rho) = 0` with values in `[0, 1]`.
///
/// Constant solutions are all sign-changing roots of `F`. Nonconstant ones are
/// sought by damped Newton iteration from random smooth profiles and are only
/// reported when the discrete residual is below `residual_tol`; the search
/// makes no completeness claim.
pub fn stationary_solutions(
    poly: &ReactionPolynomials,
    search: &StationarySearch,
) -> Vec<StationarySolution> {
    let m = search.grid.max(1);
    let mut out: Vec<StationarySolution> = reaction_roots(poly)
        .into_iter()
        .map(|r| StationarySolution {
            slice: DensitySlice::from_values_unchecked(vec![r.rho; m]),
            residual: poly.reaction(r.rho).abs(),
            constant: true,
        })
        .collect();
    if search.grid == 0 {
        return out;
    }
    let fprime = poly.f.derivative();
    let mut rng = rng::stream(search.rng_seed, 0);
    for _ in 0..search.seeds {
        let mean: f64 = rng.random_range(0.05..0.95);
        let modes: Vec<(f64, f64, f64)> = (1..=3)
            .map(|k| {
                (
                    k as f64,
                    rng.random_range(-0.2..0.2) / k as f64,
                    rng.random_range(0.0..1.0),
                )
            })
            .collect();
        let mut u: Vec<f64> = (0..m)
            .map(|j| {
                let t = j as f64 / m as f64;
                let v = mean
                    + modes
                        .iter()
                        .map(|(k, a, ph)| a * (2.0 * PI * (k * t + ph)).cos())
                        .sum::<f64>();
                v.clamp(0.01, 0.99)
            })
            .collect();
        if let Some(res) = newton(&mut u, &poly.f, &fprime, search) {
            let mean = u.iter().sum::<f64>() / m as f64;
            let spread = u.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
            let in_range = u.iter().all(|v| (0.0..=1.0).contains(v));
            if !in_range || spread < 1e-6 {
                continue;
            }
            let dup = out.iter().any(|s| {
                !s.constant
                    && s.slice
                        .values()
                        .iter()
                        .zip(&u)
                        .all(|(a, b)| (a - b).abs() < 1e-6)
            });
            if !dup {
                out.push(StationarySolution {
                    slice: DensitySlice::from_values_unchecked(u),
                    residual: res,
                    constant: false,
                });
            }
        }
    }
    out
}

fn newton(
    u: &mut [f64],
    f: &Polynomial,
    fprime: &Polynomial,
    search: &StationarySearch,
) -> Option<f64> {
    let m = u.len();
    let inv_h2 = (m * m) as f64;
    let mut res = elliptic_residual(u, f);
    let mut norm = sup_norm(&res);
    for _ in 0..search.max_newton {
        if norm < search.residual_tol {
            return Some(norm);
        }
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            jac[(j, j)] += -inv_h2 + fprime.eval(u[j]);
            jac[(j, (j + 1) % m)] += 0.5 * inv_h2;
            jac[(j, (j + m - 1) % m)] += 0.5 * inv_h2;
        }
        let rhs = DVector::from_iterator(m, res.iter().map(|r| -r));
        let step = jac.lu().solve(&rhs)?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a + lambda * s).collect();
            let tres = elliptic_residual(&trial, f);
            let tnorm = sup_norm(&tres);
            if tnorm < norm || lambda < 1e-4 {
                u.copy_from_slice(&trial);
                res = tres;
                norm = tnorm;
                break;
            }
            lambda *= 0.5;
        }
        if !norm.is_finite() {
            return None;
        }
    }
    (norm < search.residual_tol).then_some(norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{reaction_polynomials, LocalRate};

    fn poly(g: f64) -> ReactionPolynomials {
        reaction_polynomials(&LocalRate::example_2_1(g).unwrap())
    }

    #[test]
    fn periodic_solver_inverts_the_operator() {
        let m = 17;
        let a = 3.7;
        let s = PeriodicImplicitDiffusion::new(a, m);
        let x: Vec<f64> = (0..m).map(|j| (j as f64 * 0.7).sin()).collect();
        let mut rhs: Vec<f64> = (0..m)
            .map(|j| -a * x[(j + m - 1) % m] + (1.0 + 2.0 * a) * x[j] - a * x[(j + 1) % m])
            .collect();
        s.solve(&mut rhs);
        for j in 0..m {
            assert!((rhs[j] - x[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_point_does_not_drift() {
        let p = poly(0.75);
        let root = crate::model::potential_minima(&p, 1e-8).unwrap().minima[0];
        let path = evolve(&DensitySlice::constant(32, root).unwrap(), &p, 10.0, 0.01).unwrap();
        let drift = path.last().values().iter().map(|v| (v - root).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-10, "drift {drift}");
    }

    #[test]
    fn flat_profile_follows_the_scalar_ode() {
        // gamma = 0: rho' = 1 - 2 rho, rho(0) = 0.2  =>  rho(1) = 0.5 - 0.3 e^{-2}
        let p = poly(0.0);
        let path = evolve(&DensitySlice::constant(16, 0.2).unwrap(), &p, 1.0, 1e-3).unwrap();
        let exact = 0.5 - 0.3 * (-2.0f64).exp();
        assert!((exact - 0.4594).abs() < 1e-4);
        for v in path.last().values() {
            assert!((v - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn relaxes_to_unique_well() {
        let p = poly(0.25);
        let rho0 = DensitySlice::from_fn(64, |t| 0.5 + 0.1 * (2.0 * PI * t).cos()).unwrap();
        let path = evolve(&rho0, &p, 5.0, 1e-2).unwrap();
        let dist = |s: &DensitySlice| s.values().iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);
        assert!(dist(path.at_time(1.0)) < dist(path.first()));
        assert!(dist(path.last()) < 1e-3);
    }

    #[test]
    fn step_budget_enforced() {
        let p = poly(0.0);
        let rho0 = DensitySlice::constant(8, 0.3).unwrap();
        assert!(matches!(evolve(&rho0, &p, 1.0, 0.2), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn constant_solutions() {
        let only = stationary_solutions(&poly(0.0), &StationarySearch::default());
        assert_eq!(only.len(), 1, "found {:?}", only.iter().map(|s| s.constant).collect::<Vec<_>>());
        assert!((only[0].slice.values()[0] - 0.5).abs() < 1e-10);

        let g = 0.75;
        let sols = stationary_solutions(&poly(g), &StationarySearch { grid: 0, ..Default::default() });
        let roots: Vec<f64> = sols.iter().map(|s| s.slice.values()[0]).collect();
        let off = (2.0 * g - 1.0f64).sqrt() / (2.0 * g);
        let expected = [0.5 - off, 0.5, 0.5 + off];
        assert_eq!(roots.len(), 3);
        for (r, e) in roots.iter().zip(expected) {
            assert!((r - e).abs() < 1e-10);
        }
        assert!(sols.iter().all(|s| s.residual < 1e-8));
    }
}
