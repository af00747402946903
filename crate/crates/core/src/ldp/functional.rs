//! The discretised functional `J(G)` and the rate function as its supremum.
//!
//! Quadrature: trapezoid weights in time, the periodic rectangle rule in
//! space. `d_t G` is centred inside the time grid and one-sided at its ends,
//! `Laplacian` is the periodic three-point stencil and the mobility term uses
//! forward differences of `G` weighted by the mobility at the bond midpoint.
//! With this choice `G -> J(G)` splits into one strictly concave problem per
//! time level once the linear part is collected.

use super::ControlField;
use crate::hydro::{sup_distance, DensityPath, DensitySlice};
use crate::linalg::cyclic_tridiagonal;
use crate::model::ReactionPolynomials;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Terms of `J(G)`; `total` is their sum. `energy_term` is the energy of the
/// path and is not part of `total`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionBreakdown {
    pub total: f64,
    pub energy_term: f64,
    /// `<rho_T, G_T> - <rho_0, G_0>`
    pub boundary: f64,
    /// `-int <rho, d_t G + (1/2) Laplacian G>`
    pub bulk: f64,
    /// `-(1/2) int <chi(rho), (grad G)^2>`
    pub mobility: f64,
    /// `-int <B(rho), e^G - 1>`
    pub birth: f64,
    /// `-int <D(rho), e^{-G} - 1>`
    pub death: f64,
}

pub(crate) fn chi(r: f64) -> f64 {
    r * (1.0 - r)
}

pub(crate) fn time_weights(steps: usize, dt: f64) -> Vec<f64> {
    (0..=steps)
        .map(|i| if i == 0 || i == steps { 0.5 * dt } else { dt })
        .collect()
}

fn rows(path: &DensityPath) -> Vec<&[f64]> {
    path.slices().iter().map(DensitySlice::values).collect()
}

fn time_derivative(g: &[Vec<f64>], i: usize, j: usize, dt: f64) -> f64 {
    let k = g.len() - 1;
    if i == 0 {
        (g[1][j] - g[0][j]) / dt
    } else if i == k {
        (g[k][j] - g[k - 1][j]) / dt
    } else {
        (g[i + 1][j] - g[i - 1][j]) / (2.0 * dt)
    }
}

fn laplacian(u: &[f64], j: usize, h: f64) -> f64 {
    let m = u.len();
    (u[(j + 1) % m] - 2.0 * u[j] + u[(j + m - 1) % m]) / (h * h)
}

pub(crate) fn check_grids(path: &DensityPath, g: &ControlField) -> Result<()> {
    if g.steps() != path.steps() || g.grid() != path.grid() {
        return Err(Error::GridMismatch(format!(
            "path is {}x{}, control is {}x{}",
            path.steps() + 1,
            path.grid(),
            g.steps() + 1,
            g.grid()
        )));
    }
    if (g.dt() - path.dt()).abs() > 1e-12 * path.dt() {
        return Err(Error::GridMismatch(format!(
            "time steps {} and {}",
            path.dt(),
            g.dt()
        )));
    }
    Ok(())
}

/// `int_0^T int |grad rho|^2` with centred differences.
pub fn energy(path: &DensityPath) -> f64 {
    let m = path.grid();
    let h = 1.0 / m as f64;
    let w = time_weights(path.steps(), path.dt());
    rows(path)
        .iter()
        .zip(&w)
        .map(|(r, wi)| {
            let s: f64 = (0..m)
                .map(|j| {
                    let d = (r[(j + 1) % m] - r[(j + m - 1) % m]) / (2.0 * h);
                    d * d
                })
                .sum();
            wi * h * s
        })
        .sum()
}

/// Evaluates every term of `J(G)` directly from its definition.
pub fn j_functional(path: &DensityPath, poly: &ReactionPolynomials, g: &ControlField) -> Result<ActionBreakdown> {
    check_grids(path, g)?;
    let rho = rows(path);
    let gv = g.values();
    let (k, m, dt) = (path.steps(), path.grid(), path.dt());
    let h = 1.0 / m as f64;
    let w = time_weights(k, dt);
    let boundary = h * (0..m).map(|j| rho[k][j] * gv[k][j] - rho[0][j] * gv[0][j]).sum::<f64>();
    let (mut bulk, mut mobility, mut birth, mut death) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..=k {
        let (r, gi) = (rho[i], &gv[i]);
        let (mut sb, mut sm, mut sbi, mut sd) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..m {
            let jp = (j + 1) % m;
            sb += r[j] * (time_derivative(gv, i, j, dt) + 0.5 * laplacian(gi, j, h));
            let grad = (gi[jp] - gi[j]) / h;
            sm += 0.5 * (chi(r[j]) + chi(r[jp])) * grad * grad;
            sbi += poly.birth(r[j]) * gi[j].exp_m1();
            sd += poly.death(r[j]) * (-gi[j]).exp_m1();
        }
        let wh = w[i] * h;
        bulk -= wh * sb;
        mobility -= 0.5 * wh * sm;
        birth -= wh * sbi;
        death -= wh * sd;
    }
    Ok(ActionBreakdown {
        total: boundary + bulk + mobility + birth + death,
        energy_term: energy(path),
        boundary,
        bulk,
        mobility,
        birth,
        death,
    })
}

/// Coefficients `c_i` of the part of `J` linear in `G`: boundary pairings,
/// the adjoint of the `d_t` stencil and the (self-adjoint) Laplacian.
fn linear_coefficients(path: &DensityPath) -> Vec<Vec<f64>> {
    let rho = rows(path);
    let (k, m, dt) = (path.steps(), path.grid(), path.dt());
    let h = 1.0 / m as f64;
    let w = time_weights(k, dt);
    let mut c = vec![vec![0.0; m]; k + 1];
    for j in 0..m {
        c[k][j] += h * rho[k][j];
        c[0][j] -= h * rho[0][j];
    }
    for i in 0..=k {
        let wh = w[i] * h;
        for j in 0..m {
            let a = wh * rho[i][j];
            if i == 0 {
                c[0][j] += a / dt;
                c[1][j] -= a / dt;
            } else if i == k {
                c[k][j] -= a / dt;
                c[k - 1][j] += a / dt;
            } else {
                c[i + 1][j] -= a / (2.0 * dt);
                c[i - 1][j] += a / (2.0 * dt);
            }
            c[i][j] -= 0.5 * wh * laplacian(rho[i], j, h);
        }
    }
    c
}

/// One time level of the maximisation, scaled by `1 / (w_i h)`:
/// `phi(g) = r.g - sum_j [ (a_j/2) (g_{j+1} - g_j)^2 + B_j (e^g - 1) + D_j (e^{-g} - 1) ]`
/// with `a_j = chi_{j+1/2} / h^2`.
struct SliceProblem {
    r: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    d: Vec<f64>,
}

impl SliceProblem {
    fn new(rho: &[f64], c: &[f64], wh: f64, poly: &ReactionPolynomials) -> Self {
        let m = rho.len();
        let h2 = 1.0 / (m * m) as f64;
        Self {
            r: c.iter().map(|x| x / wh).collect(),
            a: (0..m).map(|j| 0.5 * (chi(rho[j]) + chi(rho[(j + 1) % m])) / h2).collect(),
            b: rho.iter().map(|&x| poly.birth(x)).collect(),
            d: rho.iter().map(|&x| poly.death(x)).collect(),
        }
    }

    fn value(&self, g: &[f64]) -> f64 {
        let m = g.len();
        (0..m)
            .map(|j| {
                let dg = g[(j + 1) % m] - g[j];
                self.r[j] * g[j]
                    - 0.5 * self.a[j] * dg * dg
                    - self.b[j] * g[j].exp_m1()
                    - self.d[j] * (-g[j]).exp_m1()
            })
            .sum()
    }

    fn gradient(&self, g: &[f64]) -> Vec<f64> {
        let m = g.len();
        (0..m)
            .map(|j| {
                let (jm, jp) = ((j + m - 1) % m, (j + 1) % m);
                let flux = self.a[jm] * (g[j] - g[jm]) - self.a[j] * (g[jp] - g[j]);
                self.r[j] - flux - self.b[j] * g[j].exp() + self.d[j] * (-g[j]).exp()
            })
            .collect()
    }

    /// Solves `(-Hessian) delta = grad`.
    fn newton_direction(&self, g: &[f64], grad: &[f64]) -> Vec<f64> {
        let m = g.len();
        let sub: Vec<f64> = (0..m).map(|j| -self.a[(j + m - 1) % m]).collect();
        let sup: Vec<f64> = self.a.iter().map(|a| -a).collect();
        let diag: Vec<f64> = (0..m)
            .map(|j| {
                self.a[(j + m - 1) % m] + self.a[j] + self.b[j] * g[j].exp() + self.d[j] * (-g[j]).exp()
            })
            .collect();
        cyclic_tridiagonal(&sub, &diag, &sup, grad)
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

struct SliceState {
    problem: SliceProblem,
    g: Vec<f64>,
    value: f64,
    gradient: f64,
    done: bool,
}

impl SliceState {
    fn newton_step(&mut self, tol: f64) {
        let grad = self.problem.gradient(&self.g);
        self.gradient = sup_norm(&grad);
        if self.gradient < tol {
            self.done = true;
            return;
        }
        let delta = self.problem.newton_direction(&self.g, &grad);
        let slope: f64 = grad.iter().zip(&delta).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        for _ in 0..60 {
            let trial: Vec<f64> = self.g.iter().zip(&delta).map(|(g, d)| g + t * d).collect();
            let v = self.problem.value(&trial);
            if v.is_finite() && v >= self.value + 1e-4 * t * slope {
                self.g = trial;
                self.value = v;
                self.gradient = sup_norm(&self.problem.gradient(&self.g));
                self.done = self.gradient < tol;
                return;
            }
            t *= 0.5;
        }
        // no representable ascent left along the Newton direction
        self.done = true;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    /// Stopping threshold on the sup norm of the per-level gradient, each
    /// level scaled by its quadrature weight `w_i h`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Allowed gap between `path(0)` and the initial profile.
    pub start_tol: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iterations: 10_000,
            start_tol: 1e-9,
        }
    }
}

/// One line of an optimizer trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub value: f64,
    pub gradient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFunctionValue {
    /// `I_T(path | rho0)`, `+inf` for inadmissible paths.
    pub value: f64,
    /// `int int |grad rho|^2`; finite for every gridded path.
    pub energy: f64,
    pub breakdown: ActionBreakdown,
    pub control: ControlField,
    pub iterations: usize,
    /// Final scaled gradient sup norm.
    pub gradient: f64,
    pub trace: Vec<TracePoint>,
}

impl RateFunctionValue {
    fn infinite(path: &DensityPath) -> Self {
        Self {
            value: f64::INFINITY,
            energy: energy(path),
            breakdown: ActionBreakdown::default(),
            control: ControlField::zeros(path),
            iterations: 0,
            gradient: 0.0,
            trace: Vec::new(),
        }
    }
}

/// `sup_G J(G)` over gridded controls, conditioned on `path(0) = rho0`.
///
/// Every time level is maximised by damped Newton steps from `G = 0`; the
/// negated Hessian is a periodic tridiagonal matrix plus a positive diagonal.
/// Paths leaving `[0, 1]` or not starting at `rho0` get `+inf`.
pub fn rate_function(
    path: &DensityPath,
    rho0: &DensitySlice,
    poly: &ReactionPolynomials,
    opts: &RateOptions,
) -> Result<RateFunctionValue> {
    rate_function_from(path, rho0, poly, opts, None)
}

pub(crate) fn rate_function_from(
    path: &DensityPath,
    rho0: &DensitySlice,
    poly: &ReactionPolynomials,
    opts: &RateOptions,
    warm: Option<&ControlField>,
) -> Result<RateFunctionValue> {
    if rho0.len() != path.grid() {
        return Err(Error::GridMismatch(format!(
            "initial profile has {} points, path {}",
            rho0.len(),
            path.grid()
        )));
    }
    let outside = path
        .slices()
        .iter()
        .flat_map(|s| s.values())
        .any(|v| !(0.0..=1.0).contains(v));
    if outside || sup_distance(path.first(), rho0)? > opts.start_tol {
        return Ok(RateFunctionValue::infinite(path));
    }
    if let Some(w) = warm {
        check_grids(path, w)?;
    }
    let (k, m) = (path.steps(), path.grid());
    let h = 1.0 / m as f64;
    let w = time_weights(k, path.dt());
    let c = linear_coefficients(path);
    let mut states: Vec<SliceState> = (0..=k)
        .map(|i| {
            let problem = SliceProblem::new(path.slices()[i].values(), &c[i], w[i] * h, poly);
            let g = warm.map_or_else(|| vec![0.0; m], |f| f.values()[i].clone());
            let value = problem.value(&g);
            SliceState {
                problem,
                g,
                value,
                gradient: f64::INFINITY,
                done: false,
            }
        })
        .collect();
    let total = |states: &[SliceState]| -> f64 { states.iter().zip(&w).map(|(s, wi)| wi * h * s.value).sum() };
    let mut trace = vec![TracePoint {
        iteration: 0,
        value: total(&states),
        gradient: f64::INFINITY,
    }];
    let mut iterations = 0;
    while iterations < opts.max_iterations && states.iter().any(|s| !s.done) {
        iterations += 1;
        states.par_iter_mut().filter(|s| !s.done).for_each(|s| s.newton_step(opts.tol));
        trace.push(TracePoint {
            iteration: iterations,
            value: total(&states),
            gradient: states.iter().map(|s| s.gradient).fold(0.0, f64::max),
        });
    }
    let gradient = states.iter().map(|s| s.gradient).fold(0.0, f64::max);
    if !(gradient < opts.tol) {
        return Err(Error::NotConverged { iterations, gradient });
    }
    let control = ControlField::new(path, states.into_iter().map(|s| s.g).collect())?;
    let breakdown = j_functional(path, poly, &control)?;
    Ok(RateFunctionValue {
        value: breakdown.total.max(0.0),
        energy: breakdown.energy_term,
        breakdown,
        control,
        iterations,
        gradient,
        trace,
    })
}

/// `dJ / dG(t_i, theta_j)`.
pub fn j_gradient(path: &DensityPath, poly: &ReactionPolynomials, g: &ControlField) -> Result<ControlField> {
    check_grids(path, g)?;
    let (k, m) = (path.steps(), path.grid());
    let h = 1.0 / m as f64;
    let w = time_weights(k, path.dt());
    let c = linear_coefficients(path);
    let values = (0..=k)
        .map(|i| {
            let wh = w[i] * h;
            let p = SliceProblem::new(path.slices()[i].values(), &c[i], wh, poly);
            p.gradient(&g.values()[i]).into_iter().map(|x| wh * x).collect()
        })
        .collect();
    ControlField::new(path, values)
}

/// `dJ / drho(t_i, theta_j)` at fixed `G`; at the maximiser this is the
/// derivative of the rate function itself.
pub(crate) fn rho_gradient(path: &DensityPath, poly: &ReactionPolynomials, g: &ControlField) -> Vec<Vec<f64>> {
    let rho = rows(path);
    let gv = g.values();
    let (k, m, dt) = (path.steps(), path.grid(), path.dt());
    let h = 1.0 / m as f64;
    let w = time_weights(k, dt);
    let (bp, dp) = (poly.b.derivative(), poly.d.derivative());
    let mut out = vec![vec![0.0; m]; k + 1];
    for j in 0..m {
        out[k][j] += h * gv[k][j];
        out[0][j] -= h * gv[0][j];
    }
    for i in 0..=k {
        let wh = w[i] * h;
        let gi = &gv[i];
        for j in 0..m {
            let jm = (j + m - 1) % m;
            let (gr, gl) = ((gi[(j + 1) % m] - gi[j]) / h, (gi[j] - gi[jm]) / h);
            let r = rho[i][j];
            out[i][j] -= wh * (time_derivative(gv, i, j, dt) + 0.5 * laplacian(gi, j, h));
            out[i][j] -= 0.25 * wh * (1.0 - 2.0 * r) * (gr * gr + gl * gl);
            out[i][j] -= wh * (bp.eval(r) * gi[j].exp_m1() + dp.eval(r) * (-gi[j]).exp_m1());
        }
    }
    out
}
