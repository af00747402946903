//! Spatially homogeneous paths: the Legendre cost of a density velocity,
//! minimum-action estimates of the quasi-potential and the well depths.

use super::TracePoint;
use crate::linalg::tridiagonal;
use crate::model::{potential_minima, ReactionPolynomials};
use crate::poly::Polynomial;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// `(sqrt B - sqrt D)^2`, the cost per unit time of holding a constant density.
pub fn holding_cost(b: f64, d: f64) -> f64 {
    let s = b.sqrt() - d.sqrt();
    s * s
}

/// `sup_g [v g - B (e^g - 1) - D (e^{-g} - 1)]`, with `B, D >= 0`.
///
/// The maximiser is `e^g = (v + s) / 2B` with `s = sqrt(v^2 + 4BD)`, which
/// gives `v g - s + B + D`.
pub fn legendre_cost(b: f64, d: f64, v: f64) -> f64 {
    if v == 0.0 {
        return holding_cost(b, d);
    }
    if (v > 0.0 && b == 0.0) || (v < 0.0 && d == 0.0) {
        return f64::INFINITY;
    }
    let s = (v * v + 4.0 * b * d).sqrt();
    v * optimal_g(b, d, v, s) - s + b + d
}

/// `ln((v + s) / 2B)` written to avoid cancellation for either sign of `v`.
fn optimal_g(b: f64, d: f64, v: f64, s: f64) -> f64 {
    if v >= 0.0 {
        ((v + s) / (2.0 * b)).ln()
    } else {
        (2.0 * d / (s - v)).ln()
    }
}

/// Derivatives of `L(rho, v)` at an interior density.
struct Lagrangian {
    l: f64,
    l_rho: f64,
    l_v: f64,
    l_rr: f64,
    l_rv: f64,
    l_vv: f64,
}

struct Rates {
    b: [Polynomial; 3],
    d: [Polynomial; 3],
}

impl Rates {
    fn new(poly: &ReactionPolynomials) -> Self {
        let b1 = poly.b.derivative();
        let d1 = poly.d.derivative();
        Self {
            b: [poly.b.clone(), b1.derivative(), b1],
            d: [poly.d.clone(), d1.derivative(), d1],
        }
    }

    fn lagrangian(&self, rho: f64, v: f64) -> Lagrangian {
        let (b, b2, b1) = (self.b[0].eval(rho), self.b[1].eval(rho), self.b[2].eval(rho));
        let (d, d2, d1) = (self.d[0].eval(rho), self.d[1].eval(rho), self.d[2].eval(rho));
        let s = (v * v + 4.0 * b * d).sqrt();
        let g = optimal_g(b, d, v, s);
        let (e, ei) = (g.exp(), (-g).exp());
        let g_rho = -(b1 * e - d1 * ei) / s;
        Lagrangian {
            l: v * g - s + b + d,
            l_rho: -b1 * (e - 1.0) - d1 * (ei - 1.0),
            l_v: g,
            l_rr: -b2 * (e - 1.0) - d2 * (ei - 1.0) - (b1 * e - d1 * ei) * g_rho,
            l_rv: g_rho,
            l_vv: 1.0 / s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiOptions {
    pub horizon: f64,
    pub steps: usize,
    /// Threshold on `max |dS/drho_k| / dt`.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for QuasiOptions {
    fn default() -> Self {
        Self {
            horizon: 50.0,
            steps: 400,
            tol: 1e-9,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiPotential {
    /// Minimum action over homogeneous paths from the well.
    pub value: f64,
    /// `int max(0, +-log(D/B))` between the well and the target.
    pub oracle: f64,
    /// Density at each time level of the optimal path.
    pub path: Vec<f64>,
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
}

/// Quadrature value of `int_{well}^{target} max(0, s log(D/B)) du`, with `s`
/// the sign of `target - well`: the cost of climbing against the reaction,
/// free wherever the reaction pushes towards the target.
pub fn quasipotential_oracle(poly: &ReactionPolynomials, well: f64, target: f64) -> f64 {
    const INTERVALS: usize = 20_000;
    if target == well {
        return 0.0;
    }
    let sign = (target - well).signum();
    let (lo, hi) = (well.min(target), well.max(target));
    let f = |u: f64| (sign * (poly.death(u) / poly.birth(u)).ln()).max(0.0);
    let h = (hi - lo) / INTERVALS as f64;
    let inner: f64 = (1..INTERVALS)
        .map(|i| f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    h / 3.0 * (f(lo) + f(hi) + inner)
}

fn check_unit(x: f64, what: &str) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidArgument(format!("{what} = {x} must lie in (0, 1)")));
    }
    Ok(())
}

/// Minimises `sum_k dt L((rho_k + rho_{k+1}) / 2, (rho_{k+1} - rho_k) / dt)`
/// over paths from `well` to `target` on a long fixed horizon, by
/// Levenberg-Marquardt with the exact tridiagonal Hessian.
///
/// The path may idle at the well for free, so the long horizon stands in
/// for the infimum over horizons. The result is an upper bound for the
/// quasi-potential, which also allows inhomogeneous paths.
pub fn quasipotential_homogeneous(
    poly: &ReactionPolynomials,
    target: f64,
    well: f64,
    opts: &QuasiOptions,
) -> Result<QuasiPotential> {
    check_unit(target, "target")?;
    check_unit(well, "well")?;
    if opts.steps < 2 || !(opts.horizon > 0.0) {
        return Err(Error::InvalidArgument("need at least two steps and a positive horizon".into()));
    }
    let oracle = quasipotential_oracle(poly, well, target);
    let k = opts.steps;
    if target == well {
        return Ok(QuasiPotential {
            value: 0.0,
            oracle,
            path: vec![well; k + 1],
            iterations: 0,
            trace: Vec::new(),
        });
    }
    let rates = Rates::new(poly);
    let dt = opts.horizon / k as f64;
    let (lo, hi) = (1e-9, 1.0 - 1e-9);
    // idle for the first half, then a straight climb
    let mut x: Vec<f64> = (0..=k)
        .map(|i| {
            let s = (2.0 * i as f64 / k as f64 - 1.0).max(0.0);
            well + s * (target - well)
        })
        .collect();
    let action = |x: &[f64]| -> f64 {
        x.windows(2)
            .map(|p| dt * rates.lagrangian(0.5 * (p[0] + p[1]), (p[1] - p[0]) / dt).l)
            .sum()
    };
    let mut value = action(&x);
    let mut lambda = 1e-3;
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        // gradient and Hessian with respect to the interior levels 1..k-1
        let mut grad = vec![0.0; k + 1];
        let mut diag = vec![0.0; k + 1];
        let mut off = vec![0.0; k + 1];
        for i in 0..k {
            let l = rates.lagrangian(0.5 * (x[i] + x[i + 1]), (x[i + 1] - x[i]) / dt);
            grad[i] += dt * (0.5 * l.l_rho) - l.l_v;
            grad[i + 1] += dt * (0.5 * l.l_rho) + l.l_v;
            let (q_mm, q_mv, q_vv) = (0.25 * l.l_rr, 0.5 * l.l_rv, l.l_vv / (dt * dt));
            diag[i] += dt * (q_mm - 2.0 * q_mv / dt + q_vv);
            diag[i + 1] += dt * (q_mm + 2.0 * q_mv / dt + q_vv);
            off[i] += dt * (q_mm - q_vv);
        }
        let g_int = &grad[1..k];
        let gnorm = g_int.iter().map(|g| g.abs()).fold(0.0, f64::max) / dt;
        trace.push(TracePoint {
            iteration: iterations,
            value,
            gradient: gnorm,
        });
        if gnorm < opts.tol {
            break;
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NotConverged {
                iterations,
                gradient: gnorm,
            });
        }
        iterations += 1;
        let scale = diag[1..k].iter().map(|d| d.abs()).fold(0.0, f64::max).max(1e-12);
        loop {
            let d: Vec<f64> = diag[1..k].iter().map(|d| d + lambda * scale).collect();
            let sub: Vec<f64> = (1..k).map(|i| off[i - 1]).collect();
            let sup: Vec<f64> = (1..k).map(|i| off[i]).collect();
            let rhs: Vec<f64> = g_int.iter().map(|g| -g).collect();
            let step = tridiagonal(&sub, &d, &sup, &rhs);
            let mut trial = x.clone();
            for (t, s) in trial[1..k].iter_mut().zip(&step) {
                *t = (*t + s).clamp(lo, hi);
            }
            let v = action(&trial);
            if v.is_finite() && v <= value {
                x = trial;
                value = v;
                lambda = (lambda / 3.0).max(1e-12);
                break;
            }
            lambda *= 4.0;
            if lambda > 1e12 {
                return Err(Error::NotConverged {
                    iterations,
                    gradient: gnorm,
                });
            }
        }
    }
    Ok(QuasiPotential {
        value,
        oracle,
        path: x,
        iterations,
        trace,
    })
}

/// `h_i` estimate for one well: half the smallest homogeneous action needed
/// to leave `[rho_i - radius, rho_i + radius]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellDepth {
    pub well: f64,
    pub radius: f64,
    /// An upper bound for `h_i`, since only homogeneous paths are searched.
    pub upper_estimate: f64,
    /// `(target, optimizer value, oracle value)` for each exit point.
    pub exits: Vec<(f64, f64, f64)>,
}

pub fn well_depth_estimate(
    poly: &ReactionPolynomials,
    index: usize,
    radius: f64,
    opts: &QuasiOptions,
) -> Result<WellDepth> {
    let profile = potential_minima(poly, 1e-8)?;
    let well = *profile.minima.get(index).ok_or_else(|| {
        Error::InvalidArgument(format!("well {index} requested, {} found", profile.ell()))
    })?;
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    if profile
        .minima
        .iter()
        .any(|&m| m != well && (m - well).abs() <= radius)
    {
        return Err(Error::InvalidArgument(format!(
            "radius {radius} around {well} contains another well"
        )));
    }
    let mut exits = Vec::new();
    for target in [well - radius, well + radius] {
        if target > 0.0 && target < 1.0 {
            let q = quasipotential_homogeneous(poly, target, well, opts)?;
            exits.push((target, q.value, q.oracle));
        }
    }
    if exits.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "radius {radius} leaves no exit point inside (0, 1)"
        )));
    }
    let upper_estimate = 0.5 * exits.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    Ok(WellDepth {
        well,
        radius,
        upper_estimate,
        exits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellDepths {
    pub wells: Vec<WellDepth>,
    /// `min_i h_i`
    pub h0: f64,
}

impl WellDepths {
    pub fn depths(&self) -> Vec<f64> {
        self.wells.iter().map(|w| w.upper_estimate).collect()
    }
}

/// Estimates for every well and their minimum `h0`.
pub fn well_depths(poly: &ReactionPolynomials, radius: f64, opts: &QuasiOptions) -> Result<WellDepths> {
    let ell = potential_minima(poly, 1e-8)?.ell();
    if ell < 2 {
        return Err(Error::SingleWell);
    }
    let wells = (0..ell)
        .map(|i| well_depth_estimate(poly, i, radius, opts))
        .collect::<Result<Vec<_>>>()?;
    let h0 = wells.iter().map(|w| w.upper_estimate).fold(f64::INFINITY, f64::min);
    Ok(WellDepths { wells, h0 })
}
