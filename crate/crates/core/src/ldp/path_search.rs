//! Space-time searches built on the rate function: the discretisation floor
//! and a slow minimum-action descent over inhomogeneous paths.

use super::functional::{rate_function_from, rho_gradient, time_weights};
use super::{rate_function, RateOptions, TracePoint};
use crate::hydro::{evolve, DensityPath, DensitySlice};
use crate::model::ReactionPolynomials;
use crate::Result;
use serde::{Deserialize, Serialize};

/// `I_T` of the numerical solution started at `rho0`, on the solver's grid.
/// Exact solutions have zero cost, so this measures the discretisation error.
pub fn discretization_floor(
    rho0: &DensitySlice,
    poly: &ReactionPolynomials,
    t_end: f64,
    dt: f64,
    opts: &RateOptions,
) -> Result<f64> {
    let path = evolve(rho0, poly, t_end, dt)?;
    Ok(rate_function(&path, rho0, poly, opts)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinActionOptions {
    pub rate: RateOptions,
    pub max_iterations: usize,
    /// Stop once the weighted gradient sup norm falls below this.
    pub tol: f64,
    pub initial_step: f64,
}

impl Default for MinActionOptions {
    fn default() -> Self {
        Self {
            rate: RateOptions::default(),
            max_iterations: 200,
            tol: 1e-6,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinActionResult {
    pub path: DensityPath,
    pub action: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TracePoint>,
}

/// Projected gradient descent of `I_T(. | path(0))` over the interior time
/// levels, endpoints held fixed. The gradient comes from the maximising
/// control (envelope theorem); each trial re-solves the inner problem from
/// the previous control. Slow, and a local search only.
pub fn minimum_action_path(
    poly: &ReactionPolynomials,
    initial: &DensityPath,
    opts: &MinActionOptions,
) -> Result<MinActionResult> {
    let rho0 = initial.first().clone();
    let (k, m) = (initial.steps(), initial.grid());
    let h = 1.0 / m as f64;
    let w = time_weights(k, initial.dt());
    let mut path = initial.clone();
    let mut current = rate_function(&path, &rho0, poly, &opts.rate)?;
    let mut step = opts.initial_step;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let grad = rho_gradient(&path, poly, &current.control);
        // L^2-type gradient: divide by the quadrature weight of each node
        let scaled: Vec<Vec<f64>> = (0..=k)
            .map(|i| grad[i].iter().map(|g| g / (w[i] * h)).collect())
            .collect();
        let gnorm = scaled[1..k].iter().flatten().map(|g| g.abs()).fold(0.0, f64::max);
        trace.push(TracePoint {
            iteration: iterations,
            value: current.value,
            gradient: gnorm,
        });
        if gnorm < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        while step > 1e-12 {
            let slices: Vec<DensitySlice> = (0..=k)
                .map(|i| {
                    let s = path.slices()[i].values();
                    if i == 0 || i == k {
                        return path.slices()[i].clone();
                    }
                    let v = s
                        .iter()
                        .zip(&scaled[i])
                        .map(|(r, g)| (r - step * g).clamp(1e-9, 1.0 - 1e-9))
                        .collect();
                    DensitySlice::from_values_unchecked(v)
                })
                .collect();
            let trial = DensityPath::new(path.t0(), path.dt(), slices)?;
            let r = rate_function_from(&trial, &rho0, poly, &opts.rate, Some(&current.control))?;
            if r.value < current.value {
                path = trial;
                current = r;
                step *= 2.0;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(MinActionResult {
        path,
        action: current.value,
        iterations,
        converged,
        trace,
    })
}
