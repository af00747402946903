//! Dynamical large deviations: the energy, the functional `J(G)`, the rate
//! function `I_T(. | rho)` as `sup_G J(G)`, and homogeneous estimates of the
//! quasi-potential and the well depths.

mod functional;
mod homogeneous;
mod path_search;

pub use functional::{
    energy, j_functional, j_gradient, rate_function, ActionBreakdown, RateFunctionValue, RateOptions,
    TracePoint,
};
pub use homogeneous::{
    holding_cost, legendre_cost, quasipotential_homogeneous, quasipotential_oracle, well_depth_estimate,
    well_depths, QuasiOptions, QuasiPotential, WellDepth, WellDepths,
};
pub use path_search::{discretization_floor, minimum_action_path, MinActionOptions, MinActionResult};

use crate::hydro::DensityPath;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// A test function `G(t_i, theta_j)` on the grid of a [`DensityPath`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlField {
    t0: f64,
    dt: f64,
    values: Vec<Vec<f64>>,
}

impl ControlField {
    pub fn zeros(path: &DensityPath) -> Self {
        Self {
            t0: path.t0(),
            dt: path.dt(),
            values: vec![vec![0.0; path.grid()]; path.steps() + 1],
        }
    }

    /// `values[i][j] = G(t_i, theta_j)`.
    pub fn new(path: &DensityPath, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != path.steps() + 1 || values.iter().any(|v| v.len() != path.grid()) {
            return Err(Error::GridMismatch("control values do not match the path grid".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("control values must be finite".into()));
        }
        Ok(Self {
            t0: path.t0(),
            dt: path.dt(),
            values,
        })
    }

    /// Samples `f(t, theta)` on the grid of `path`.
    pub fn from_fn(path: &DensityPath, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let m = path.grid();
        let values = (0..=path.steps())
            .map(|i| (0..m).map(|j| f(path.time(i), j as f64 / m as f64)).collect())
            .collect();
        Self::new(path, values)
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn grid(&self) -> usize {
        self.values[0].len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if other.values.len() != self.values.len() || other.grid() != self.grid() {
            return Err(Error::GridMismatch("controls on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect())
            .collect();
        Ok(Self { values, ..*self })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max)
    }
}
