use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Density values `rho_j` at `theta_j = j / M` on the unit torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySlice {
    values: Vec<f64>,
}

impl DensitySlice {
    /// Fails unless every value lies in `[0, 1]`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty density slice".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("density {v} outside [0, 1]")));
        }
        Ok(Self { values })
    }

    /// No range check; for perturbed paths fed to the rate functional.
    pub fn from_values_unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(m: usize, rho: f64) -> Result<Self> {
        Self::new(vec![rho; m])
    }

    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..m).map(|j| f(j as f64 / m as f64)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 / self.len() as f64
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Periodic linear interpolation at `theta`.
    pub fn at(&self, theta: f64) -> f64 {
        let m = self.len();
        let s = theta.rem_euclid(1.0) * m as f64;
        let j = (s.floor() as usize).min(m - 1);
        let frac = s - j as f64;
        self.values[j] * (1.0 - frac) + self.values[(j + 1) % m] * frac
    }

    /// Block averages onto `bins` equal cells; `bins` must divide the grid.
    pub fn block_average(&self, bins: usize) -> Result<Vec<f64>> {
        let m = self.len();
        if bins == 0 || m % bins != 0 {
            return Err(Error::GridMismatch(format!("{bins} bins on a grid of {m}")));
        }
        let w = m / bins;
        Ok(self
            .values
            .chunks(w)
            .map(|c| c.iter().sum::<f64>() / w as f64)
            .collect())
    }

    pub fn is_in_unit_interval(&self) -> bool {
        self.values.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// Space-time density on a uniform time grid `t_i = t0 + i dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPath {
    t0: f64,
    dt: f64,
    slices: Vec<DensitySlice>,
}

impl DensityPath {
    pub fn new(t0: f64, dt: f64, slices: Vec<DensitySlice>) -> Result<Self> {
        if slices.len() < 2 {
            return Err(Error::InvalidArgument("a path needs at least two time levels".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
        }
        let m = slices[0].len();
        if slices.iter().any(|s| s.len() != m) {
            return Err(Error::GridMismatch("slices with different grid sizes".into()));
        }
        Ok(Self { t0, dt, slices })
    }

    /// A path held at `slice` for `steps` time steps.
    pub fn constant(slice: DensitySlice, dt: f64, steps: usize) -> Result<Self> {
        Self::new(0.0, dt, vec![slice; steps + 1])
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    pub fn grid(&self) -> usize {
        self.slices[0].len()
    }

    pub fn slices(&self) -> &[DensitySlice] {
        &self.slices
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    pub fn first(&self) -> &DensitySlice {
        &self.slices[0]
    }

    pub fn last(&self) -> &DensitySlice {
        self.slices.last().expect("non-empty path")
    }

    /// Slice nearest to time `t`.
    pub fn at_time(&self, t: f64) -> &DensitySlice {
        let i = ((t - self.t0) / self.dt).round().clamp(0.0, self.steps() as f64) as usize;
        &self.slices[i]
    }

    /// The same path with `delta` added to every density value.
    pub fn shifted(&self, delta: f64) -> Self {
        let slices = self
            .slices
            .iter()
            .map(|s| DensitySlice::from_values_unchecked(s.values().iter().map(|v| v + delta).collect()))
            .collect();
        Self {
            t0: self.t0,
            dt: self.dt,
            slices,
        }
    }

    /// Sub-path of time levels `from..=to`.
    pub fn window(&self, from: usize, to: usize) -> Result<Self> {
        if to <= from || to > self.steps() {
            return Err(Error::InvalidArgument(format!("bad window {from}..={to}")));
        }
        Self::new(self.time(from), self.dt, self.slices[from..=to].to_vec())
    }
}

fn check_same_grid(a: &DensitySlice, b: &DensitySlice) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} vs {} grid points", a.len(), b.len())));
    }
    Ok(())
}

/// `||rho1 - rho2||_2` by the (periodic) trapezoidal rule.
pub fn l2_distance(a: &DensitySlice, b: &DensitySlice) -> Result<f64> {
    check_same_grid(a, b)?;
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((s / a.len() as f64).sqrt())
}

pub fn sup_distance(a: &DensitySlice, b: &DensitySlice) -> Result<f64> {
    check_same_grid(a, b)?;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}
