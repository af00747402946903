//! Macroscopic side: density profiles on the continuous torus, the
//! reaction-diffusion equation `d_t rho = (1/2) Laplacian(rho) + F(rho)`, its
//! stationary solutions, and the Fourier metric on measures.

mod metric;
mod pde;
mod slice;

pub use metric::{
    fourier_metric, FourierCoeffs, FourierTracker, MetricValue, DEFAULT_TRUNCATION,
};
pub use pde::{evolve, stationary_solutions, StationarySearch, StationarySolution};
pub use slice::{l2_distance, sup_distance, DensityPath, DensitySlice};
