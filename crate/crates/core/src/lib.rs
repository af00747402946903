//! Numerical laboratory for the one-dimensional Glauber+Kawasaki
//! reaction-diffusion particle system.
//!
//! The generator is `L_N = L_G + N^2 L_K`: spin flips at site `x` happen with a
//! local, translation-invariant rate `c(x, eta)`, and every nearest-neighbour
//! bond exchanges its occupation variables at rate `N^2 / 2`.
//!
//! Modules:
//!
//! - [`model`]: configurations, local rates, reaction polynomials `B, D, F, V`.
//! - [`simulator`]: exact kinetic Monte Carlo and the monotone grand coupling.
//! - [`exact`]: finite-state computations on the full `2^n` state space.
//! - [`hydro`]: the reaction-diffusion PDE and the Fourier metric on measures.
//! - [`ldp`]: the dynamical rate functional and homogeneous quasi-potentials.
//! - [`hitting`]: escape-time experiments and exponential-law tests.

pub mod error;
pub mod exact;
pub mod hitting;
pub mod hydro;
pub mod ldp;
mod linalg;
pub mod model;
pub mod poly;
pub mod rng;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
