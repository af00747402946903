use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rate window of width {width} does not fit on a torus of size {n}")]
    WindowTooLarge { n: usize, width: usize },

    #[error("invalid rate table: {0}")]
    InvalidRate(String),

    #[error("degenerate critical point of the potential at rho = {at} (|V''| = {curvature:e})")]
    DegenerateCritical { at: f64, curvature: f64 },

    #[error("{bins} bins do not divide system size {n}")]
    BinMismatch { n: usize, bins: usize },

    #[error("the local rate is not attractive; monotone coupling unavailable")]
    AttractivityRequired,

    #[error("system size {n} exceeds the exact-computation cap {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("linear solve failed (residual {residual:e})")]
    SolveFailure { residual: f64 },

    #[error("hitting target set is empty")]
    EmptyTarget,

    #[error("state set has stationary mass {mass}; need 0 < mu(A) < 1")]
    DegenerateSet { mass: f64 },

    #[error("overshoot of {amount:e} outside [0, 1] at t = {time}")]
    Overshoot { amount: f64, time: f64 },

    #[error("time step {dt} exceeds the reaction stability budget {budget}")]
    StepTooLarge { dt: f64, budget: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {gradient:e})")]
    NotConverged { iterations: usize, gradient: f64 },

    #[error("potential has a single well; h0 needs at least two")]
    SingleWell,

    #[error("start configuration lies outside the inner ball (distance {distance}, alpha {alpha})")]
    StartOutsideA { distance: f64, alpha: f64 },

    #[error("invalid radii: {0}")]
    InvalidRadii(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("no answer within the horizon t_max = {t_max}")]
    HorizonExceeded { t_max: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
