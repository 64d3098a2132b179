use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid piecewise-linear function: {0}")]
    InvalidFunction(String),

    #[error("invalid junction function: {0}")]
    InvalidJunction(String),

    #[error("relaxation has no solution at ({p_l}, {p_r}): best residual {residual:e}")]
    NoSolution { p_l: f64, p_r: f64, residual: f64 },

    #[error("relaxation value at ({p_l}, {p_r}) is not unique: lambda spans [{lo}, {hi}]")]
    AmbiguousLambda { p_l: f64, p_r: f64, lo: f64, hi: f64 },

    #[error("relaxed table is not monotone near ({p_l}, {p_r}): violation {violation:e}")]
    MonotonicityViolation { p_l: f64, p_r: f64, violation: f64 },

    #[error("relaxation failed at grid point ({p_l}, {p_r}): {source}")]
    RelaxAt {
        p_l: f64,
        p_r: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("non-finite value at step {step}, index {index}")]
    NonFiniteState { step: usize, index: usize },

    #[error("point (t = {t}, x = {x}) lies outside the computed domain")]
    OutOfDomain { t: f64, x: f64 },

    #[error("time step {step} was not stored (snapshot stride {stride})")]
    NotStored { step: usize, stride: usize },

    #[error("trajectories do not share a grid")]
    GridMismatch,

    #[error("({k_l}, {k_r}) is not in the germ of the junction function (residual {residual:e})")]
    NotAGermConstant { k_l: f64, k_r: f64, residual: f64 },

    #[error("bad window: {0}")]
    BadWindow(String),

    #[error("no time step falls in the window [{t0}, {t1}]")]
    EmptyWindow { t0: f64, t1: f64 },

    #[error("check needs every time step stored, but the snapshot stride is {stride}")]
    NeedsDenseTrajectory { stride: usize },
}
