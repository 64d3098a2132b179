//! Solvers and verification tools for scalar conservation laws and
//! Hamilton-Jacobi equations on the line with one flux discontinuity at `x = 0`.

pub mod diagnostics;
pub mod error;
pub mod germ;
pub mod junction;
pub mod pl_function;
pub mod solver;

pub use diagnostics::{CheckResult, DiagnosticsReport, TracePair};
pub use error::{Error, Result};
pub use germ::{entropy_flux, CharacteristicClass, Germ, GermPoint, MaximalityReport};
pub use junction::{relax, relax_eval, underline_h, JunctionFunction, JunctionTable, Relaxation};
pub use pl_function::PiecewiseLinear;
pub use solver::{run, Fluxes, GridSpec, InitialData, Problem, RunOptions, Simulation, Trajectory};
