//! Ridgeless kernel collocation for infinite-horizon economic DAEs.
//!
//! State, co-state and jump derivatives are Matérn kernel machines on a
//! training grid. The DAE residuals are driven to zero at the grid points
//! while the RKHS norms of the derivatives are kept small, and that
//! minimum-norm selection picks out the path satisfying the transversality
//! condition without imposing it.

pub mod banded;
pub mod diagnostics;
pub mod error;
pub mod ivp;
pub mod kernel;
pub mod lm;
pub mod model;
pub mod quadrature;
pub mod reference;
pub mod solver;

pub use error::{Error, Result};
pub use kernel::{KernelSpec, Smoothness, TrainingGrid};
pub use model::{ModelSpec, Trajectory};
pub use solver::{solve, KernelSolution, SolverConfig};
