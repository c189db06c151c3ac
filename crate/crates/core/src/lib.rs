//! Classical and quantum-noise simulation of solitons in nonlinear fiber
//! Bragg gratings.
//!
//! The classical nonlinear coupled-mode equations are integrated with an
//! exact-transport split-step scheme. Quantum fluctuations are treated in the
//! linearization approximation: measurement functions are back-propagated
//! through the adjoint of the discrete linearized dynamics, and the squeezing
//! ratio follows from the coherent-state variance at the input.

pub mod adjoint;
pub mod config;
pub mod covariance;
pub mod dispersion;
pub mod error;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod io;
pub mod measurement;
pub mod profile;
pub mod solver;

pub use error::{Error, Result};
pub use field::{FieldState, ProjectionFunction};
pub use grid::{make_grid, SimGrid};
pub use profile::GratingProfile;
