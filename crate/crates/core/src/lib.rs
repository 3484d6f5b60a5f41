//! Pseudo-spectral toolkit for the defocusing energy-critical nonlinear
//! Schrödinger equation with frequency-cube randomized initial data.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: periodic grids, FFTs, Fourier multipliers, space-time norms.
//! * [`partition`]: the narrowed cube family with its smooth partition of unity.
//! * [`randomization`]: seeded Gaussian randomization and tail statistics.
//! * [`linear_flow`]: randomized free evolution and the composite X/Y/Z norms.
//! * [`solver`]: Strang split-step integrator for the full and forced equations.
//! * [`morawetz`]: local densities, interaction functional and inequality audits.

pub mod error;
pub mod linear_flow;
pub mod morawetz;
pub mod partition;
pub mod randomization;
pub mod solver;
pub mod spectral;
pub mod summation;

pub use error::{Error, Result};
