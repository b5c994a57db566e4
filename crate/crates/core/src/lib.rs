//! Spectral and scattering computations for matrix Schrödinger operators on
//! the half-line `[0, ∞)` with general self-adjoint boundary conditions, and
//! a time-stepper for the associated matrix nonlinear Schrödinger equation.

pub mod asympt;
pub mod boundary;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod jost;
pub mod linalg;
pub mod linemap;
pub mod oracles;
pub mod potential;
pub mod selftest;
pub mod spectral;

pub use boundary::BoundaryPair;
pub use error::{Error, Result};
pub use grid::UniformGrid;
pub use linalg::{ComplexMatrix, C64};
pub use potential::PotentialSpec;
