//! Finite-difference solver and experiment harness for a Cahn–Hilliard
//! tumour-growth model with nutrient, chemotaxis, active transport and
//! non-zero Dirichlet boundary data.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] – structured 1D/2D grids, fields with Dirichlet traces, FD operators
//! * [`potential`] – regular polynomial potentials and Yosida-regularised obstacles
//! * [`model`] – parameters, boundary/initial data, assumption checks, config files
//! * [`solver`] – sparse Krylov solvers, Newton, time steppers, inverse Laplacian
//! * [`diagnostics`] – energy functionals, the tested energy identity, norms
//! * [`experiments`] – κ, Yosida, continuous-dependence and MMS sweeps

pub mod diagnostics;
pub mod experiments;
pub mod grid;
pub mod model;
pub mod potential;
pub mod solver;

pub use grid::{Field, Grid, SpaceTimeFn};
pub use model::{BoundaryData, InitialData, Mode, ModelParams};
pub use potential::Potential;
pub use solver::{State, StepperConfig};
