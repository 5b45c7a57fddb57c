//! Time integration, nonlinear and linear solvers, and the inverse
//! Dirichlet Laplacian.

pub mod assembly;
pub mod inverse;
pub mod krylov;
pub mod newton;
pub mod sparse;
mod stepper;

pub use inverse::{discrete_poincare_constant, inverse_dirichlet_laplacian, star_norm};
pub use krylov::{linear_solve, LinearConfig};
pub use newton::{newton_solve, NewtonConfig};
pub use sparse::Csr;
pub use stepper::{quasistatic_sigma_solve, quasistatic_step, step, Stepper, WeakResiduals};

use thiserror::Error;

use crate::grid::{Field, GridError, SpaceTimeFn};
use crate::model::{BoundaryData, ModelParams};
use crate::potential::Potential;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("Newton did not converge: residual {residual:e} after {iters} iterations")]
    NonConvergence { residual: f64, iters: usize },
    #[error("Jacobian inconsistent with residual: relative probe error {rel_error:e}")]
    JacobianMismatch { rel_error: f64 },
    #[error("linear solver breakdown: relative residual {residual:e} after {iters} iterations")]
    Breakdown { residual: f64, iters: usize },
    #[error("linear solver hit the iteration limit: relative residual {residual:e} after {iters} iterations")]
    MaxIters { residual: f64, iters: usize },
    #[error("invalid stepper configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    Decoupled,
    /// `k` sweeps of the σ-solve/CH-solve pair; `Picard(1)` equals `Decoupled`.
    Picard(usize),
}

impl Coupling {
    pub fn sweeps(self) -> usize {
        match self {
            Coupling::Decoupled => 1,
            Coupling::Picard(k) => k.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub tau: f64,
    pub t_end: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    pub coupling: Coupling,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            tau: 1e-3,
            t_end: 0.1,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            linear_tol: 1e-12,
            linear_max_iter: 5000,
            coupling: Coupling::Decoupled,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau = {} must be positive", self.tau));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be non-negative", self.t_end));
        }
        if !(self.newton_tol > 0.0 && self.linear_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.newton_max_iter == 0 || self.linear_max_iter == 0 {
            return bad("iteration limits must be positive".into());
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`, rounding to the nearest integer.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.tau).round() as usize
    }

    pub fn newton(&self) -> NewtonConfig {
        NewtonConfig { tol: self.newton_tol, max_iter: self.newton_max_iter, linear: self.linear(), probe_jacobian: false }
    }

    pub fn linear(&self) -> LinearConfig {
        LinearConfig { tol: self.linear_tol, max_iter: self.linear_max_iter }
    }
}

/// Extra right-hand sides for manufactured solutions: `f_phi` in the φ
/// equation, `f_mu` in the μ equation, `f_sigma` in the σ equation.
#[derive(Debug, Clone)]
pub struct Forcing {
    pub f_phi: SpaceTimeFn,
    pub f_mu: SpaceTimeFn,
    pub f_sigma: SpaceTimeFn,
}

/// Everything a stepper needs besides the state.
#[derive(Debug, Clone)]
pub struct Problem {
    pub params: ModelParams,
    pub potential: Potential,
    pub bdata: BoundaryData,
    pub forcing: Option<Forcing>,
}

impl Problem {
    pub fn new(params: ModelParams, potential: Potential, bdata: BoundaryData) -> Self {
        Self { params, potential, bdata, forcing: None }
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }
}

#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub phi: Field,
    pub mu: Field,
    pub sigma: Field,
    pub step_index: usize,
}
