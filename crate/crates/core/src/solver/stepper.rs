//! Decoupled semi-implicit scheme: an implicit linear σ-solve followed by a
//! convex-splitting Cahn–Hilliard solve with Newton on the φ-reduced system.

use log::debug;

use super::assembly::{laplacian_lift, laplacian_matrix, weighted_lift, weighted_operator};
use super::krylov::cg;
use super::newton::newton_solve;
use super::sparse::Csr;
use super::{Forcing, Problem, SolverError, State, StepperConfig};
use crate::grid::{div_weighted_flux, laplacian, Field, Grid, SpaceTimeFn};
use crate::model::{BoundaryData, ModelParams};
use crate::potential::Potential;

/// Continuation rungs tried when Newton fails for a Yosida potential.
const MAX_CONTINUATION: u32 = 12;

/// Largest nodal residual of each discrete equation tested with unit vectors
/// (i.e. scaled by the cell volume), in the time-integrated form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakResiduals {
    pub phi: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl WeakResiduals {
    pub fn max(&self) -> f64 {
        self.phi.max(self.mu).max(self.sigma)
    }
}

/// A stepping session: caches the grid operators for one problem.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    problem: Problem,
    cfg: StepperConfig,
    lap: Csr,
    lap_sq: Csr,
    lift_phi: Vec<f64>,
    /// Total Newton iterations over the session.
    pub newton_iterations: usize,
    /// Yosida continuation rungs used over the session.
    pub continuation_rungs: usize,
}

fn sample_forcing(f: Option<&Forcing>, pick: fn(&Forcing) -> &SpaceTimeFn, grid: &Grid, t: f64) -> Vec<f64> {
    match f {
        Some(f) => pick(f).sample(grid, t),
        None => vec![0.0; grid.len()],
    }
}

impl Stepper {
    pub fn new(grid: Grid, problem: Problem, cfg: StepperConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        let lap = laplacian_matrix(&grid);
        let lap_sq = lap.mul(&lap);
        let lift_phi = laplacian_lift(&grid, &(-1.0).into(), 0.0)?;
        Ok(Self { grid, problem, cfg, lap, lap_sq, lift_phi, newton_iterations: 0, continuation_rungs: 0 })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn is_quasistatic(&self) -> bool {
        self.problem.params.kappa == 0.0
    }

    fn forcing(&self, pick: fn(&Forcing) -> &SpaceTimeFn, t: f64) -> Vec<f64> {
        sample_forcing(self.problem.forcing.as_ref(), pick, &self.grid, t)
    }

    fn d_field(&self, phi: &Field) -> Field {
        let d = self.problem.params.diffusivity;
        phi.map(move |y| d.eval(y))
    }

    /// `μ = (γ/ε)(Ψ₁'(φ⁺) + Ψ₂'(φ)) - γε Δφ⁺ - χσ⁺ + f_μ`.
    fn chemical_potential(&self, pot: &Potential, phi_new: &[f64], phi_old: &[f64], sigma_new: &[f64], f_mu: &[f64]) -> Vec<f64> {
        let p = &self.problem.params;
        let (a, b) = (p.gamma / p.eps, p.gamma * p.eps);
        let lphi = self.lap.matvec(phi_new);
        (0..phi_new.len())
            .map(|k| {
                a * (pot.psi1_prime(phi_new[k]) + pot.psi2_prime(phi_old[k])) - b * (lphi[k] + self.lift_phi[k]) - p.chi * sigma_new[k]
                    + f_mu[k]
            })
            .collect()
    }

    /// Initial state; μ0 uses the full `Ψ'(φ0)`. In quasi-static mode σ0 is
    /// replaced by the elliptic solve at `t = 0`.
    pub fn initial_state(&self, phi0: &Field, sigma0: &Field) -> Result<State, SolverError> {
        let g = self.grid;
        let sigma = if self.is_quasistatic() {
            self.sigma_solve(phi0, None, 0.0)?
        } else {
            Field::new(g, sigma0.values().to_vec(), self.problem.bdata.sigma_inf.clone())?
        };
        let phi = Field::new(g, phi0.values().to_vec(), (-1.0).into())?;
        let p = &self.problem.params;
        let lphi = laplacian(&g, &phi, 0.0)?;
        let f_mu = self.forcing(|f| &f.f_mu, 0.0);
        let mu: Vec<f64> = (0..g.len())
            .map(|k| {
                p.gamma / p.eps * self.problem.potential.psi_prime(phi.values()[k]) - p.gamma * p.eps * lphi[k]
                    - p.chi * sigma.values()[k]
                    + f_mu[k]
            })
            .collect();
        let mu = Field::new(g, mu, self.problem.bdata.mu_inf.clone())?;
        Ok(State { t: 0.0, phi, mu, sigma, step_index: 0 })
    }

    /// Implicit σ-solve with coefficients from `phi_c`; `sigma_old = None`
    /// selects the quasi-static (κ = 0) equation.
    fn sigma_solve(&self, phi_c: &Field, sigma_old: Option<&[f64]>, t1: f64) -> Result<Field, SolverError> {
        let g = &self.grid;
        let p = &self.problem.params;
        let w = self.d_field(phi_c);
        let a = weighted_operator(g, &w, t1)?;
        let lift = weighted_lift(g, &w, &self.problem.bdata.sigma_inf, t1)?;
        let transport = div_weighted_flux(g, &w, &Field::zeros(*g), phi_c, p.eta, t1)?;
        let f3 = self.forcing(|f| &f.f_sigma, t1);
        let reaction: Vec<f64> = phi_c.values().iter().map(|&y| p.lambda_c * p.h(y)).collect();
        let mass = if sigma_old.is_some() { p.kappa / self.cfg.tau } else { 0.0 };
        let diag: Vec<f64> = reaction.iter().map(|r| mass + r).collect();
        let m = Csr::diagonal_matrix(&diag).add(1.0, &a, -1.0);
        let rhs: Vec<f64> = (0..g.len())
            .map(|k| sigma_old.map_or(0.0, |s| mass * s[k]) + lift[k] + transport[k] + f3[k])
            .collect();
        let out = cg(&m, &rhs, sigma_old, &self.cfg.linear())?;
        Ok(Field::new(*g, out.x, self.problem.bdata.sigma_inf.clone())?)
    }

    /// CH-solve for `φ⁺`; returns `(φ⁺, μ⁺)` values.
    fn ch_solve(&mut self, state: &State, phi_c: &Field, sigma_new: &Field, guess: Vec<f64>, t1: f64) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
        let pot = self.problem.potential.clone();
        match self.ch_solve_with(&pot, state, phi_c, sigma_new, guess.clone(), t1) {
            Ok(r) => Ok(r),
            Err(e @ (SolverError::NonConvergence { .. } | SolverError::MaxIters { .. } | SolverError::Breakdown { .. })) => {
                let Some(s) = pot.as_singular() else { return Err(e) };
                // n-continuation: climb until a rung converges, then walk back down warm-started
                let mut rung = 1;
                let mut x = loop {
                    if rung > MAX_CONTINUATION {
                        return Err(e);
                    }
                    let trial = pot.with_yosida_n(s.n * f64::powi(2.0, rung as i32));
                    if let Ok((x, _)) = self.ch_solve_with(&trial, state, phi_c, sigma_new, guess.clone(), t1) {
                        break x;
                    }
                    rung += 1;
                };
                debug!("yosida continuation from n = {} used {rung} rungs", s.n);
                self.continuation_rungs += rung as usize;
                for r in (1..rung).rev() {
                    let trial = pot.with_yosida_n(s.n * f64::powi(2.0, r as i32));
                    x = self.ch_solve_with(&trial, state, phi_c, sigma_new, x, t1)?.0;
                }
                self.ch_solve_with(&pot, state, phi_c, sigma_new, x, t1)
            }
            Err(e) => Err(e),
        }
    }

    fn ch_solve_with(
        &mut self,
        pot: &Potential,
        state: &State,
        phi_c: &Field,
        sigma_new: &Field,
        guess: Vec<f64>,
        t1: f64,
    ) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
        let g = self.grid;
        let p = self.problem.params.clone();
        let tau = self.cfg.tau;
        let a = p.gamma / p.eps;
        let b = p.gamma * p.eps;
        let phi_old = state.phi.values().to_vec();
        let f_mu = self.forcing(|f| &f.f_mu, t1);
        let f_phi = self.forcing(|f| &f.f_phi, t1);
        let lift_mu = laplacian_lift(&g, &self.problem.bdata.mu_inf, t1)?;
        let source: Vec<f64> = (0..g.len())
            .map(|k| (p.lambda_p * sigma_new.values()[k] - p.lambda_a) * p.h(phi_c.values()[k]) + f_phi[k])
            .collect();
        let sig = sigma_new.values();

        let this = &*self;
        let residual = |x: &[f64]| -> Vec<f64> {
            let mu = this.chemical_potential(pot, x, &phi_old, sig, &f_mu);
            let lmu = this.lap.matvec(&mu);
            (0..x.len()).map(|k| x[k] - phi_old[k] - tau * (lmu[k] + lift_mu[k]) - tau * source[k]).collect()
        };
        let base = Csr::identity(g.len()).add(1.0, &self.lap_sq, tau * b);
        let jacobian = |x: &[f64]| -> Csr {
            let d: Vec<f64> = x.iter().map(|&y| a * pot.psi1_second(y)).collect();
            let ld = self.lap.mul(&Csr::diagonal_matrix(&d));
            base.add(1.0, &ld, -tau)
        };
        let mut ncfg = self.cfg.newton();
        ncfg.probe_jacobian = state.step_index == 0 && !pot.is_singular();
        let out = newton_solve(residual, jacobian, guess, &ncfg)?;
        let mu = self.chemical_potential(pot, &out.x, &phi_old, sig, &f_mu);
        self.newton_iterations += out.iterations;
        Ok((out.x, mu))
    }

    /// One step `t -> t + τ`; dispatches on `κ = 0`.
    pub fn advance(&mut self, state: &State) -> Result<State, SolverError> {
        let g = self.grid;
        let t1 = next_time(state.t, self.cfg.tau);
        let quasi = self.is_quasistatic();
        let mut phi_c = state.phi.clone();
        let mut guess = state.phi.values().to_vec();
        let mut result = None;
        for _ in 0..self.cfg.coupling.sweeps() {
            let sigma = if quasi {
                self.sigma_solve(&phi_c, None, t1)?
            } else {
                self.sigma_solve(&phi_c, Some(state.sigma.values()), t1)?
            };
            let (phi, mu) = self.ch_solve(state, &phi_c, &sigma, guess, t1)?;
            guess = phi.clone();
            phi_c = Field::new(g, phi.clone(), (-1.0).into())?;
            result = Some((phi, mu, sigma));
        }
        let (phi, mu, sigma) = result.expect("at least one sweep");
        Ok(State {
            t: t1,
            phi: Field::new(g, phi, (-1.0).into())?,
            mu: Field::new(g, mu, self.problem.bdata.mu_inf.clone())?,
            sigma,
            step_index: state.step_index + 1,
        })
    }

    /// Residuals of the decoupled scheme's equations at `(old, new)`.
    pub fn weak_residuals(&self, old: &State, new: &State) -> Result<WeakResiduals, SolverError> {
        let g = self.grid;
        let p = &self.problem.params;
        let tau = new.t - old.t;
        let vol = g.cell_volume();
        let t1 = new.t;
        let max_abs = |v: Vec<f64>| v.into_iter().fold(0.0f64, |m, x| m.max(x.abs())) * vol;

        let lmu = laplacian(&g, &new.mu, t1)?;
        let f_phi = self.forcing(|f| &f.f_phi, t1);
        let r_phi: Vec<f64> = (0..g.len())
            .map(|k| {
                let s = (p.lambda_p * new.sigma.values()[k] - p.lambda_a) * p.h(old.phi.values()[k]) + f_phi[k];
                new.phi.values()[k] - old.phi.values()[k] - tau * (lmu[k] + s)
            })
            .collect();

        let f_mu = self.forcing(|f| &f.f_mu, t1);
        let mu_expected = self.chemical_potential(&self.problem.potential, new.phi.values(), old.phi.values(), new.sigma.values(), &f_mu);
        let r_mu: Vec<f64> = mu_expected.iter().zip(new.mu.values()).map(|(a, b)| tau * (a - b)).collect();

        let w = self.d_field(&old.phi);
        let flux = div_weighted_flux(&g, &w, &new.sigma, &old.phi, p.eta, t1)?;
        let f3 = self.forcing(|f| &f.f_sigma, t1);
        let r_sigma: Vec<f64> = (0..g.len())
            .map(|k| {
                let rhs = flux[k] - p.lambda_c * new.sigma.values()[k] * p.h(old.phi.values()[k]) + f3[k];
                if p.kappa > 0.0 {
                    new.sigma.values()[k] - old.sigma.values()[k] - tau / p.kappa * rhs
                } else {
                    tau * rhs
                }
            })
            .collect();
        Ok(WeakResiduals { phi: max_abs(r_phi), mu: max_abs(r_mu), sigma: max_abs(r_sigma) })
    }
}

fn session(state: &State, params: &ModelParams, potential: &Potential, bdata: &BoundaryData, cfg: &StepperConfig) -> Result<Stepper, SolverError> {
    Stepper::new(*state.phi.grid(), Problem::new(params.clone(), potential.clone(), bdata.clone()), *cfg)
}

/// One step of the dynamic (κ > 0) scheme.
pub fn step(state: &State, params: &ModelParams, potential: &Potential, bdata: &BoundaryData, cfg: &StepperConfig) -> Result<State, SolverError> {
    if !(params.kappa > 0.0) {
        return Err(SolverError::InvalidConfig(format!("step requires kappa > 0, got {}", params.kappa)));
    }
    session(state, params, potential, bdata, cfg)?.advance(state)
}

/// One step of the quasi-static (κ = 0) scheme.
pub fn quasistatic_step(
    state: &State,
    params: &ModelParams,
    potential: &Potential,
    bdata: &BoundaryData,
    cfg: &StepperConfig,
) -> Result<State, SolverError> {
    let p = ModelParams { kappa: 0.0, ..params.clone() };
    session(state, &p, potential, bdata, cfg)?.advance(state)
}

/// Elliptic nutrient solve `-div(D(φ)(∇σ - η∇φ)) + λ_c h(φ) σ = 0`, `σ = σ_∞(t)` on the boundary.
pub fn quasistatic_sigma_solve(phi: &Field, params: &ModelParams, bdata: &BoundaryData, t: f64, cfg: &StepperConfig) -> Result<Field, SolverError> {
    let p = ModelParams { kappa: 0.0, ..params.clone() };
    let s = Stepper::new(*phi.grid(), Problem::new(p, Potential::quartic(), bdata.clone()), *cfg)?;
    s.sigma_solve(phi, None, t)
}

/// `t + τ`, snapped to the multiple of `τ` when `t` is one, so long runs do
/// not accumulate rounding in the time stamps.
fn next_time(t: f64, tau: f64) -> f64 {
    let k = (t / tau).round();
    if (t - k * tau).abs() <= 1e-9 * tau {
        (k + 1.0) * tau
    } else {
        t + tau
    }
}
