//! Manufactured solutions and convergence rates.
//!
//! The exact solution is
//!
//! ```text
//! φ = -1 + a S e^{-t},   μ = k x + m S e^{-t},   σ = 1 + c x + b S e^{-t},
//! ```
//!
//! with `S = Π sin(π x_i)` on the unit interval or square, so `φ = -1` on the
//! boundary and `μ∞, σ∞` are the traces of `μ, σ`. Forcings are written out by
//! hand for the quartic potential and a constant diffusivity.

use sha2::{Digest, Sha256};

use super::{fit_loglog, order_check, par_map, run, Check, ExperimentError, MemberOutput, RunOptions, SweepReport};
use crate::grid::ops::l2_inner_values;
use crate::grid::{Field, Grid, Point, SpaceTimeFn};
use crate::model::config::Config;
use crate::model::{BoundaryData, Diffusivity, ModelParams};
use crate::potential::Potential;
use crate::solver::{Forcing, Problem, State, StepperConfig};

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct Manufactured {
    pub params: ModelParams,
    pub dim: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub m: f64,
    pub k: f64,
}

impl Manufactured {
    pub fn new(params: ModelParams, dim: usize) -> Self {
        Self { params, dim, a: 0.3, b: 0.3, c: 0.5, m: 0.5, k: 0.2 }
    }

    fn s(&self, p: Point) -> f64 {
        let s = (PI * p[0]).sin();
        if self.dim == 2 {
            s * (PI * p[1]).sin()
        } else {
            s
        }
    }

    /// `Δ S = -dim π² S`.
    fn lap_factor(&self) -> f64 {
        -(self.dim as f64) * PI * PI
    }

    pub fn phi(&self, p: Point, t: f64) -> f64 {
        -1.0 + self.a * self.s(p) * (-t).exp()
    }

    pub fn mu(&self, p: Point, t: f64) -> f64 {
        self.k * p[0] + self.m * self.s(p) * (-t).exp()
    }

    pub fn sigma(&self, p: Point, t: f64) -> f64 {
        1.0 + self.c * p[0] + self.b * self.s(p) * (-t).exp()
    }

    fn d(&self) -> f64 {
        match self.params.diffusivity {
            Diffusivity::Constant(d) => d,
            Diffusivity::Interpolated { .. } => panic!("manufactured solution needs a constant diffusivity"),
        }
    }

    pub fn f_phi(&self, p: Point, t: f64) -> f64 {
        let e = self.s(p) * (-t).exp();
        let q = &self.params;
        let phi_t = -self.a * e;
        let lap_mu = self.lap_factor() * self.m * e;
        phi_t - lap_mu - (q.lambda_p * self.sigma(p, t) - q.lambda_a) * q.h(self.phi(p, t))
    }

    pub fn f_mu(&self, p: Point, t: f64) -> f64 {
        let e = self.s(p) * (-t).exp();
        let q = &self.params;
        let y = self.phi(p, t);
        let psi_prime = 4.0 * y * y * y - 4.0 * y;
        let lap_phi = self.lap_factor() * self.a * e;
        self.mu(p, t) - q.gamma / q.eps * psi_prime + q.gamma * q.eps * lap_phi + q.chi * self.sigma(p, t)
    }

    pub fn f_sigma(&self, p: Point, t: f64) -> f64 {
        let e = self.s(p) * (-t).exp();
        let q = &self.params;
        let d = self.d();
        let sigma_t = -self.b * e;
        let lap_sigma = self.lap_factor() * self.b * e;
        let lap_phi = self.lap_factor() * self.a * e;
        q.kappa * sigma_t - d * lap_sigma + d * q.eta * lap_phi + q.lambda_c * self.sigma(p, t) * q.h(self.phi(p, t))
    }

    fn func(&self, f: fn(&Self, Point, f64) -> f64) -> SpaceTimeFn {
        let me = self.clone();
        SpaceTimeFn::from_closure(move |p, t| f(&me, p, t))
    }

    pub fn problem(&self) -> Problem {
        let me = self.clone();
        let bdata = BoundaryData {
            mu_inf: self.func(Self::mu),
            sigma_inf: self.func(Self::sigma),
            sigma_inf_dt: Some(SpaceTimeFn::from_closure(move |p, t| -me.b * me.s(p) * (-t).exp())),
        };
        Problem::new(self.params.clone(), Potential::quartic(), bdata).with_forcing(Forcing {
            f_phi: self.func(Self::f_phi),
            f_mu: self.func(Self::f_mu),
            f_sigma: self.func(Self::f_sigma),
        })
    }

    pub fn initial(&self, grid: Grid) -> (Field, Field) {
        let phi0 = Field::new(grid, self.func(Self::phi).sample(&grid, 0.0), SpaceTimeFn::constant(-1.0)).expect("sizes match");
        let sigma0 = Field::new(grid, self.func(Self::sigma).sample(&grid, 0.0), self.func(Self::sigma)).expect("sizes match");
        (phi0, sigma0)
    }

    /// Discrete L² errors of `(φ, μ, σ)` against the exact solution at `state.t`.
    pub fn errors(&self, state: &State) -> Result<[f64; 3], ExperimentError> {
        let g = *state.phi.grid();
        let t = state.t;
        let err = |f: fn(&Self, Point, f64) -> f64, v: &[f64]| -> Result<f64, ExperimentError> {
            let d: Vec<f64> = (0..g.len()).map(|i| v[i] - f(self, g.position(i), t)).collect();
            Ok(l2_inner_values(&g, &d, &d)?.sqrt())
        };
        Ok([err(Self::phi, state.phi.values())?, err(Self::mu, state.mu.values())?, err(Self::sigma, state.sigma.values())?])
    }

    pub fn run(&self, cells: usize, tau: f64, t_end: f64, diagnostics: bool) -> Result<super::Trajectory, ExperimentError> {
        let grid = Grid::unit(self.dim, cells - 1)?;
        let (phi0, sigma0) = self.initial(grid);
        let cfg = StepperConfig { tau, t_end, ..StepperConfig::default() };
        let opts = RunOptions { keep_fields: false, diagnostics, x_weight: None };
        run(grid, &self.problem(), &phi0, &sigma0, &cfg, opts)
    }
}

/// Ladders for the spatial and temporal studies.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsSpec {
    pub solution: Manufactured,
    /// Cells per axis; the mesh size is `1 / cells`.
    pub space_cells: Vec<usize>,
    /// `τ = tau_factor h²` on the spatial ladder.
    pub tau_factor: f64,
    pub space_t_end: f64,
    pub time_cells: usize,
    pub time_taus: Vec<f64>,
    pub time_t_end: f64,
    pub config_hash: String,
}

impl MmsSpec {
    pub fn new(params: ModelParams, dim: usize) -> Self {
        let solution = Manufactured::new(params, dim);
        let config_hash = hex::encode(Sha256::digest(format!("{solution:?}").as_bytes()));
        Self {
            solution,
            space_cells: vec![32, 64, 128],
            tau_factor: 1.0,
            space_t_end: 0.0625,
            time_cells: 256,
            time_taus: vec![0.02, 0.01, 0.005],
            time_t_end: 0.2,
            config_hash,
        }
    }

    /// Coefficients from `config`; the diffusivity is frozen at `d0`.
    pub fn from_config(config: &Config) -> Self {
        let mut params = config.model_params();
        params.diffusivity = Diffusivity::Constant(config.params.d0);
        Self { config_hash: config.hash(), ..Self::new(params, config.grid.dim) }
    }
}

/// Runs both ladders and fits the observed orders of the φ error.
pub fn mms_convergence(spec: &MmsSpec, jobs: usize) -> Result<SweepReport, ExperimentError> {
    let sol = &spec.solution;
    let mut members: Vec<(usize, usize, f64, f64)> = Vec::new();
    for &n in &spec.space_cells {
        let h = 1.0 / n as f64;
        let steps = (spec.space_t_end / (spec.tau_factor * h * h)).round().max(1.0);
        members.push((0, n, spec.space_t_end / steps, spec.space_t_end));
    }
    for &tau in &spec.time_taus {
        members.push((1, spec.time_cells, tau, spec.time_t_end));
    }
    super::check_ladder(&spec.space_cells.iter().map(|&n| n as f64).collect::<Vec<_>>())?;
    super::check_ladder(&spec.time_taus)?;
    let runs = par_map(jobs, &members, |&(_, n, tau, t_end)| {
        let t = sol.run(n, tau, t_end, false)?;
        let e = sol.errors(&t.final_state)?;
        Ok((t, e))
    })?;

    let mut report = SweepReport::new("mms", spec.config_hash.clone(), &["ladder", "h", "tau", "err_phi", "err_mu", "err_sigma"]);
    for (i, (t, e)) in runs.iter().enumerate() {
        let (l, n, tau, _) = members[i];
        report.rows.push(vec![l as f64, 1.0 / n as f64, tau, e[0], e[1], e[2]]);
        let label = if l == 0 { format!("space_h_1_{n}") } else { format!("time_tau_{tau}") };
        report.members.push(MemberOutput::new(label, None, t));
    }
    let ns = spec.space_cells.len();
    let pick = |range: std::ops::Range<usize>, x: usize, y: usize| -> (Vec<f64>, Vec<f64>) {
        (report.rows[range.clone()].iter().map(|r| r[x]).collect(), report.rows[range].iter().map(|r| r[y]).collect())
    };
    let (h, e) = pick(0..ns, 1, 3);
    let space = fit_loglog(&h, &e);
    let (tau, e) = pick(ns..report.rows.len(), 2, 3);
    let time = fit_loglog(&tau, &e);
    report.checks.push(order_check("spatial order (tau ~ h^2)", &space, 2.0, 0.2));
    report.checks.push(order_check("temporal order", &time, 1.0, 0.2));
    for (name, col) in [("mu", 4), ("sigma", 5)] {
        let (h, e) = pick(0..ns, 1, col);
        let (tau, et) = pick(ns..report.rows.len(), 2, col);
        report.notes.push(format!(
            "{name}: spatial order {:.3}, temporal order {:.3}",
            fit_loglog(&h, &e).slope,
            fit_loglog(&tau, &et).slope
        ));
    }
    Ok(report)
}

/// Acceptable band for the ratio of identity residuals under τ-halving.
pub const IDENTITY_RATIO_BAND: (f64, f64) = (1.7, 2.3);

/// Cumulative energy-identity residual at `t_end` for each `τ`; halving `τ`
/// must roughly halve it.
pub fn identity_convergence(sol: &Manufactured, cells: usize, taus: &[f64], t_end: f64, jobs: usize) -> Result<SweepReport, ExperimentError> {
    super::check_ladder(taus)?;
    let runs = par_map(jobs, taus, |&tau| sol.run(cells, tau, t_end, true))?;
    let hash = hex::encode(Sha256::digest(format!("{sol:?}").as_bytes()));
    let mut report = SweepReport::new("identity", hash, &["tau", "residual", "ratio"]);
    let res: Vec<f64> = runs.iter().map(|t| t.records.last().map(|r| r.identity_residual).unwrap_or(f64::NAN)).collect();
    for (i, t) in runs.iter().enumerate() {
        let ratio = if i == 0 { f64::NAN } else { res[i - 1] / res[i] };
        report.rows.push(vec![taus[i], res[i], ratio]);
        report.members.push(MemberOutput::new(format!("tau_{}", taus[i]), None, t));
        if i > 0 {
            let (lo, hi) = IDENTITY_RATIO_BAND;
            report.checks.push(Check::new(
                &format!("residual ratio tau {} -> {}", taus[i - 1], taus[i]),
                ratio >= lo && ratio <= hi,
                format!("{ratio:.4} in [{lo}, {hi}]"),
            ));
        }
    }
    Ok(report)
}

/// Largest nodal error after ten steps for the exact discrete steady state
/// `φ = -1, μ = 0.3 x, σ = 1 + x`.
pub fn mms_stationary_error(params: &ModelParams, dim: usize, n: usize) -> Result<f64, ExperimentError> {
    let grid = Grid::unit(dim, n)?;
    let q = params.clone();
    let mu = SpaceTimeFn::from_closure(|p, _| 0.3 * p[0]);
    let sigma = SpaceTimeFn::from_closure(|p, _| 1.0 + p[0]);
    let bdata = BoundaryData { mu_inf: mu.clone(), sigma_inf: sigma.clone(), sigma_inf_dt: Some(SpaceTimeFn::constant(0.0)) };
    let forcing = Forcing {
        f_phi: SpaceTimeFn::constant(0.0),
        f_mu: SpaceTimeFn::from_closure(move |p, _| 0.3 * p[0] + q.chi * (1.0 + p[0])),
        f_sigma: SpaceTimeFn::constant(0.0),
    };
    let problem = Problem::new(params.clone(), Potential::quartic(), bdata).with_forcing(forcing);
    let phi0 = Field::constant(grid, -1.0);
    let sigma0 = Field::sampled(grid, &sigma, 0.0);
    let cfg = StepperConfig { tau: 1e-2, t_end: 0.1, ..StepperConfig::default() };
    let t = run(grid, &problem, &phi0, &sigma0, &cfg, RunOptions { keep_fields: false, diagnostics: false, x_weight: None })?;
    let s = &t.final_state;
    let mut worst = 0.0f64;
    for i in 0..grid.len() {
        let p = grid.position(i);
        worst = worst.max((s.phi.values()[i] + 1.0).abs());
        worst = worst.max((s.mu.values()[i] - mu.eval(p, s.t)).abs());
        worst = worst.max((s.sigma.values()[i] - sigma.eval(p, s.t)).abs());
    }
    Ok(worst)
}
