use std::io::Write;
use std::path::Path;

use super::ExperimentError;
use crate::diagnostics::{budget_weight, write_records, DiagnosticsRecord, EnergyMonitor};
use crate::grid::{Field, Grid};
use crate::model::config::Scenario;
use crate::solver::{Problem, State, Stepper, StepperConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Keep every time level of φ, μ, σ.
    pub keep_fields: bool,
    /// Evaluate the energy monitor every step.
    pub diagnostics: bool,
    /// Budget weight; `None` uses `max(X, 1)` for the grid.
    pub x_weight: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { keep_fields: true, diagnostics: true, x_weight: None }
    }
}

/// A completed run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: State,
    pub x_weight: f64,
    pub newton_iterations: usize,
    pub continuation_rungs: usize,
    pub dt_fallback: bool,
}

impl Trajectory {
    pub fn tau(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }

    pub fn write_diagnostics(&self, path: &Path) -> Result<(), ExperimentError> {
        let f = std::fs::File::create(path).map_err(|e| ExperimentError::io(path, e))?;
        write_records(std::io::BufWriter::new(f), &self.records).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))
    }
}

/// Steps from `(phi0, sigma0)` to `cfg.t_end`, calling `observe` on every state.
pub fn run_with(
    grid: Grid,
    problem: &Problem,
    phi0: &Field,
    sigma0: &Field,
    cfg: &StepperConfig,
    opts: RunOptions,
    mut observe: impl FnMut(&State) -> Result<(), ExperimentError>,
) -> Result<Trajectory, ExperimentError> {
    let mut stepper = Stepper::new(grid, problem.clone(), *cfg)?;
    let mut state = stepper.initial_state(phi0, sigma0)?;
    let x = match opts.x_weight {
        Some(x) => x,
        None => budget_weight(&problem.params, &grid)?,
    };
    let (mut monitor, rec0) = if opts.diagnostics {
        let (m, r) = EnergyMonitor::new(problem, x, &state)?;
        (Some(m), Some(r))
    } else {
        (None, None)
    };
    let mut t = Trajectory {
        grid,
        times: vec![state.t],
        phi: Vec::new(),
        mu: Vec::new(),
        sigma: Vec::new(),
        records: rec0.into_iter().collect(),
        final_state: state.clone(),
        x_weight: x,
        newton_iterations: 0,
        continuation_rungs: 0,
        dt_fallback: false,
    };
    let keep = |t: &mut Trajectory, s: &State| {
        if opts.keep_fields {
            t.phi.push(s.phi.values().to_vec());
            t.mu.push(s.mu.values().to_vec());
            t.sigma.push(s.sigma.values().to_vec());
        }
    };
    keep(&mut t, &state);
    observe(&state)?;
    for _ in 0..cfg.n_steps() {
        let next = stepper.advance(&state)?;
        if let Some(m) = monitor.as_mut() {
            t.records.push(m.observe(&state, &next)?);
        }
        state = next;
        t.times.push(state.t);
        keep(&mut t, &state);
        observe(&state)?;
    }
    t.dt_fallback = monitor.map(|m| m.dt_fallback).unwrap_or(false);
    t.newton_iterations = stepper.newton_iterations;
    t.continuation_rungs = stepper.continuation_rungs;
    t.final_state = state;
    Ok(t)
}

pub fn run(grid: Grid, problem: &Problem, phi0: &Field, sigma0: &Field, cfg: &StepperConfig, opts: RunOptions) -> Result<Trajectory, ExperimentError> {
    run_with(grid, problem, phi0, sigma0, cfg, opts, |_| Ok(()))
}

/// Validates the scenario, then runs it. Errors carry `label` for attribution.
pub fn run_scenario(label: &str, s: &Scenario, opts: RunOptions) -> Result<Trajectory, ExperimentError> {
    let v = s.validate();
    if !v.is_empty() {
        return Err(ExperimentError::Validation { member: label.to_string(), violations: v.iter().map(|v| v.to_string()).collect() });
    }
    run(s.grid, &s.problem(), &s.idata.phi0, &s.idata.sigma0, &s.stepper, opts).map_err(|e| e.attribute(label))
}

/// `x[, y], phi, mu, sigma` at interior nodes.
pub fn write_snapshot<W: Write>(out: W, state: &State) -> csv::Result<()> {
    let g = state.phi.grid();
    let mut w = csv::Writer::from_writer(out);
    if g.dim() == 1 {
        w.write_record(["x", "phi", "mu", "sigma"])?;
    } else {
        w.write_record(["x", "y", "phi", "mu", "sigma"])?;
    }
    for k in 0..g.len() {
        let p = g.position(k);
        let vals = [state.phi.values()[k], state.mu.values()[k], state.sigma.values()[k]];
        let mut row: Vec<String> = vec![p[0].to_string()];
        if g.dim() == 2 {
            row.push(p[1].to_string());
        }
        row.extend(vals.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

