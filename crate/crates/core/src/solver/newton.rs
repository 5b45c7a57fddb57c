//! Damped Newton iteration with an assembled sparse Jacobian.

use super::krylov::{linear_solve_from, LinearConfig};
use super::sparse::Csr;
use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub linear: LinearConfig,
    /// Compare the Jacobian against a directional finite difference at `x0`.
    pub probe_jacobian: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, linear: LinearConfig::default(), probe_jacobian: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub initial_residual: f64,
    /// Relative probe mismatch, when probed.
    pub probe_error: Option<f64>,
}

pub const PROBE_DELTA: f64 = 1e-6;
pub const PROBE_TOL: f64 = 1e-4;
const MAX_HALVINGS: usize = 20;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Relative mismatch between `J(x) v` and `(F(x + δv) - F(x)) / δ` for a fixed
/// smooth direction `v`.
pub fn jacobian_probe<F>(f: &mut F, jac: &Csr, x: &[f64], fx: &[f64]) -> f64
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let v: Vec<f64> = (0..n).map(|k| (0.7 + 1.3 * k as f64).sin() * (1.0 + 0.5 * (0.11 * k as f64).cos())).collect();
    let scale = 1.0 + norm(x) / (n as f64).sqrt();
    let d = PROBE_DELTA * scale;
    let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + d * b).collect();
    let fp = f(&xp);
    let jv = jac.matvec(&v);
    let diff: Vec<f64> = fp.iter().zip(fx).zip(&jv).map(|((a, b), j)| (a - b) / d - j).collect();
    norm(&diff) / norm(&jv).max(f64::MIN_POSITIVE)
}

/// Solves `F(x) = 0` from `x0` until `|F(x)| <= tol (1 + |F(x0)|)`, or until
/// the full Newton update is below `tol (1 + |x|_∞)` in max norm (the
/// residual can stall at rounding level before reaching its target). Each
/// Newton step is damped by halving until the residual decreases.
pub fn newton_solve<F, J>(mut f: F, mut jac: J, x0: Vec<f64>, cfg: &NewtonConfig) -> Result<NewtonOutcome, SolverError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
    J: FnMut(&[f64]) -> Csr,
{
    let mut x = x0;
    let mut fx = f(&x);
    let r0 = norm(&fx);
    if !r0.is_finite() {
        return Err(SolverError::NonConvergence { residual: r0, iters: 0 });
    }
    let target = cfg.tol * (1.0 + r0);
    let mut probe_error = None;
    let mut r = r0;
    let mut it = 0;
    while r > target {
        if it >= cfg.max_iter {
            return Err(SolverError::NonConvergence { residual: r, iters: it });
        }
        let j = jac(&x);
        if cfg.probe_jacobian && it == 0 {
            let e = jacobian_probe(&mut f, &j, &x, &fx);
            probe_error = Some(e);
            if !(e <= PROBE_TOL) {
                return Err(SolverError::JacobianMismatch { rel_error: e });
            }
        }
        let rhs: Vec<f64> = fx.iter().map(|v| -v).collect();
        let lin = LinearConfig { tol: cfg.linear.tol.min(0.1 * target / r.max(f64::MIN_POSITIVE)).max(1e-14), ..cfg.linear };
        let dx = linear_solve_from(&j, &rhs, None, &lin)
            .or_else(|_| linear_solve_from(&j, &rhs, None, &cfg.linear))?
            .x;
        if max_abs(&dx) <= cfg.tol * (1.0 + max_abs(&x)) {
            x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
            r = norm(&f(&x));
            it += 1;
            break;
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + step * b).collect();
            let ft = f(&trial);
            let rt = norm(&ft);
            if rt.is_finite() && (rt < r || rt <= target) {
                x = trial;
                fx = ft;
                r = rt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        it += 1;
        if !accepted {
            return Err(SolverError::NonConvergence { residual: r, iters: it });
        }
    }
    Ok(NewtonOutcome { x, iterations: it, residual: r, initial_residual: r0, probe_error })
}
