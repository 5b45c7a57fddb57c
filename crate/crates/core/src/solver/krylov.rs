//! Preconditioned conjugate gradients and BiCGSTAB.

use super::sparse::{Csr, Ilu0, Preconditioner};
use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearConfig {
    /// Relative residual target `|b - Ax| <= tol |b|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    /// Squared `A`-norm of the error per CG iteration; filled only by [`cg_with_history`].
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(a: &Csr, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.matvec(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

/// CG for symmetric operators with a Jacobi preconditioner.
pub fn cg(a: &Csr, b: &[f64], x0: Option<&[f64]>, cfg: &LinearConfig) -> Result<LinearOutcome, SolverError> {
    cg_impl(a, b, x0, cfg, false)
}

/// [`cg`] that also fills `history` with the squared energy norm `e^T A e`
/// of the error per iteration, measured against the final iterate.
pub fn cg_with_history(a: &Csr, b: &[f64], x0: Option<&[f64]>, cfg: &LinearConfig) -> Result<LinearOutcome, SolverError> {
    cg_impl(a, b, x0, cfg, true)
}

fn cg_impl(a: &Csr, b: &[f64], x0: Option<&[f64]>, cfg: &LinearConfig, keep: bool) -> Result<LinearOutcome, SolverError> {
    let n = a.n();
    let pre = Preconditioner::jacobi(a);
    let bnorm = norm(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    if bnorm == 0.0 && x.iter().all(|v| *v == 0.0) {
        return Ok(LinearOutcome { x, iterations: 0, relative_residual: 0.0, history: vec![] });
    }
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut r = residual(a, &x, b);
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterates = if keep { vec![x.clone()] } else { Vec::new() };
    let mut rel = norm(&r) / scale;
    let mut it = 0;
    while rel > cfg.tol {
        if it >= cfg.max_iter {
            return Err(SolverError::MaxIters { residual: rel, iters: it });
        }
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolverError::Breakdown { residual: rel, iters: it });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        rel = norm(&r) / scale;
        it += 1;
        if keep {
            iterates.push(x.clone());
        }
    }
    let history = iterates
        .iter()
        .map(|xi| {
            let e: Vec<f64> = xi.iter().zip(&x).map(|(u, v)| u - v).collect();
            dot(&e, &a.matvec(&e))
        })
        .collect();
    Ok(LinearOutcome { x, iterations: it, relative_residual: rel, history })
}

/// BiCGSTAB with ILU(0) right preconditioning, falling back to Jacobi when
/// the factorisation breaks down.
pub fn bicgstab(a: &Csr, b: &[f64], x0: Option<&[f64]>, cfg: &LinearConfig) -> Result<LinearOutcome, SolverError> {
    let n = a.n();
    let pre = match Ilu0::new(a) {
        Some(ilu) => Preconditioner::Ilu0(ilu),
        None => Preconditioner::jacobi(a),
    };
    let bnorm = norm(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    if bnorm == 0.0 && x.iter().all(|v| *v == 0.0) {
        return Ok(LinearOutcome { x, iterations: 0, relative_residual: 0.0, history: vec![] });
    }
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut r = residual(a, &x, b);
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut zs = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut rel = norm(&r) / scale;
    let mut it = 0;
    while rel > cfg.tol {
        if it >= cfg.max_iter {
            return Err(SolverError::MaxIters { residual: rel, iters: it });
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return stalled(a, x, b, scale, it);
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        pre.apply(&p, &mut y);
        a.matvec_into(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            return stalled(a, x, b, scale, it);
        }
        alpha = rho / rv;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        if norm(&s) / scale <= cfg.tol {
            for k in 0..n {
                x[k] += alpha * y[k];
            }
            it += 1;
            r = residual(a, &x, b);
            rel = norm(&r) / scale;
            if rel <= cfg.tol {
                break;
            }
            continue;
        }
        pre.apply(&s, &mut zs);
        a.matvec_into(&zs, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return stalled(a, x, b, scale, it);
        }
        omega = dot(&t, &s) / tt;
        for k in 0..n {
            x[k] += alpha * y[k] + omega * zs[k];
            r[k] = s[k] - omega * t[k];
        }
        rel = norm(&r) / scale;
        it += 1;
        if !rel.is_finite() {
            return Err(SolverError::Breakdown { residual: rel, iters: it });
        }
    }
    // guard against drift of the recursive residual
    let true_rel = norm(&residual(a, &x, b)) / scale;
    if true_rel > STALL_ACCEPT && true_rel > 10.0 * cfg.tol && true_rel > rel * 100.0 {
        return Err(SolverError::Breakdown { residual: true_rel, iters: it });
    }
    Ok(LinearOutcome { x, iterations: it, relative_residual: true_rel, history: vec![] })
}

/// Largest relative residual accepted when BiCGSTAB stalls at rounding level.
pub const STALL_ACCEPT: f64 = 1e-8;

/// A breakdown after the residual has reached rounding level is a stall, not
/// a failure: return the iterate if its true residual is below [`STALL_ACCEPT`].
fn stalled(a: &Csr, x: Vec<f64>, b: &[f64], scale: f64, it: usize) -> Result<LinearOutcome, SolverError> {
    let rel = norm(&residual(a, &x, b)) / scale;
    if rel <= STALL_ACCEPT {
        Ok(LinearOutcome { x, iterations: it, relative_residual: rel, history: vec![] })
    } else {
        Err(SolverError::Breakdown { residual: rel, iters: it })
    }
}

/// CG when `a.symmetric`, BiCGSTAB otherwise.
pub fn linear_solve(a: &Csr, b: &[f64], cfg: &LinearConfig) -> Result<LinearOutcome, SolverError> {
    linear_solve_from(a, b, None, cfg)
}

pub fn linear_solve_from(a: &Csr, b: &[f64], x0: Option<&[f64]>, cfg: &LinearConfig) -> Result<LinearOutcome, SolverError> {
    if a.symmetric {
        cg(a, b, x0, cfg)
    } else {
        bicgstab(a, b, x0, cfg)
    }
}
