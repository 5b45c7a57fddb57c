//! Continuous dependence on the data.
//!
//! A baseline run is compared with runs whose data are shifted by `δ` times
//! fixed directions: `sin`-bump for φ0, constants for σ0 and μ∞, and
//! `1 + x` for σ∞. The ratio `R(δ)` of the measured difference norms to the
//! data norms must stay below one cap over the whole ladder.

use super::{par_map, run_scenario, Check, ExperimentError, MemberOutput, RunOptions, SweepReport, SweepSpec, Trajectory, SAFETY_FACTOR};
use crate::grid::ops::{gradient_sq_integral, l2_inner_values};
use crate::grid::{Field, Grid, SpaceTimeFn};
use crate::model::config::{Config, Scalar};
use crate::model::{validate_ctsdep, Mode};
use crate::solver::star_norm;

/// Which data are perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Perturbation {
    pub phi0: bool,
    pub sigma0: bool,
    pub mu_inf: bool,
    pub sigma_inf: bool,
}

impl Perturbation {
    /// Every datum the estimate for `mode` controls.
    pub fn default_for(mode: Mode) -> Self {
        match mode {
            Mode::Dynamic => Self { phi0: true, sigma0: true, mu_inf: true, sigma_inf: true },
            Mode::QuasiStatic => Self { phi0: true, sigma0: false, mu_inf: true, sigma_inf: true },
            Mode::Singular => Self { phi0: true, sigma0: true, mu_inf: false, sigma_inf: true },
        }
    }
}

fn shifted(s: &Scalar, term: &str) -> Scalar {
    let orig = match s {
        Scalar::Number(v) => format!("{v}"),
        Scalar::Expr(e) => e.clone(),
    };
    Scalar::Expr(format!("({orig}) + {term}"))
}

fn bump(c: &Config) -> String {
    let e = &c.grid.extent;
    if c.grid.dim == 2 {
        format!("sin(pi*x/{})*sin(pi*y/{})", e[0], e[1])
    } else {
        format!("sin(pi*x/{})", e[0])
    }
}

fn perturbed(base: &Config, p: Perturbation, delta: f64) -> Config {
    let mut c = base.clone();
    let d = format!("{delta}");
    if p.phi0 {
        c.initial.phi0 = shifted(&c.initial.phi0, &format!("{d}*{}", bump(base)));
    }
    if p.sigma0 {
        c.initial.sigma0 = shifted(&c.initial.sigma0, &d);
    }
    if p.mu_inf {
        c.boundary.mu_inf = shifted(&c.boundary.mu_inf, &d);
    }
    if p.sigma_inf {
        c.boundary.sigma_inf = shifted(&c.boundary.sigma_inf, &format!("{d}*(1 + x)"));
        if let Some(dt) = &c.boundary.sigma_inf_dt {
            c.boundary.sigma_inf_dt = Some(shifted(dt, "0"));
        }
    }
    c
}

/// Squared data norms of the unit perturbation, in the order
/// `|φ0|², |φ0|²_*, |σ0|², |μ∞|²_H1, |σ∞|²_H1, |σ∞|²_L2`.
fn data_norms(g: &Grid, base: &Config, p: Perturbation) -> Result<[f64; 6], ExperimentError> {
    let on = |b: bool| if b { 1.0 } else { 0.0 };
    let s = crate::model::expr::Expr::parse(&bump(base)).map_err(|e| ExperimentError::InvalidSpec(e.to_string()))?;
    let s = SpaceTimeFn::from_expr(s).sample(g, 0.0);
    let phi_l2 = l2_inner_values(g, &s, &s)?;
    let phi_star = star_norm(&s, g)?.powi(2);
    let one = vec![1.0; g.len()];
    let vol = l2_inner_values(g, &one, &one)?;
    let lin = SpaceTimeFn::from_closure(|p, _| 1.0 + p[0]);
    let lf = Field::sampled(*g, &lin, 0.0);
    let lin_l2 = l2_inner_values(g, lf.values(), lf.values())?;
    let lin_h1 = lin_l2 + gradient_sq_integral(g, &lf, 0.0)?;
    Ok([on(p.phi0) * phi_l2, on(p.phi0) * phi_star, on(p.sigma0) * vol, on(p.mu_inf) * vol, on(p.sigma_inf) * lin_h1, on(p.sigma_inf) * lin_l2])
}

/// Left side of the estimate for `mode`.
fn difference_norm(mode: Mode, kappa: f64, a: &Trajectory, b: &Trajectory, sigma_inf_shift: SpaceTimeFn) -> Result<f64, ExperimentError> {
    let g = a.grid;
    let zero = SpaceTimeFn::constant(0.0);
    let (mut sup, mut mu, mut sigma, mut phi) = (0.0f64, 0.0, 0.0, 0.0);
    for k in 0..a.times.len() {
        let t = a.times[k];
        let dphi: Vec<f64> = a.phi[k].iter().zip(&b.phi[k]).map(|(x, y)| x - y).collect();
        let dsig: Vec<f64> = a.sigma[k].iter().zip(&b.sigma[k]).map(|(x, y)| x - y).collect();
        let sig_l2 = l2_inner_values(&g, &dsig, &dsig)?;
        let phi_sq = match mode {
            Mode::Singular => star_norm(&dphi, &g)?.powi(2),
            _ => l2_inner_values(&g, &dphi, &dphi)?,
        };
        sup = sup.max(phi_sq + if mode == Mode::QuasiStatic { 0.0 } else { kappa * sig_l2 });
        if k == 0 {
            continue;
        }
        let tau = t - a.times[k - 1];
        if mode != Mode::Singular {
            let dmu: Vec<f64> = a.mu[k].iter().zip(&b.mu[k]).map(|(x, y)| x - y).collect();
            mu += tau * l2_inner_values(&g, &dmu, &dmu)?;
        }
        let sf = Field::new(g, dsig, sigma_inf_shift.clone())?;
        sigma += tau * (sig_l2 + gradient_sq_integral(&g, &sf, t)?);
        let pl2 = l2_inner_values(&g, &dphi, &dphi)?;
        let pf = Field::new(g, dphi, zero.clone())?;
        phi += tau * (pl2 + gradient_sq_integral(&g, &pf, t)?);
    }
    Ok(sup + mu + sigma + phi)
}

/// Right side of the estimate for `mode` at perturbation size `delta`.
fn data_bound(mode: Mode, kappa: f64, t_end: f64, n: &[f64; 6], delta: f64) -> f64 {
    let d2 = delta * delta;
    let [phi_l2, phi_star, sigma0, mu_h1, sinf_h1, sinf_l2] = *n;
    d2 * match mode {
        Mode::Dynamic => phi_l2 + t_end * (mu_h1 + sinf_h1) + kappa * (sinf_l2 + sigma0),
        Mode::QuasiStatic => phi_l2 + t_end * (mu_h1 + sinf_h1),
        // the σ∞ shift is time independent, so its H¹(0,T;L²) norm is T|.|²
        Mode::Singular => phi_star + t_end * sinf_h1 + kappa * kappa * t_end * sinf_l2 + kappa * (sinf_l2 + sigma0),
    }
}

/// Runs the continuous-dependence ladder in `mode`. Without `r_cap` the cap
/// is calibrated on the largest `δ` with [`SAFETY_FACTOR`].
pub fn continuous_dependence(spec: &SweepSpec, mode: Mode, perturb: Perturbation, r_cap: Option<f64>) -> Result<SweepReport, ExperimentError> {
    let ladder = spec.descending()?;
    let mut base = spec.base.clone();
    base.mode.kind = mode;
    if mode == Mode::QuasiStatic {
        base.params.kappa = 0.0;
    }
    if mode == Mode::Singular && perturb.mu_inf {
        return Err(ExperimentError::Precondition(
            "singular continuous dependence requires identical mu_inf for both solutions".into(),
        ));
    }
    if mode == Mode::QuasiStatic && perturb.sigma0 {
        return Err(ExperimentError::Precondition("sigma0 is not a datum of the quasi-static problem".into()));
    }
    if mode != Mode::Singular {
        let v = validate_ctsdep(&base.model_params(), &base.potential());
        if !v.is_empty() {
            return Err(ExperimentError::Precondition(v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")));
        }
    }

    let mut members: Vec<(String, Config)> = vec![("baseline".into(), base.clone()), ("delta_0".into(), perturbed(&base, perturb, 0.0))];
    members.extend(ladder.iter().map(|&d| (format!("delta_{d}"), perturbed(&base, perturb, d))));
    let runs = par_map(spec.jobs, &members, |(label, c)| run_scenario(label, &c.resolve()?, RunOptions::default()))?;

    let g = runs[0].grid;
    let kappa = base.params.kappa;
    let t_end = base.time.t_end;
    let norms = data_norms(&g, &base, perturb)?;
    let mut report = SweepReport::new(&format!("ctsdep_{}", mode.name()), base.hash(), &["delta", "lhs", "rhs", "ratio"]);

    let baseline = &runs[0];
    let zero_run = &runs[1];
    let identical = baseline.phi == zero_run.phi && baseline.mu == zero_run.mu && baseline.sigma == zero_run.sigma;
    report.checks.push(Check::new("delta = 0 reproduces the baseline bit for bit", identical, ""));

    let mut ratios = Vec::new();
    for (i, &d) in ladder.iter().enumerate() {
        let shift = if perturb.sigma_inf { SpaceTimeFn::from_closure(move |p, _| d * (1.0 + p[0])) } else { SpaceTimeFn::constant(0.0) };
        let lhs = difference_norm(mode, kappa, &runs[i + 2], baseline, shift)?;
        let rhs = data_bound(mode, kappa, t_end, &norms, d);
        ratios.push(lhs / rhs);
        report.rows.push(vec![d, lhs, rhs, lhs / rhs]);
    }
    let cap = match r_cap {
        Some(c) => c,
        None => {
            let c = SAFETY_FACTOR * ratios[0];
            report.notes.push(format!("R_cap = {c:.6e} calibrated on delta = {} with safety factor {SAFETY_FACTOR}", ladder[0]));
            c
        }
    };
    report.cap = Some(cap);
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    report.checks.push(Check::new("R(delta) <= R_cap", worst.is_finite() && worst <= cap, format!("max R {worst:.4e}, R_cap {cap:.4e}")));
    for (i, r) in runs.iter().enumerate() {
        report.members.push(MemberOutput::new(&members[i].0, Some(&members[i].1), r));
    }
    Ok(report)
}
