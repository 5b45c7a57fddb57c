//! Problem definition: physical constants, coefficient functions, boundary
//! and initial data, and numerical checks of the standing assumptions
//! (A1)–(A4), (C1)–(C3) and (S1)–(S3).

pub mod config;
pub mod expr;

use crate::grid::{Field, Grid, GridError, Point, SpaceTimeFn};
use crate::potential::{Potential, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// κ > 0 with a regular potential.
    Dynamic,
    /// κ = 0: the nutrient equation is elliptic.
    QuasiStatic,
    /// κ > 0 with a Yosida-regularised obstacle potential.
    Singular,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Dynamic => "dynamic",
            Mode::QuasiStatic => "quasistatic",
            Mode::Singular => "singular",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dynamic" => Ok(Mode::Dynamic),
            "quasistatic" | "quasi_static" => Ok(Mode::QuasiStatic),
            "singular" => Ok(Mode::Singular),
            other => Err(format!("unknown mode '{other}' (expected dynamic, quasistatic or singular)")),
        }
    }
}

/// Default interpolation `clamp((1 + y)/2, 0, 1)`.
pub fn default_h(y: f64) -> f64 {
    (0.5 * (1.0 + y)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interpolation {
    /// `clamp((1 + y)/2, 0, 1)`.
    ClampedLinear,
    /// `(1 + y)/2` without clamping; unbounded, so it fails (A2).
    Linear,
}

impl Interpolation {
    pub fn eval(self, y: f64) -> f64 {
        match self {
            Interpolation::ClampedLinear => default_h(y),
            Interpolation::Linear => 0.5 * (1.0 + y),
        }
    }

    pub fn lipschitz(self) -> f64 {
        0.5
    }

    pub fn sup(self) -> f64 {
        match self {
            Interpolation::ClampedLinear => 1.0,
            Interpolation::Linear => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diffusivity {
    Constant(f64),
    /// `healthy + (tumor - healthy) h(y)` with the default `h`.
    Interpolated { healthy: f64, tumor: f64 },
}

impl Diffusivity {
    pub fn eval(self, y: f64) -> f64 {
        match self {
            Diffusivity::Constant(d) => d,
            Diffusivity::Interpolated { healthy, tumor } => healthy + (tumor - healthy) * default_h(y),
        }
    }

    /// `(D0, D1)`.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Diffusivity::Constant(d) => (d, d),
            Diffusivity::Interpolated { healthy, tumor } => (healthy.min(tumor), healthy.max(tumor)),
        }
    }

    pub fn is_constant(self) -> bool {
        matches!(self, Diffusivity::Constant(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub gamma: f64,
    pub eps: f64,
    pub kappa: f64,
    pub lambda_p: f64,
    pub lambda_a: f64,
    pub lambda_c: f64,
    pub chi: f64,
    pub eta: f64,
    pub diffusivity: Diffusivity,
    pub h: Interpolation,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            eps: 0.05,
            kappa: 1.0,
            lambda_p: 2.0,
            lambda_a: 0.5,
            lambda_c: 1.0,
            chi: 1.0,
            eta: 0.2,
            diffusivity: Diffusivity::Constant(1.0),
            h: Interpolation::ClampedLinear,
        }
    }
}

impl ModelParams {
    /// All source and coupling coefficients switched off.
    pub fn source_free(gamma: f64, eps: f64, kappa: f64) -> Self {
        Self { gamma, eps, kappa, lambda_p: 0.0, lambda_a: 0.0, lambda_c: 0.0, chi: 0.0, eta: 0.0, ..Self::default() }
    }

    pub fn h(&self, y: f64) -> f64 {
        self.h.eval(y)
    }

    pub fn d(&self, y: f64) -> f64 {
        self.diffusivity.eval(y)
    }

    pub fn d_bounds(&self) -> (f64, f64) {
        self.diffusivity.bounds()
    }

    pub fn h_sup(&self) -> f64 {
        self.h.sup()
    }
}

/// Dirichlet data `μ_∞`, `σ_∞`; the same functions serve as their extensions into the domain.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub mu_inf: SpaceTimeFn,
    pub sigma_inf: SpaceTimeFn,
    /// Explicit `∂_t σ_∞`; when absent the analytic derivative of `sigma_inf` is used if known.
    pub sigma_inf_dt: Option<SpaceTimeFn>,
}

impl BoundaryData {
    pub fn constant(mu_inf: f64, sigma_inf: f64) -> Self {
        Self { mu_inf: mu_inf.into(), sigma_inf: sigma_inf.into(), sigma_inf_dt: None }
    }

    /// `∂_t σ_∞(p, t)` and whether it was analytic. Falls back to a centred
    /// difference with step `tau / 100`.
    pub fn sigma_dt(&self, p: Point, t: f64, tau: f64) -> (f64, bool) {
        if let Some(d) = &self.sigma_inf_dt {
            return (d.eval(p, t), true);
        }
        if let Some(v) = self.sigma_inf.dt(p, t) {
            return (v, true);
        }
        let d = tau / 100.0;
        ((self.sigma_inf.eval(p, t + d) - self.sigma_inf.eval(p, t - d)) / (2.0 * d), false)
    }

    pub fn sigma_dt_is_analytic(&self) -> bool {
        self.sigma_inf_dt.is_some() || self.sigma_inf.has_analytic_dt()
    }
}

#[derive(Debug, Clone)]
pub struct InitialData {
    /// Order parameter with trace `-1`.
    pub phi0: Field,
    /// Nutrient with trace `σ_∞(·, 0)`.
    pub sigma0: Field,
    /// The function `φ0` was sampled from, kept to check its boundary values.
    pub phi0_source: Option<SpaceTimeFn>,
}

impl InitialData {
    pub fn from_fns(grid: Grid, phi0: &SpaceTimeFn, sigma0: &SpaceTimeFn, bdata: &BoundaryData) -> Result<Self, GridError> {
        let phi = Field::new(grid, phi0.sample(&grid, 0.0), (-1.0).into())?;
        let sigma = Field::new(grid, sigma0.sample(&grid, 0.0), bdata.sigma_inf.clone())?;
        Ok(Self { phi0: phi, sigma0: sigma, phi0_source: Some(phi0.clone()) })
    }
}

fn nonneg(label: &str, name: &str, v: f64, out: &mut Vec<Violation>) {
    if !(v.is_finite() && v >= 0.0) {
        out.push(Violation::new(label, format!("{name} = {v} must be a finite non-negative constant")));
    }
}

fn positive(label: &str, name: &str, v: f64, out: &mut Vec<Violation>) {
    if !(v.is_finite() && v > 0.0) {
        out.push(Violation::new(label, format!("{name} = {v} must be a finite positive constant")));
    }
}

fn sample_line(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| -10.0 + 20.0 * k as f64 / (n - 1) as f64)
}

/// Checks (A1), (A2) for the coefficients alone.
pub fn validate_params(params: &ModelParams, mode: Mode) -> Vec<Violation> {
    let mut out = Vec::new();
    positive("(A1)", "gamma", params.gamma, &mut out);
    positive("(A1)", "eps", params.eps, &mut out);
    match mode {
        Mode::QuasiStatic => {
            if params.kappa != 0.0 {
                out.push(Violation::new("(A1)", format!("quasi-static mode requires kappa = 0, got {}", params.kappa)));
            }
        }
        Mode::Dynamic | Mode::Singular => positive("(A1)", "kappa", params.kappa, &mut out),
    }
    nonneg("(A1)", "lambda_p", params.lambda_p, &mut out);
    nonneg("(A1)", "lambda_a", params.lambda_a, &mut out);
    nonneg("(A1)", "lambda_c", params.lambda_c, &mut out);
    nonneg("(A1)", "chi", params.chi, &mut out);
    nonneg("(A1)", "eta", params.eta, &mut out);

    let (d0, d1) = params.d_bounds();
    if !(d0 > 0.0 && d1.is_finite()) {
        out.push(Violation::new("(A2)", format!("diffusivity bounds must satisfy 0 < D0 <= D1 < inf, got D0 = {d0}, D1 = {d1}")));
    } else if let Some(y) = sample_line(10_000).find(|&y| {
        let d = params.d(y);
        !(d >= d0 && d <= d1)
    }) {
        out.push(Violation::new("(A2)", format!("D({y}) = {} outside [{d0}, {d1}]", params.d(y))));
    }
    let h_inf = params.h_sup();
    if let Some(y) = sample_line(10_000).find(|&y| {
        let h = params.h(y);
        !(h >= 0.0 && h <= h_inf && h_inf.is_finite())
    }) {
        out.push(Violation::new("(A2)", format!("h({y}) = {} violates 0 <= h <= h_inf = {h_inf}", params.h(y))));
    }
    out
}

/// Checks every standing assumption for the given mode. Violations are data:
/// the returned list is empty iff the configuration is admissible.
pub fn validate_model(
    params: &ModelParams,
    potential: &Potential,
    bdata: &BoundaryData,
    idata: &InitialData,
    mode: Mode,
    t_end: f64,
) -> Vec<Violation> {
    let mut out = validate_params(params, mode);

    match (mode, potential.is_singular()) {
        (Mode::Singular, false) => out.push(Violation::new("(S1)", "singular mode requires an obstacle potential")),
        (Mode::Dynamic | Mode::QuasiStatic, true) => {
            out.push(Violation::new("(A3)", format!("{} mode requires a regular potential", mode.name())))
        }
        _ => {}
    }
    out.extend(potential.validate());

    // (A4): initial data
    let grid = *idata.phi0.grid();
    if idata.phi0.trace().as_constant() != Some(-1.0) {
        out.push(Violation::new("(A4)", "phi0 must carry the Dirichlet trace -1"));
    }
    if let Some(src) = &idata.phi0_source {
        let worst = grid
            .boundary_positions()
            .into_iter()
            .map(|p| (src.eval(p, 0.0) + 1.0).abs())
            .fold(0.0, f64::max);
        if !(worst <= 1e-8) {
            out.push(Violation::new("(A4)", format!("phi0 is incompatible with phi = -1 on the boundary (max mismatch {worst:e})")));
        }
    }
    let psi_int: f64 = idata.phi0.values().iter().map(|&y| potential.psi(y)).sum::<f64>() * grid.cell_volume();
    if !psi_int.is_finite() {
        out.push(Violation::new("(A4)", "Ψ(phi0) is not integrable"));
    }
    if mode == Mode::Singular {
        if let Some(s) = potential.as_singular() {
            if let Some((k, &y)) = idata.phi0.values().iter().enumerate().find(|(_, &y)| y < s.lo || y > s.hi) {
                out.push(Violation::new(
                    "(S3)",
                    format!("β̂(phi0) is infinite: phi0 = {y} at node {k} lies outside [{}, {}]", s.lo, s.hi),
                ));
            }
        }
    }

    // (A4): boundary data evaluable and finite on [0, T]
    let boundary = grid.boundary_positions();
    let interior = grid.positions();
    let times: Vec<f64> = (0..=16).map(|k| t_end * k as f64 / 16.0).collect();
    'outer: for &t in &times {
        for p in boundary.iter().chain(&interior) {
            let vals = [bdata.mu_inf.eval(*p, t), bdata.sigma_inf.eval(*p, t), bdata.sigma_dt(*p, t, t_end / 1000.0).0];
            if vals.iter().any(|v| !v.is_finite()) {
                out.push(Violation::new("(A4)", format!("boundary data not finite at {p:?}, t = {t}")));
                break 'outer;
            }
        }
    }
    out
}

/// (C1)–(C3), required by the continuous-dependence experiments.
pub fn validate_ctsdep(params: &ModelParams, potential: &Potential) -> Vec<Violation> {
    let mut out = Vec::new();
    if !params.diffusivity.is_constant() {
        out.push(Violation::new("(C1)", "continuous dependence requires a constant diffusivity D = D0"));
    }
    let lh = params.h.lipschitz();
    let mut a = -3.0;
    while a <= 3.0 {
        let b = a * 0.37 + 0.11;
        if (params.h(a) - params.h(b)).abs() > lh * (a - b).abs() * (1.0 + 1e-12) {
            out.push(Violation::new("(C2)", format!("h is not Lipschitz with constant {lh} near {a}")));
            break;
        }
        a += 0.01;
    }
    if let Potential::Regular(r) = potential {
        let k3 = r.lipschitz_k3;
        let pts: Vec<f64> = (0..201).map(|k| -5.0 + 0.05 * k as f64).collect();
        'c3: for &s1 in &pts {
            for &s2 in pts.iter().step_by(7) {
                let lhs = (potential.psi_prime(s1) - potential.psi_prime(s2)).abs();
                let rhs = k3 * (1.0 + s1.powi(4) + s2.powi(4)) * (s1 - s2).abs();
                if lhs > rhs * (1.0 + 1e-12) + 1e-12 {
                    out.push(Violation::new("(C3)", format!("Ψ' local Lipschitz bound with k3 = {k3} fails at ({s1}, {s2})")));
                    break 'c3;
                }
            }
        }
    }
    out
}

/// Nodewise `((λ_p σ - λ_a) h(φ), -λ_c σ h(φ))`.
pub fn eval_sources(params: &ModelParams, phi: &Field, sigma: &Field) -> Result<(Vec<f64>, Vec<f64>), GridError> {
    if !phi.same_grid(sigma) {
        return Err(GridError::GridMismatch);
    }
    let mut growth = Vec::with_capacity(phi.len());
    let mut consumption = Vec::with_capacity(phi.len());
    for (&p, &s) in phi.values().iter().zip(sigma.values()) {
        let h = params.h(p);
        growth.push((params.lambda_p * s - params.lambda_a) * h);
        consumption.push(-params.lambda_c * s * h);
    }
    Ok((growth, consumption))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::expr::Expr;

    fn setup(grid: Grid, phi0: &str) -> (BoundaryData, InitialData) {
        let b = BoundaryData::constant(0.0, 1.0);
        let phi = SpaceTimeFn::from_expr(Expr::parse(phi0).unwrap());
        let i = InitialData::from_fns(grid, &phi, &1.0.into(), &b).unwrap();
        (b, i)
    }

    #[test]
    fn default_quartic_setup_is_admissible() {
        let g = Grid::new_1d(1.0, 31).unwrap();
        let (b, i) = setup(g, "-1 + 1.8*sin(pi*x)^8");
        let v = validate_model(&ModelParams::default(), &Potential::quartic(), &b, &i, Mode::Dynamic, 1.0);
        assert!(v.is_empty(), "{v:?}");
        assert!(validate_ctsdep(&ModelParams::default(), &Potential::quartic()).is_empty());
    }

    #[test]
    fn negative_kappa_violates_a1() {
        let g = Grid::new_1d(1.0, 15).unwrap();
        let (b, i) = setup(g, "-1");
        let p = ModelParams { kappa: -1.0, ..ModelParams::default() };
        let v = validate_model(&p, &Potential::quartic(), &b, &i, Mode::Dynamic, 1.0);
        assert!(v.iter().any(|v| v.label == "(A1)" && v.message.contains("kappa")));
        let q = ModelParams { kappa: 0.5, ..ModelParams::default() };
        assert!(validate_params(&q, Mode::QuasiStatic).iter().any(|v| v.label == "(A1)"));
        let r = ModelParams { kappa: 0.0, ..ModelParams::default() };
        assert!(validate_params(&r, Mode::QuasiStatic).is_empty());
        assert!(!validate_params(&r, Mode::Dynamic).is_empty());
    }

    #[test]
    fn singular_initial_data_outside_obstacle_violates_s3() {
        let g = Grid::new_1d(1.0, 15).unwrap();
        let b = BoundaryData::constant(0.0, 1.0);
        let i = InitialData {
            phi0: Field::new(g, vec![1.5; 15], (-1.0).into()).unwrap(),
            sigma0: Field::constant(g, 1.0),
            phi0_source: None,
        };
        let v = validate_model(&ModelParams::default(), &Potential::double_obstacle(0.01), &b, &i, Mode::Singular, 1.0);
        assert!(v.iter().any(|v| v.label == "(S3)"), "{v:?}");
    }

    #[test]
    fn unbounded_interpolant_violates_a2() {
        let p = ModelParams { h: Interpolation::Linear, ..ModelParams::default() };
        assert!(validate_params(&p, Mode::Dynamic).iter().any(|v| v.label == "(A2)"));
        let d = ModelParams { diffusivity: Diffusivity::Constant(0.0), ..ModelParams::default() };
        assert!(validate_params(&d, Mode::Dynamic).iter().any(|v| v.label == "(A2)"));
    }

    #[test]
    fn incompatible_phi0_trace_is_reported() {
        let g = Grid::new_1d(1.0, 15).unwrap();
        let (b, i) = setup(g, "0.2");
        let v = validate_model(&ModelParams::default(), &Potential::quartic(), &b, &i, Mode::Dynamic, 1.0);
        assert!(v.iter().any(|v| v.label == "(A4)"));
    }

    #[test]
    fn mode_potential_mismatch() {
        let g = Grid::new_1d(1.0, 15).unwrap();
        let (b, i) = setup(g, "-1");
        let v = validate_model(&ModelParams::default(), &Potential::quartic(), &b, &i, Mode::Singular, 1.0);
        assert!(v.iter().any(|v| v.label == "(S1)"));
    }

    #[test]
    fn ctsdep_requires_constant_diffusivity() {
        let p = ModelParams { diffusivity: Diffusivity::Interpolated { healthy: 1.0, tumor: 2.0 }, ..ModelParams::default() };
        assert!(validate_ctsdep(&p, &Potential::quartic()).iter().any(|v| v.label == "(C1)"));
        assert!(validate_params(&p, Mode::Dynamic).is_empty());
        assert_eq!(p.d_bounds(), (1.0, 2.0));
    }

    #[test]
    fn default_h_values_and_lipschitz() {
        assert_eq!(default_h(-1.0), 0.0);
        assert_eq!(default_h(1.0), 1.0);
        assert_eq!(default_h(0.0), 0.5);
        assert_eq!(default_h(7.0), 1.0);
        let mut a = -3.0f64;
        while a < 3.0 {
            let b = 1.3 - a * 0.4;
            assert!((default_h(a) - default_h(b)).abs() <= 0.5 * (a - b).abs() + 1e-15);
            a += 0.013;
        }
    }

    #[test]
    fn sources() {
        let g = Grid::new_1d(1.0, 5).unwrap();
        let p = ModelParams { lambda_p: 1.0, lambda_a: 0.0, lambda_c: 3.0, ..ModelParams::default() };
        let (s1, s2) = eval_sources(&p, &Field::constant(g, -1.0), &Field::constant(g, 2.0)).unwrap();
        assert!(s1.iter().chain(&s2).all(|v| *v == 0.0));
        let (s1, _) = eval_sources(&p, &Field::constant(g, 1.0), &Field::constant(g, 2.0)).unwrap();
        assert!(s1.iter().all(|v| *v == 2.0));
        let (_, s2) = eval_sources(&p, &Field::constant(g, 0.0), &Field::constant(g, 1.0)).unwrap();
        assert!(s2.iter().all(|v| *v == -1.5));
    }

    #[test]
    fn sources_are_affine_in_sigma() {
        let g = Grid::new_1d(1.0, 7).unwrap();
        let p = ModelParams::default();
        let phi = Field::new(g, (0..7).map(|k| -1.0 + 0.3 * k as f64).collect(), (-1.0).into()).unwrap();
        let s1 = Field::new(g, (0..7).map(|k| 0.1 * k as f64).collect(), 0.0.into()).unwrap();
        let s2 = Field::new(g, (0..7).map(|k| 1.0 - 0.2 * k as f64).collect(), 0.0.into()).unwrap();
        let sum = s1.with_values(s1.values().iter().zip(s2.values()).map(|(a, b)| a + b).collect()).unwrap();
        let zero = Field::zeros(g);
        let (a, c) = eval_sources(&p, &phi, &s1).unwrap();
        let (b, d) = eval_sources(&p, &phi, &s2).unwrap();
        let (ab, cd) = eval_sources(&p, &phi, &sum).unwrap();
        let (off, _) = eval_sources(&p, &phi, &zero).unwrap();
        for k in 0..7 {
            assert!((ab[k] - (a[k] + b[k] - off[k])).abs() < 1e-14);
            assert!((cd[k] - (c[k] + d[k])).abs() < 1e-14);
        }
    }

    #[test]
    fn finite_difference_fallback_for_sigma_dt() {
        let b = BoundaryData {
            mu_inf: 0.0.into(),
            sigma_inf: SpaceTimeFn::from_closure(|_, t| (3.0 * t).sin()),
            sigma_inf_dt: None,
        };
        let (v, analytic) = b.sigma_dt([0.0, 0.0], 0.4, 1e-3);
        assert!(!analytic);
        assert!((v - 3.0 * (1.2f64).cos()).abs() < 1e-8);
        let e = BoundaryData { sigma_inf: SpaceTimeFn::from_expr(Expr::parse("sin(3*t)").unwrap()), ..b };
        let (w, analytic) = e.sigma_dt([0.0, 0.0], 0.4, 1e-3);
        assert!(analytic);
        assert!((w - 3.0 * (1.2f64).cos()).abs() < 1e-14);
    }
}
