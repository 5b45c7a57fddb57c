//! TOML scenario files.
//!
//! Sections `[params]`, `[potential]`, `[boundary]`, `[initial]`, `[grid]`,
//! `[time]` and `[mode]`; every key has a default and unknown keys are
//! rejected. An optional `[manifest]` table (written by the CLI) is
//! accepted and ignored, so resolved manifests can be fed back as configs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::expr::{Expr, ExprError};
use super::{BoundaryData, Diffusivity, InitialData, Interpolation, Mode, ModelParams};
use crate::grid::{Grid, GridError, SpaceTimeFn};
use crate::potential::{Polynomial, Potential, RegularPotential, SingularPotential};
use crate::solver::{Coupling, StepperConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("bad override '{0}': expected section.key=value")]
    Override(String),
    #[error("expression for {field}: {source}")]
    Expr { field: String, source: ExprError },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// A number or an expression in `x`, `y`, `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

impl Scalar {
    pub fn to_fn(&self, field: &str) -> Result<SpaceTimeFn, ConfigError> {
        match self {
            Scalar::Number(v) => Ok(SpaceTimeFn::Constant(*v)),
            Scalar::Expr(s) => Expr::parse(s)
                .map(SpaceTimeFn::from_expr)
                .map_err(|source| ConfigError::Expr { field: field.to_string(), source }),
        }
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Number(v)
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Expr(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusivityKind {
    Constant,
    Interpolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationKind {
    ClampedLinear,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub gamma: f64,
    pub eps: f64,
    pub kappa: f64,
    pub lambda_p: f64,
    pub lambda_a: f64,
    pub lambda_c: f64,
    pub chi: f64,
    pub eta: f64,
    pub diffusivity: DiffusivityKind,
    /// Constant value, or the healthy-tissue value when interpolated.
    pub d0: f64,
    /// Tumour value when interpolated.
    pub d1: f64,
    pub h: InterpolationKind,
}

impl Default for ParamsSection {
    fn default() -> Self {
        let p = ModelParams::default();
        Self {
            gamma: p.gamma,
            eps: p.eps,
            kappa: p.kappa,
            lambda_p: p.lambda_p,
            lambda_a: p.lambda_a,
            lambda_c: p.lambda_c,
            chi: p.chi,
            eta: p.eta,
            diffusivity: DiffusivityKind::Constant,
            d0: 1.0,
            d1: 1.0,
            h: InterpolationKind::ClampedLinear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Quartic,
    Polynomial,
    Obstacle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    pub kind: PotentialKind,
    /// Ascending coefficients of the convex part (kind = "polynomial").
    pub convex: Vec<f64>,
    /// Ascending coefficients of the explicit part (kind = "polynomial").
    pub concave: Vec<f64>,
    pub growth_p: f64,
    pub growth_s: f64,
    pub growth_k1: f64,
    pub lipschitz_k3: f64,
    /// Yosida parameter (kind = "obstacle").
    pub yosida_n: f64,
    pub lo: f64,
    pub hi: f64,
    /// Ascending coefficients of `Λ` (kind = "obstacle").
    pub lambda: Vec<f64>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        let q = RegularPotential::quartic();
        let o = SingularPotential::double_obstacle(0.01);
        Self {
            kind: PotentialKind::Quartic,
            convex: q.convex.0.clone(),
            concave: q.concave.0.clone(),
            growth_p: q.growth_p,
            growth_s: q.growth_s,
            growth_k1: q.growth_k1,
            lipschitz_k3: q.lipschitz_k3,
            yosida_n: o.n,
            lo: o.lo,
            hi: o.hi,
            lambda: o.lambda.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundarySection {
    pub mu_inf: Scalar,
    pub sigma_inf: Scalar,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_inf_dt: Option<Scalar>,
}

impl Default for BoundarySection {
    fn default() -> Self {
        Self { mu_inf: 0.0.into(), sigma_inf: "1 + 0.1*sin(2*pi*t)".into(), sigma_inf_dt: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub phi0: Scalar,
    pub sigma0: Scalar,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { phi0: "-1 + 1.8*sin(pi*x)^8".into(), sigma0: 1.0.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dim: usize,
    /// Interior nodes per axis.
    pub n: Vec<usize>,
    pub extent: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { dim: 1, n: vec![127], extent: vec![1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub tau: f64,
    pub t_end: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    /// Number of σ/CH sweeps per step; 1 is the decoupled scheme.
    pub picard: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        let s = StepperConfig::default();
        Self {
            tau: s.tau,
            t_end: s.t_end,
            newton_tol: s.newton_tol,
            newton_max_iter: s.newton_max_iter,
            linear_tol: s.linear_tol,
            linear_max_iter: s.linear_max_iter,
            picard: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeSection {
    pub kind: Mode,
}

impl Default for ModeSection {
    fn default() -> Self {
        Self { kind: Mode::Dynamic }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub params: ParamsSection,
    pub potential: PotentialSection,
    pub boundary: BoundarySection,
    pub initial: InitialSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub mode: ModeSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<toml::Table>,
}

/// Sets `section.key = value` inside a TOML tree. The value is parsed as a
/// TOML literal and falls back to a bare string.
pub fn apply_override(root: &mut toml::Value, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::Override(spec.to_string()))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(spec.to_string()));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut node = root;
    for part in &path[..path.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| ConfigError::Override(spec.to_string()))?;
        node = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node.as_table_mut().ok_or_else(|| ConfigError::Override(spec.to_string()))?;
    table.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

impl Config {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut value: toml::Value =
            toml::from_str::<toml::Table>(text).map(toml::Value::Table).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Config::deserialize(value).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text, overrides)
    }

    /// The resolved configuration with every default written out, without `[manifest]`.
    pub fn canonical_toml(&self) -> String {
        let physics = Config { manifest: None, ..self.clone() };
        toml::to_string(&physics).expect("config serialises")
    }

    /// sha256 of [`Config::canonical_toml`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_toml().as_bytes()))
    }

    pub fn model_params(&self) -> ModelParams {
        let p = &self.params;
        ModelParams {
            gamma: p.gamma,
            eps: p.eps,
            kappa: p.kappa,
            lambda_p: p.lambda_p,
            lambda_a: p.lambda_a,
            lambda_c: p.lambda_c,
            chi: p.chi,
            eta: p.eta,
            diffusivity: match p.diffusivity {
                DiffusivityKind::Constant => Diffusivity::Constant(p.d0),
                DiffusivityKind::Interpolated => Diffusivity::Interpolated { healthy: p.d0, tumor: p.d1 },
            },
            h: match p.h {
                InterpolationKind::ClampedLinear => Interpolation::ClampedLinear,
                InterpolationKind::Linear => Interpolation::Linear,
            },
        }
    }

    pub fn potential(&self) -> Potential {
        let s = &self.potential;
        match s.kind {
            PotentialKind::Quartic => Potential::quartic(),
            PotentialKind::Polynomial => Potential::Regular(RegularPotential::new(
                Polynomial(s.convex.clone()),
                Polynomial(s.concave.clone()),
                s.growth_p,
                s.growth_s,
                s.growth_k1,
                s.lipschitz_k3,
            )),
            PotentialKind::Obstacle => {
                Potential::Singular(SingularPotential { lo: s.lo, hi: s.hi, n: s.yosida_n, lambda: Polynomial(s.lambda.clone()) })
            }
        }
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        let g = &self.grid;
        if g.n.len() != g.dim || g.extent.len() != g.dim {
            return Err(ConfigError::Invalid(format!(
                "grid.n and grid.extent need {} entries (got {} and {})",
                g.dim,
                g.n.len(),
                g.extent.len()
            )));
        }
        Ok(match g.dim {
            1 => Grid::new_1d(g.extent[0], g.n[0])?,
            2 => Grid::new_2d([g.extent[0], g.extent[1]], [g.n[0], g.n[1]])?,
            d => return Err(ConfigError::Invalid(format!("grid.dim = {d} must be 1 or 2"))),
        })
    }

    pub fn boundary_data(&self) -> Result<BoundaryData, ConfigError> {
        let b = &self.boundary;
        Ok(BoundaryData {
            mu_inf: b.mu_inf.to_fn("boundary.mu_inf")?,
            sigma_inf: b.sigma_inf.to_fn("boundary.sigma_inf")?,
            sigma_inf_dt: b.sigma_inf_dt.as_ref().map(|s| s.to_fn("boundary.sigma_inf_dt")).transpose()?,
        })
    }

    pub fn stepper(&self) -> StepperConfig {
        let t = &self.time;
        StepperConfig {
            tau: t.tau,
            t_end: t.t_end,
            newton_tol: t.newton_tol,
            newton_max_iter: t.newton_max_iter,
            linear_tol: t.linear_tol,
            linear_max_iter: t.linear_max_iter,
            coupling: if t.picard <= 1 { Coupling::Decoupled } else { Coupling::Picard(t.picard) },
        }
    }

    /// Builds every runtime object. Assumption checks are left to
    /// [`super::validate_model`] so violations can be reported as data.
    pub fn resolve(&self) -> Result<Scenario, ConfigError> {
        let grid = self.grid()?;
        let bdata = self.boundary_data()?;
        let phi0 = self.initial.phi0.to_fn("initial.phi0")?;
        let sigma0 = self.initial.sigma0.to_fn("initial.sigma0")?;
        let idata = InitialData::from_fns(grid, &phi0, &sigma0, &bdata)?;
        let stepper = self.stepper();
        stepper.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Scenario {
            config: self.clone(),
            grid,
            params: self.model_params(),
            potential: self.potential(),
            bdata,
            idata,
            stepper,
            mode: self.mode.kind,
        })
    }
}

/// A fully resolved scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: Config,
    pub grid: Grid,
    pub params: ModelParams,
    pub potential: Potential,
    pub bdata: BoundaryData,
    pub idata: InitialData,
    pub stepper: StepperConfig,
    pub mode: Mode,
}

impl Scenario {
    pub fn validate(&self) -> Vec<crate::potential::Violation> {
        super::validate_model(&self.params, &self.potential, &self.bdata, &self.idata, self.mode, self.stepper.t_end)
    }

    pub fn problem(&self) -> crate::solver::Problem {
        crate::solver::Problem::new(self.params.clone(), self.potential.clone(), self.bdata.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_to_defaults() {
        let c = Config::from_toml_str("", &[]).unwrap();
        assert_eq!(c, Config::default());
        let s = c.resolve().unwrap();
        assert_eq!(s.grid.len(), 127);
        assert!(s.validate().is_empty(), "{:?}", s.validate());
    }

    #[test]
    fn unknown_keys_fail() {
        assert!(Config::from_toml_str("[params]\nkapa = 1.0\n", &[]).is_err());
        assert!(Config::from_toml_str("[bogus]\nx = 1\n", &[]).is_err());
        assert!(Config::from_toml_str("", &["params.kapa=2".into()]).is_err());
    }

    #[test]
    fn overrides_and_expressions() {
        let c = Config::from_toml_str(
            "[boundary]\nsigma_inf = \"1 + x\"\n",
            &["params.kappa=0.25".into(), "mode.kind=quasistatic".into(), "initial.sigma0=2".into(), "grid.n=[15]".into()],
        )
        .unwrap();
        assert_eq!(c.params.kappa, 0.25);
        assert_eq!(c.mode.kind, Mode::QuasiStatic);
        assert_eq!(c.initial.sigma0, Scalar::Number(2.0));
        let s = c.resolve().unwrap();
        assert_eq!(s.bdata.sigma_inf.eval([0.5, 0.0], 0.0), 1.5);
        assert!(Config::from_toml_str("", &["nokey".into()]).is_err());
    }

    #[test]
    fn hash_ignores_key_order_and_manifest() {
        let a = Config::from_toml_str("[params]\nchi = 0.3\neta = 0.1\n[time]\ntau = 0.01\n", &[]).unwrap();
        let b = Config::from_toml_str("[time]\ntau = 0.01\n[params]\neta = 0.1\nchi = 0.3\n[manifest]\nhash = \"x\"\n", &[]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), Config::default().hash());
    }

    #[test]
    fn canonical_toml_round_trips() {
        let a = Config::from_toml_str("[potential]\nkind = \"obstacle\"\n[mode]\nkind = \"singular\"\n", &[]).unwrap();
        let b = Config::from_toml_str(&a.canonical_toml(), &[]).unwrap();
        assert_eq!(a, b);
        assert!(b.potential().is_singular());
    }

    #[test]
    fn bad_expression_is_reported() {
        let c = Config::from_toml_str("[initial]\nphi0 = \"sin(\"\n", &[]).unwrap();
        assert!(matches!(c.resolve(), Err(ConfigError::Expr { .. })));
    }
}
