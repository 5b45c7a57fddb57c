//! One-time calibration of the bound constants used by the sweeps.
//!
//! Each cap is the value measured on a reference member times
//! [`SAFETY_FACTOR`]; the remaining members of a ladder are then checked
//! against it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{continuous_dependence, inequality_sweep, yosida_sweep, ExperimentError, Perturbation, SweepSpec};
use super::{DELTA_LADDER, INEQUALITY_LADDER, YOSIDA_LADDER};
use crate::model::config::{Config, PotentialKind};
use crate::model::Mode;

pub const SAFETY_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    /// Hash of the configuration the caps were calibrated on.
    pub config_hash: String,
    pub safety_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_cal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_cap_dynamic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_cap_quasistatic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_cap_singular: Option<f64>,
}

impl Caps {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        toml::from_str(&text).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), ExperimentError> {
        let text = toml::to_string(self).expect("caps serialise");
        std::fs::write(path, text).map_err(|e| ExperimentError::io(path, e))
    }

    pub fn r_cap(&self, mode: Mode) -> Option<f64> {
        match mode {
            Mode::Dynamic => self.r_cap_dynamic,
            Mode::QuasiStatic => self.r_cap_quasistatic,
            Mode::Singular => self.r_cap_singular,
        }
    }
}

/// Calibrates every cap that applies to `config`: the inequality constant and
/// the dynamic and quasi-static ratio caps for a regular potential, the
/// Yosida bound and the singular ratio cap for an obstacle potential.
pub fn calibrate(config: &Config, jobs: usize) -> Result<Caps, ExperimentError> {
    let mut caps = Caps { config_hash: config.hash(), safety_factor: SAFETY_FACTOR, ..Caps::default() };
    let spec = |ladder: &[f64]| SweepSpec::new(config.clone(), ladder.to_vec()).with_jobs(jobs);
    if config.potential.kind == PotentialKind::Obstacle {
        caps.b_cap = yosida_sweep(&spec(&YOSIDA_LADDER), None)?.cap;
        caps.r_cap_singular =
            continuous_dependence(&spec(&DELTA_LADDER), Mode::Singular, Perturbation::default_for(Mode::Singular), None)?.cap;
    } else {
        caps.c_cal = inequality_sweep(&spec(&INEQUALITY_LADDER), None)?.cap;
        for mode in [Mode::Dynamic, Mode::QuasiStatic] {
            let cap = continuous_dependence(&spec(&DELTA_LADDER), mode, Perturbation::default_for(mode), None)?.cap;
            match mode {
                Mode::Dynamic => caps.r_cap_dynamic = cap,
                _ => caps.r_cap_quasistatic = cap,
            }
        }
    }
    Ok(caps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn caps_round_trip() {
        let c = Caps { config_hash: "ab".into(), safety_factor: 4.0, c_cal: Some(1.5), r_cap_singular: Some(0.25), ..Caps::default() };
        let back: Caps = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.r_cap(Mode::Singular), Some(0.25));
        assert_eq!(back.r_cap(Mode::Dynamic), None);
    }
}
