//! Parameter sweeps, convergence studies and report output.
//!
//! Each sweep runs its members in parallel on a dedicated thread pool,
//! derives scalar metrics per member and turns them into a [`Verdict`].
//! Reports are plain directories: `report.csv`, `verdict.txt` and one
//! `members/<label>/` directory per run.

mod caps;
mod ctsdep;
mod kappa;
mod mms;
pub mod run;
mod yosida;

pub use caps::{calibrate, Caps, SAFETY_FACTOR};
pub use ctsdep::{continuous_dependence, Perturbation};
pub use kappa::{inequality_sweep, kappa_sweep, KAPPA_REL_TOL};
pub use mms::{identity_convergence, mms_convergence, mms_stationary_error, Manufactured, MmsSpec};
pub use run::{run, run_scenario, run_with, write_snapshot, RunOptions, Trajectory};
pub use yosida::{yosida_sweep, VIOLATION_TOL};

use std::fmt;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::model::config::{Config, ConfigError};
use crate::solver::{SolverError, State};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{member}: assumptions violated: {}", violations.join("; "))]
    Validation { member: String, violations: Vec<String> },
    #[error("{member}: {source}")]
    Solver { member: String, source: SolverError },
    #[error(transparent)]
    Numerics(#[from] SolverError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("{0}")]
    Io(String),
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }

    /// Tags an unattributed solver error with the member that raised it.
    pub fn attribute(self, member: &str) -> Self {
        match self {
            Self::Numerics(source) => Self::Solver { member: member.to_string(), source },
            e => e,
        }
    }

    /// Whether the failure happened inside the numerics (as opposed to input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Self::Solver { .. } | Self::Numerics(_))
    }
}

impl From<crate::grid::GridError> for ExperimentError {
    fn from(e: crate::grid::GridError) -> Self {
        Self::Numerics(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Verdict,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), status: if pass { Verdict::Pass } else { Verdict::Fail }, detail: detail.into() }
    }
}

/// What a sweep keeps from each member for the report directory.
#[derive(Debug, Clone)]
pub struct MemberOutput {
    pub label: String,
    pub config_hash: Option<String>,
    pub records: Vec<crate::diagnostics::DiagnosticsRecord>,
    pub final_state: State,
}

impl MemberOutput {
    pub fn new(label: impl Into<String>, config: Option<&Config>, t: &Trajectory) -> Self {
        Self { label: label.into(), config_hash: config.map(Config::hash), records: t.records.clone(), final_state: t.final_state.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub config_hash: String,
    pub members: Vec<MemberOutput>,
    /// Cap used by the bound check, whether given or calibrated.
    pub cap: Option<f64>,
}

impl SweepReport {
    pub fn new(kind: &str, config_hash: String, columns: &[&str]) -> Self {
        Self {
            kind: kind.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            config_hash,
            members: Vec::new(),
            cap: None,
        }
    }

    /// Worst status over all checks; a report without checks is inconclusive.
    pub fn verdict(&self) -> Verdict {
        self.checks.iter().map(|c| c.status).max().unwrap_or(Verdict::Inconclusive)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn verdict_text(&self) -> String {
        let mut s = format!("{} {}\nconfig_hash {}\n", self.kind, self.verdict(), self.config_hash);
        for c in &self.checks {
            s += &format!("{} {}: {}\n", c.status, c.name, c.detail);
        }
        for n in &self.notes {
            s += &format!("note: {n}\n");
        }
        for m in &self.members {
            if let Some(h) = &m.config_hash {
                s += &format!("member {} {h}\n", m.label);
            }
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
        let path = dir.join("report.csv");
        let file = std::fs::File::create(&path).map_err(|e| ExperimentError::io(&path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let csv_err = |e: csv::Error| ExperimentError::Io(format!("{}: {e}", path.display()));
        w.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string())).map_err(csv_err)?;
        }
        w.flush().map_err(|e| ExperimentError::io(&path, e))?;

        let path = dir.join("verdict.txt");
        let mut f = std::fs::File::create(&path).map_err(|e| ExperimentError::io(&path, e))?;
        f.write_all(self.verdict_text().as_bytes()).map_err(|e| ExperimentError::io(&path, e))?;

        for m in &self.members {
            let md = dir.join("members").join(&m.label);
            std::fs::create_dir_all(&md).map_err(|e| ExperimentError::io(&md, e))?;
            let p = md.join("diagnostics.csv");
            let f = std::fs::File::create(&p).map_err(|e| ExperimentError::io(&p, e))?;
            crate::diagnostics::write_records(std::io::BufWriter::new(f), &m.records)
                .map_err(|e| ExperimentError::Io(format!("{}: {e}", p.display())))?;
            let p = md.join("final.csv");
            let f = std::fs::File::create(&p).map_err(|e| ExperimentError::io(&p, e))?;
            write_snapshot(std::io::BufWriter::new(f), &m.final_state)
                .map_err(|e| ExperimentError::Io(format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }
}

pub const KAPPA_LADDER: [f64; 3] = [1.0, 0.25, 0.0625];
pub const INEQUALITY_LADDER: [f64; 3] = [1.0, 0.1, 0.01];
pub const YOSIDA_LADDER: [f64; 3] = [1e-1, 1e-2, 1e-3];
pub const DELTA_LADDER: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// Ladder and pool size shared by every sweep.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: Config,
    pub ladder: Vec<f64>,
    pub jobs: usize,
}

impl SweepSpec {
    pub fn new(base: Config, ladder: Vec<f64>) -> Self {
        Self { base, ladder, jobs: 1 }
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs;
        self
    }

    /// Ladder sorted in decreasing order after checking it has at least
    /// three finite, positive, distinct values.
    pub fn descending(&self) -> Result<Vec<f64>, ExperimentError> {
        check_ladder(&self.ladder)?;
        let mut l = self.ladder.clone();
        l.sort_by(|a, b| b.total_cmp(a));
        Ok(l)
    }
}

pub fn check_ladder(values: &[f64]) -> Result<(), ExperimentError> {
    if values.len() < 3 {
        return Err(ExperimentError::InvalidSpec(format!("ladder needs at least 3 values, got {}", values.len())));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(ExperimentError::InvalidSpec(format!("ladder value {v} must be finite and positive")));
    }
    let inc = values.windows(2).all(|w| w[0] < w[1]);
    let dec = values.windows(2).all(|w| w[0] > w[1]);
    if !(inc || dec) {
        return Err(ExperimentError::InvalidSpec(format!("ladder {values:?} must be strictly monotone")));
    }
    Ok(())
}

pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest vertical distance of a point from the line, in log units.
    pub max_deviation: f64,
}

pub fn fit_loglog(x: &[f64], y: &[f64]) -> LogLogFit {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_deviation = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).abs()).fold(0.0, f64::max);
    LogLogFit { slope, intercept, max_deviation }
}

/// Largest log-residual for which a fitted order is trusted.
pub const FIT_DEVIATION_MAX: f64 = 0.1;

/// Order check: inconclusive when the points are not on a line.
pub fn order_check(name: &str, fit: &LogLogFit, expected: f64, tol: f64) -> Check {
    let detail = format!("fitted order {:.4} (expected {expected} ± {tol}), max log deviation {:.3e}", fit.slope, fit.max_deviation);
    if !(fit.max_deviation <= FIT_DEVIATION_MAX) {
        return Check { name: name.to_string(), status: Verdict::Inconclusive, detail };
    }
    Check::new(name, (fit.slope - expected).abs() <= tol, detail)
}

/// Squared L² norm and squared gradient of `a - b`, the difference carrying
/// the trace `trace` at time `t`.
pub(crate) fn diff_norms_sq(grid: &crate::grid::Grid, a: &[f64], b: &[f64], trace: crate::grid::SpaceTimeFn, t: f64) -> Result<(f64, f64), ExperimentError> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let l2 = crate::grid::ops::l2_inner_values(grid, &d, &d)?;
    let f = crate::grid::Field::new(*grid, d, trace)?;
    Ok((l2, crate::grid::ops::gradient_sq_integral(grid, &f, t)?))
}

/// Maps `f` over `items` on a pool of `jobs` threads, preserving order.
pub(crate) fn par_map<T: Sync, R: Send>(
    jobs: usize,
    items: &[T],
    f: impl Fn(&T) -> Result<R, ExperimentError> + Sync,
) -> Result<Vec<R>, ExperimentError> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::InvalidSpec(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_rules() {
        assert!(check_ladder(&[1.0, 0.5, 0.25]).is_ok());
        assert!(check_ladder(&[0.1, 0.2, 0.3, 0.4]).is_ok());
        assert!(check_ladder(&[1.0, 0.5]).is_err());
        assert!(check_ladder(&[1.0, 0.5, 0.7]).is_err());
        assert!(check_ladder(&[1.0, 1.0, 0.5]).is_err());
        assert!(check_ladder(&[1.0, 0.0, -1.0]).is_err());
    }

    #[test]
    fn loglog_exact_power() {
        let x = [0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
        let f = fit_loglog(&x, &y);
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.max_deviation < 1e-12);
    }

    #[test]
    fn order_check_states() {
        let good = LogLogFit { slope: 1.9, intercept: 0.0, max_deviation: 0.01 };
        assert_eq!(order_check("o", &good, 2.0, 0.2).status, Verdict::Pass);
        let off = LogLogFit { slope: 1.5, ..good };
        assert_eq!(order_check("o", &off, 2.0, 0.2).status, Verdict::Fail);
        let bent = LogLogFit { max_deviation: 0.3, ..good };
        assert_eq!(order_check("o", &bent, 2.0, 0.2).status, Verdict::Inconclusive);
    }

    #[test]
    fn verdict_is_worst_check() {
        let mut r = SweepReport::new("k", "h".into(), &["a"]);
        assert_eq!(r.verdict(), Verdict::Inconclusive);
        r.checks.push(Check::new("x", true, ""));
        assert_eq!(r.verdict(), Verdict::Pass);
        r.checks.push(Check { name: "y".into(), status: Verdict::Inconclusive, detail: String::new() });
        assert_eq!(r.verdict(), Verdict::Inconclusive);
        r.checks.push(Check::new("z", false, ""));
        assert_eq!(r.verdict(), Verdict::Fail);
    }
}
