//! Yosida approximation of the double obstacle as `n -> 0`.

use super::{fit_loglog, par_map, run_scenario, strictly_decreasing, Check, ExperimentError, MemberOutput, RunOptions, SweepReport, SweepSpec, SAFETY_FACTOR};
use crate::grid::ops::l2_inner_values;
use crate::model::config::{Config, PotentialKind};

/// Bound on the obstacle violation at the smallest `n`.
pub const VIOLATION_TOL: f64 = 5e-3;

/// Runs the obstacle scenario for each Yosida parameter on the ladder.
/// Without `b_cap` the bound on `|βₙ(φ)|_{L²L²}` is calibrated on the
/// largest `n` with [`SAFETY_FACTOR`].
pub fn yosida_sweep(spec: &SweepSpec, b_cap: Option<f64>) -> Result<SweepReport, ExperimentError> {
    if spec.base.potential.kind != PotentialKind::Obstacle {
        return Err(ExperimentError::Precondition("the Yosida sweep needs an obstacle potential".into()));
    }
    let ladder = spec.descending()?;
    let members: Vec<(String, Config)> = ladder
        .iter()
        .map(|&n| {
            let mut c = spec.base.clone();
            c.potential.yosida_n = n;
            (format!("n_{n}"), c)
        })
        .collect();
    let runs = par_map(spec.jobs, &members, |(label, c)| {
        let s = c.resolve()?;
        let t = run_scenario(label, &s, RunOptions::default())?;
        let obs = s.potential.as_singular().expect("obstacle").clone();
        let g = t.grid;
        let (mut v, mut beta, mut beta_hat) = (0.0f64, 0.0, 0.0f64);
        for k in 0..t.times.len() {
            let phi = &t.phi[k];
            v = v.max(phi.iter().map(|&y| obs.violation(y)).fold(0.0, f64::max));
            beta_hat = beta_hat.max(phi.iter().map(|&y| obs.yosida_beta_hat(y)).sum::<f64>() * g.cell_volume());
            if k > 0 {
                let b: Vec<f64> = phi.iter().map(|&y| obs.yosida_beta(y)).collect();
                beta += (t.times[k] - t.times[k - 1]) * l2_inner_values(&g, &b, &b)?;
            }
        }
        Ok((t, [v, beta.sqrt(), beta_hat]))
    })?;

    let mut report = SweepReport::new("yosida", spec.base.hash(), &["n", "violation", "beta_l2l2", "beta_hat_sup", "continuation_rungs"]);
    for (i, (t, m)) in runs.iter().enumerate() {
        report.rows.push(vec![ladder[i], m[0], m[1], m[2], t.continuation_rungs as f64]);
        report.members.push(MemberOutput::new(&members[i].0, Some(&members[i].1), t));
    }
    let v = report.column("violation").unwrap();
    let beta = report.column("beta_l2l2").unwrap();
    let cap = match b_cap {
        Some(c) => c,
        None => {
            let c = SAFETY_FACTOR * beta[0];
            report.notes.push(format!("B_cap = {c:.6e} calibrated on n = {} with safety factor {SAFETY_FACTOR}", ladder[0]));
            c
        }
    };
    report.cap = Some(cap);
    report.checks.push(Check::new("V(n) strictly decreasing", strictly_decreasing(&v), format!("{v:?}")));
    let vmin = *v.last().unwrap();
    report.checks.push(Check::new(
        "V(n_min) small",
        vmin < VIOLATION_TOL,
        format!("V = {vmin:.4e} at n = {} (tolerance {VIOLATION_TOL})", ladder.last().unwrap()),
    ));
    let worst = beta.iter().cloned().fold(0.0, f64::max);
    report.checks.push(Check::new(
        "|beta_n|_L2L2 uniformly bounded",
        worst <= cap,
        format!("max {worst:.4e} <= B_cap {cap:.4e}"),
    ));
    if v.iter().all(|&x| x > 0.0) {
        let fit = fit_loglog(&ladder, &v);
        report.notes.push(format!("V(n) ~ n^{:.3} (max log deviation {:.2e})", fit.slope, fit.max_deviation));
    }
    Ok(report)
}
