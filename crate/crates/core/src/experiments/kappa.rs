//! Dynamic-to-quasi-static limit and the κ-uniform energy inequality.

use super::{diff_norms_sq, par_map, run_scenario, strictly_decreasing, Check, ExperimentError, MemberOutput, RunOptions, SweepReport, SweepSpec, SAFETY_FACTOR};
use crate::diagnostics::{energy_inequality_check, InequalityData};
use crate::grid::{Field, SpaceTimeFn};
use crate::model::config::Config;
use crate::model::Mode;
use crate::solver::star_norm;

/// `e(κ_min)` relative to `|σ*|_{L²(0,T;H¹)}` must fall below this.
pub const KAPPA_REL_TOL: f64 = 0.1;

fn with_kappa(base: &Config, kappa: f64) -> Config {
    let mut c = base.clone();
    c.params.kappa = kappa;
    c.mode.kind = if kappa == 0.0 { Mode::QuasiStatic } else { Mode::Dynamic };
    c
}

/// Runs the base scenario for every κ on the ladder and once in quasi-static
/// mode, and measures how fast the dynamic runs approach the quasi-static one.
pub fn kappa_sweep(spec: &SweepSpec) -> Result<SweepReport, ExperimentError> {
    let ladder = spec.descending()?;
    let mut members: Vec<(String, Config)> = ladder.iter().map(|&k| (format!("kappa_{k}"), with_kappa(&spec.base, k))).collect();
    members.push(("quasistatic".to_string(), with_kappa(&spec.base, 0.0)));
    let runs = par_map(spec.jobs, &members, |(label, c)| run_scenario(label, &c.resolve()?, RunOptions::default()))?;

    let reference = runs.last().expect("reference member");
    let g = reference.grid;
    let sigma_inf = spec.base.boundary_data()?.sigma_inf;
    let zero = SpaceTimeFn::constant(0.0);

    let mut ref_norm = 0.0;
    for k in 1..reference.times.len() {
        let tau = reference.times[k] - reference.times[k - 1];
        let f = Field::new(g, reference.sigma[k].clone(), sigma_inf.clone())?;
        let l2 = crate::grid::ops::l2_inner_values(&g, f.values(), f.values())?;
        ref_norm += tau * (l2 + crate::grid::ops::gradient_sq_integral(&g, &f, reference.times[k])?);
    }
    let ref_norm = ref_norm.sqrt();

    let mut report = SweepReport::new(
        "kappa",
        spec.base.hash(),
        &["kappa", "e_sigma_l2h1", "e_sigma_rel", "e_phi_linf_l2", "e_phi_l2h1", "kappa_dt_sigma_star"],
    );
    for (i, &kappa) in ladder.iter().enumerate() {
        let r = &runs[i];
        if r.times.len() != reference.times.len() {
            return Err(ExperimentError::InvalidSpec("members disagree on the time grid".into()));
        }
        let (mut es, mut ephi_sup, mut ephi_h1, mut proxy) = (0.0, 0.0f64, 0.0, 0.0);
        for k in 1..r.times.len() {
            let tau = r.times[k] - r.times[k - 1];
            let (sl2, sg) = diff_norms_sq(&g, &r.sigma[k], &reference.sigma[k], zero.clone(), r.times[k])?;
            es += tau * (sl2 + sg);
            let (pl2, pg) = diff_norms_sq(&g, &r.phi[k], &reference.phi[k], zero.clone(), r.times[k])?;
            ephi_sup = ephi_sup.max(pl2.sqrt());
            ephi_h1 += tau * (pl2 + pg);
            let ds: Vec<f64> = r.sigma[k].iter().zip(&r.sigma[k - 1]).map(|(a, b)| a - b).collect();
            proxy += star_norm(&ds, &g)?;
        }
        let es = es.sqrt();
        report.rows.push(vec![kappa, es, es / ref_norm, ephi_sup, ephi_h1.sqrt(), kappa * proxy]);
        report.members.push(MemberOutput::new(&members[i].0, Some(&members[i].1), r));
    }
    report.members.push(MemberOutput::new("quasistatic", Some(&members[ladder.len()].1), reference));

    let e = report.column("e_sigma_l2h1").unwrap();
    let rel = report.column("e_sigma_rel").unwrap();
    let proxy = report.column("kappa_dt_sigma_star").unwrap();
    report.checks.push(Check::new("e(kappa) strictly decreasing", strictly_decreasing(&e), format!("{e:?}")));
    let last = *rel.last().unwrap();
    report.checks.push(Check::new(
        "e(kappa_min) small",
        last < KAPPA_REL_TOL,
        format!("relative error {last:.4e} (tolerance {KAPPA_REL_TOL})"),
    ));
    report.checks.push(Check::new(
        "kappa dt sigma proxy decreasing (proxy criterion)",
        strictly_decreasing(&proxy),
        format!("{proxy:?}"),
    ));
    report.notes.push(
        "proxy criterion: kappa * sum_k |sigma^k - sigma^(k-1)|_* stands in for kappa dt sigma -> 0 in L2(0,T;H^-1)".to_string(),
    );
    Ok(report)
}

/// Checks one inequality constant across a κ ladder. Without `c_cal` the
/// constant is calibrated on the largest κ with [`SAFETY_FACTOR`].
pub fn inequality_sweep(spec: &SweepSpec, c_cal: Option<f64>) -> Result<SweepReport, ExperimentError> {
    let ladder = spec.descending()?;
    let members: Vec<(String, Config)> = ladder.iter().map(|&k| (format!("kappa_{k}"), with_kappa(&spec.base, k))).collect();
    let opts = RunOptions { keep_fields: false, ..RunOptions::default() };
    let runs = par_map(spec.jobs, &members, |(label, c)| {
        let s = c.resolve()?;
        let t = run_scenario(label, &s, opts)?;
        let data = InequalityData::compute(s.params.kappa, &s.bdata, &s.idata.sigma0, s.stepper.t_end, s.stepper.tau)?;
        Ok((t, data))
    })?;
    let mut report = SweepReport::new("inequality", spec.base.hash(), &["kappa", "lhs", "data", "ratio"]);
    let c = match c_cal {
        Some(c) => c,
        None => {
            let (t, d) = &runs[0];
            let c = SAFETY_FACTOR * energy_inequality_check(&t.records, d, 1.0).ratio;
            report.notes.push(format!("C_cal = {c:.6e} calibrated on kappa = {} with safety factor {SAFETY_FACTOR}", ladder[0]));
            c
        }
    };
    report.cap = Some(c);
    for (i, (t, d)) in runs.iter().enumerate() {
        let r = energy_inequality_check(&t.records, d, c);
        report.rows.push(vec![ladder[i], r.lhs, r.rhs_data, r.ratio]);
        report.checks.push(Check::new(
            &format!("inequality at kappa = {}", ladder[i]),
            r.pass,
            format!("lhs {:.4e} <= C_cal {c:.4e} x data {:.4e} (ratio {:.4e})", r.lhs, r.rhs_data, r.ratio),
        ));
        report.members.push(MemberOutput::new(&members[i].0, Some(&members[i].1), t));
    }
    Ok(report)
}
