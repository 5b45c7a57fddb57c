use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use tumorch::experiments::{
    self, calibrate, continuous_dependence, identity_convergence, inequality_sweep, kappa_sweep, mms_convergence, run_with, yosida_sweep,
    Caps, ExperimentError, Manufactured, MmsSpec, Perturbation, RunOptions, SweepReport, SweepSpec, Verdict,
};
use tumorch::model::config::{Config, ConfigError};
use tumorch::model::{validate_ctsdep, validate_model, Mode};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICS: u8 = 3;

#[derive(Parser)]
#[command(name = "tumorch", version, about = "Cahn-Hilliard tumour growth solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set params.kappa=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation to the final time.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated output times for field snapshots.
        #[arg(long, value_delimiter = ',')]
        snapshot_times: Vec<f64>,
    },
    /// Run an experiment sweep and write a report directory.
    Sweep {
        kind: SweepKind,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Comma-separated ladder replacing the default one.
        #[arg(long, value_delimiter = ',')]
        ladder: Vec<f64>,
        /// Mode for `ctsdep`; defaults to the scenario's mode.
        #[arg(long)]
        mode: Option<Mode>,
        /// Calibrated caps; defaults to `<config>.caps.toml` when present.
        #[arg(long)]
        caps: Option<PathBuf>,
        /// Also perturb mu_inf in `ctsdep` (rejected in singular mode).
        #[arg(long)]
        perturb_mu_inf: bool,
    },
    /// Check every standing assumption for the scenario.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Calibrate the bound constants and write a caps file.
    Calibrate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output path; defaults to `<config>.caps.toml`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Kappa,
    Yosida,
    Ctsdep,
    Mms,
    Inequality,
    Identity,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure { code: EXIT_CONFIG, message: e.to_string() }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure { code: if e.is_numerical() { EXIT_NUMERICS } else { EXIT_CONFIG }, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_CONFIG, message: format!("{}: {e}", path.display()) }
}

fn load(args: &ConfigArgs) -> Result<Config, Failure> {
    Ok(Config::load(&args.config, &args.overrides)?)
}

fn caps_path(config: &Path) -> PathBuf {
    config.with_extension("caps.toml")
}

fn manifest_toml(config: &Config, out: &Path) -> String {
    let mut m = toml::Table::new();
    m.insert("config_hash".into(), config.hash().into());
    m.insert("mode".into(), config.mode.kind.name().into());
    m.insert("output_dir".into(), out.display().to_string().into());
    m.insert("tool_version".into(), env!("CARGO_PKG_VERSION").into());
    let c = Config { manifest: Some(m), ..config.clone() };
    toml::to_string(&c).expect("config serialises")
}

fn simulate(args: &ConfigArgs, out: &Path, snapshot_times: &[f64]) -> Result<(), Failure> {
    let config = load(args)?;
    let scenario = config.resolve()?;
    let violations = scenario.validate();
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Failure { code: EXIT_CONFIG, message: format!("assumptions violated:\n  {}", msg.join("\n  ")) });
    }
    std::fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let manifest = out.join("manifest.toml");
    std::fs::write(&manifest, manifest_toml(&config, out)).map_err(|e| io_failure(&manifest, e))?;
    info!("config hash {}", config.hash());

    let tau = scenario.stepper.tau;
    let mut pending: Vec<f64> = snapshot_times.to_vec();
    pending.sort_by(f64::total_cmp);
    let snapshot = |state: &tumorch::State| -> Result<(), ExperimentError> {
        while let Some(&t) = pending.first() {
            if state.t + 0.5 * tau < t {
                break;
            }
            pending.remove(0);
            let path = out.join(format!("snapshot_t{t}.csv"));
            let f = std::fs::File::create(&path).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
            experiments::write_snapshot(std::io::BufWriter::new(f), state).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    };
    let opts = RunOptions { keep_fields: false, ..RunOptions::default() };
    let problem = scenario.problem();
    let t = run_with(scenario.grid, &problem, &scenario.idata.phi0, &scenario.idata.sigma0, &scenario.stepper, opts, snapshot)?;
    t.write_diagnostics(&out.join("diagnostics.csv"))?;
    let path = out.join("final.csv");
    let f = std::fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
    experiments::write_snapshot(std::io::BufWriter::new(f), &t.final_state).map_err(|e| io_failure(&path, e))?;
    if t.dt_fallback {
        println!("note: d/dt sigma_inf approximated by finite differences");
    }
    println!("simulated {} steps to t = {} ({} Newton iterations)", t.times.len() - 1, t.final_state.t, t.newton_iterations);
    Ok(())
}

fn sweep(
    kind: SweepKind,
    args: &ConfigArgs,
    out: &Path,
    jobs: usize,
    ladder: &[f64],
    mode: Option<Mode>,
    caps: Option<&Path>,
    perturb_mu_inf: bool,
) -> Result<Verdict, Failure> {
    let config = load(args)?;
    let caps_file = caps.map(Path::to_path_buf).unwrap_or_else(|| caps_path(&args.config));
    let caps = if caps_file.exists() { Some(Caps::load(&caps_file)?) } else { None };
    if let Some(c) = &caps {
        if c.config_hash != config.hash() {
            println!("note: caps in {} were calibrated on a different configuration", caps_file.display());
        }
    }
    let spec = |default: &[f64]| {
        SweepSpec::new(config.clone(), if ladder.is_empty() { default.to_vec() } else { ladder.to_vec() }).with_jobs(jobs)
    };
    let report: SweepReport = match kind {
        SweepKind::Kappa => kappa_sweep(&spec(&experiments::KAPPA_LADDER))?,
        SweepKind::Inequality => inequality_sweep(&spec(&experiments::INEQUALITY_LADDER), caps.as_ref().and_then(|c| c.c_cal))?,
        SweepKind::Yosida => yosida_sweep(&spec(&experiments::YOSIDA_LADDER), caps.as_ref().and_then(|c| c.b_cap))?,
        SweepKind::Ctsdep => {
            let mode = mode.unwrap_or(config.mode.kind);
            let mut p = Perturbation::default_for(mode);
            p.mu_inf |= perturb_mu_inf;
            continuous_dependence(&spec(&experiments::DELTA_LADDER), mode, p, caps.as_ref().and_then(|c| c.r_cap(mode)))?
        }
        SweepKind::Mms => {
            let mut s = MmsSpec::from_config(&config);
            if !ladder.is_empty() {
                s.space_cells = ladder.iter().map(|&h| (1.0 / h).round() as usize).collect();
            }
            mms_convergence(&s, jobs)?
        }
        SweepKind::Identity => {
            let s = MmsSpec::from_config(&config);
            let taus = if ladder.is_empty() { vec![0.01, 0.005, 0.0025] } else { ladder.to_vec() };
            identity_convergence(&s.solution as &Manufactured, 64, &taus, 0.25, jobs)?
        }
    };
    report.write(out)?;
    print!("{}", report.verdict_text());
    Ok(report.verdict())
}

fn validate(args: &ConfigArgs) -> Result<bool, Failure> {
    let config = load(args)?;
    let s = config.resolve()?;
    let violations = validate_model(&s.params, &s.potential, &s.bdata, &s.idata, s.mode, s.stepper.t_end);
    let mut labels: Vec<&str> = vec!["(A1)", "(A2)", "(A3)", "(A4)"];
    if s.mode == Mode::Singular {
        labels = vec!["(A1)", "(A2)", "(A4)", "(S1)", "(S2)", "(S3)"];
    }
    let mut ok = true;
    for l in &labels {
        let hits: Vec<_> = violations.iter().filter(|v| v.label == *l).collect();
        if hits.is_empty() {
            println!("PASS {l}");
        } else {
            ok = false;
            for v in hits {
                println!("FAIL {l} {}", v.message);
            }
        }
    }
    // labels outside the mode's list, e.g. a mode/potential mismatch
    for v in violations.iter().filter(|v| !labels.contains(&v.label.as_str())) {
        ok = false;
        println!("FAIL {} {}", v.label, v.message);
    }
    if s.mode != Mode::Singular {
        let c = validate_ctsdep(&s.params, &s.potential);
        for l in ["(C1)", "(C2)", "(C3)"] {
            match c.iter().find(|v| v.label == l) {
                None => println!("PASS {l} (continuous dependence)"),
                Some(v) => println!("FAIL {l} (continuous dependence) {}", v.message),
            }
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, out, snapshot_times } => simulate(config, out, snapshot_times).map(|_| 0),
        Command::Sweep { kind, config, out, jobs, ladder, mode, caps, perturb_mu_inf } => {
            sweep(*kind, config, out, *jobs, ladder, *mode, caps.as_deref(), *perturb_mu_inf)
                .map(|v| if v == Verdict::Pass { 0 } else { EXIT_FAIL })
        }
        Command::Validate { config } => validate(config).map(|ok| if ok { 0 } else { EXIT_CONFIG }),
        Command::Calibrate { config, out, jobs } => (|| {
            let c = load(config)?;
            let caps = calibrate(&c, *jobs)?;
            let path = out.clone().unwrap_or_else(|| caps_path(&config.config));
            caps.save(&path)?;
            println!("wrote {}", path.display());
            Ok(0)
        })(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
