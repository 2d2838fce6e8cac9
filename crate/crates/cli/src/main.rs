//! `bimc`: rare-event probability estimation from a declarative config file.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver or sampling
//! failure, 4 degenerate estimate (no sample hit the target interval).
//! Failures still emit a structured JSON object on the report channel.

mod check;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bimc::estimators::{bimc_estimate, mc_estimate, BimcOpts, Method, SampleOpts, TuningOverrides};
use bimc_cli::config::RunConfig;
use bimc_cli::report::{to_json, CliErrorReport, CliReport};
use bimc_cli::sweep;
use clap::{Args, Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_DEGENERATE: u8 = 4;
const EXIT_CHECK_FAILED: u8 = 1;

#[derive(Parser)]
#[command(name = "bimc", version, about = "Rare-event probability estimation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one estimate and emit a JSON report.
    Estimate(RunArgs),
    /// Run the sweep section of the config and emit CSV.
    Sweep(RunArgs),
    /// List the model catalog.
    Models,
    /// Run gradient and special-function self-tests.
    Check(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the human-readable summary on standard error.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct CheckArgs {
    /// Check the model and nominal density from this config instead of the
    /// built-in catalog defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Only report failures.
    #[arg(long)]
    quiet: bool,
}

/// A failure bound for the report channel.
struct Failure {
    exit_code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { exit_code: EXIT_CONFIG, message: message.into() }
    }

    fn solver(e: bimc::Error) -> Self {
        Self { exit_code: EXIT_SOLVER, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Estimate(args) => run_estimate(&args),
        Cmd::Sweep(args) => run_sweep_cmd(&args),
        Cmd::Models => {
            print!("{}", models_listing());
            ExitCode::SUCCESS
        }
        Cmd::Check(args) => check::run(args.config.as_deref(), args.quiet),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure {
            exit_code: EXIT_CONFIG,
            message: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Emit a structured error on the report channel and the message on stderr.
fn fail(out: Option<&Path>, failure: &Failure) -> ExitCode {
    let body = to_json(&CliErrorReport::new(failure.exit_code, failure.message.clone()));
    if emit(out, &body).is_err() {
        // The report channel itself is broken; stderr still carries the story.
        eprintln!("error: cannot write the error report");
    }
    eprintln!("error: {}", failure.message);
    ExitCode::from(failure.exit_code)
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::load(path).map_err(|e| Failure::config(e.to_string()))
}

fn run_estimate(args: &RunArgs) -> ExitCode {
    let out = args.out.as_deref();
    let cfg = match load_config(&args.config) {
        Ok(cfg) => cfg,
        Err(f) => return fail(out, &f),
    };
    let report = match estimate_from(&cfg, args.seed) {
        Ok(r) => r,
        Err(f) => return fail(out, &f),
    };
    let degenerate = report.degenerate.clone();
    if !args.quiet {
        let rmse = report
            .rel_rmse_hat
            .map_or("n/a".to_string(), |r| format!("{r:.3}"));
        eprintln!(
            "mu_hat = {:.6e}  rel_rmse = {rmse}  acceptance = {:.3}  n = {}",
            report.mu_hat, report.acceptance_ratio, report.n_samples
        );
    }
    let body = to_json(&CliReport::new(report));
    if let Err(f) = emit(out, &body) {
        return fail(None, &f);
    }
    match degenerate {
        Some(reason) => {
            eprintln!("degenerate estimate: {reason}");
            ExitCode::from(EXIT_DEGENERATE)
        }
        None => ExitCode::SUCCESS,
    }
}

fn estimate_from(
    cfg: &RunConfig,
    seed_override: Option<u64>,
) -> Result<bimc::estimators::EstimateReport, Failure> {
    let model = cfg.build_model().map_err(|e| Failure::config(e.to_string()))?;
    let nominal = cfg
        .build_nominal(model.dim())
        .map_err(|e| Failure::config(e.to_string()))?;
    let y = cfg.build_target().map_err(|e| Failure::config(e.to_string()))?;
    let opts = SampleOpts {
        n_samples: cfg.run.n_samples,
        seed: seed_override.unwrap_or(cfg.run.seed),
    };
    match cfg.run.method {
        Method::Mc => mc_estimate(model.as_ref(), &nominal, &y, &opts).map_err(Failure::solver),
        Method::Bimc => {
            let overrides = TuningOverrides {
                y: cfg.overrides.and_then(|o| o.y),
                sigma_sq: cfg.overrides.and_then(|o| o.sigma_sq),
            };
            let bimc = BimcOpts { n_pseudo: cfg.run.n_pseudo, overrides };
            bimc_estimate(model.as_ref(), &nominal, &y, &bimc, &opts).map_err(Failure::solver)
        }
    }
}

fn run_sweep_cmd(args: &RunArgs) -> ExitCode {
    let out = args.out.as_deref();
    let cfg = match load_config(&args.config) {
        Ok(cfg) => cfg,
        Err(f) => return fail(out, &f),
    };
    let Some(spec) = cfg.sweep.clone() else {
        return fail(out, &Failure::config("sweep: the config file has no [sweep] section"));
    };
    let rows = sweep::run_sweep(&cfg, args.seed);
    if !args.quiet {
        let failed = rows
            .iter()
            .filter(|r| matches!(r.outcome, sweep::CellOutcome::Error { .. }))
            .count();
        eprintln!(
            "swept {} over {} values, ensemble {} ({failed} failed cells)",
            spec.axis.name(),
            rows.len(),
            cfg.run.ensemble.unwrap_or(sweep::DEFAULT_ENSEMBLE),
        );
    }
    let body = sweep::to_csv(spec.axis, &rows);
    match emit(out, &body) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(None, &f),
    }
}

fn models_listing() -> String {
    let mut text = String::from("catalog models:\n");
    let rows = [
        ("affine", "f(x) = sum_i x_i / (m i); params: m (default 2)"),
        ("rank1", "f(x) = u_1 of (S + eps x x')u = b; params: m (default 10), seed, analytic_gradient"),
        ("reaction", "reaction progress u(t_f) from one stiff ODE; params: t_final (default 0.25), step_count"),
        ("lorenz", "u_1(t_f) of the Lorenz system; params: t_final (default 0.1), step_count"),
        ("periodic", "sin(x_1) cos(x_2); no params"),
        ("elliptic-fd", "Darcy pressure at (0.1, 0.5) on an n x n grid; params: grid_n (default 17)"),
    ];
    for (name, desc) in rows {
        text.push_str(&format!("  {name:<12} {desc}\n"));
    }
    text
}
