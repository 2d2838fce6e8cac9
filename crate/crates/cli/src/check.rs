//! The `check` subcommand: fast self-tests of the gradients and special
//! functions the estimators lean on. These catch a miscompiled or miswired
//! build before a long sweep spends hours on it.

use std::path::Path;
use std::process::ExitCode;

use bimc::gaussian::{erfc, erfcx, truncated_normal_moments, Density};
use bimc::models::{self, fd_gradient, CatalogParams, ForwardModel};
use bimc::TargetInterval;
use bimc_cli::config::RunConfig;
use ndarray::Array1;

use crate::{EXIT_CHECK_FAILED, EXIT_CONFIG};

struct Outcome {
    label: String,
    error: Option<String>,
}

fn pass(label: impl Into<String>) -> Outcome {
    Outcome { label: label.into(), error: None }
}

fn failed(label: impl Into<String>, detail: impl Into<String>) -> Outcome {
    Outcome { label: label.into(), error: Some(detail.into()) }
}

/// Relative gap between a model's own gradient and central differences at
/// `x`, reduced over coordinates.
fn gradient_gap(model: &dyn ForwardModel, x: &Array1<f64>) -> Result<f64, String> {
    let own = model.grad(x.view()).map_err(|e| e.to_string())?;
    let fd = fd_gradient(model, x.view()).map_err(|e| e.to_string())?;
    let scale = own
        .iter()
        .map(|g| g.abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let gap = own
        .iter()
        .zip(fd.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(gap / scale)
}

fn check_gradient(name: &str, model: &dyn ForwardModel, x: Array1<f64>, tol: f64) -> Outcome {
    let label = format!("{name}: gradient vs central differences");
    match gradient_gap(model, &x) {
        Ok(gap) if gap < tol => pass(label),
        Ok(gap) => failed(label, format!("relative gap {gap:.3e} exceeds {tol:.0e}")),
        Err(e) => failed(label, e),
    }
}

fn check_step_refinement(name: &str, t_final: f64, steps: usize, x: Array1<f64>) -> Outcome {
    let label = format!("{name}: integration settled at catalog step count");
    let build = |s| -> Result<f64, String> {
        let params = CatalogParams {
            t_final: Some(t_final),
            step_count: Some(s),
            ..CatalogParams::default()
        };
        let model = models::by_name(name, &params).map_err(|e| e.to_string())?;
        model.eval(x.view()).map_err(|e| e.to_string())
    };
    match (build(steps), build(4 * steps)) {
        (Ok(coarse), Ok(fine)) => {
            let rel = (coarse - fine).abs() / fine.abs().max(1e-12);
            if rel < 1e-8 {
                pass(label)
            } else {
                failed(label, format!("quadrupling steps moved f by {rel:.3e} relative"))
            }
        }
        (Err(e), _) | (_, Err(e)) => failed(label, e),
    }
}

fn check_erfcx() -> Outcome {
    let label = "erfcx: scaled complement identity and tail bracket";
    for t in [0.0, 0.3, 0.5, 1.0, 2.0, 5.0] {
        let lhs = erfcx(t) * (-t * t).exp();
        let rhs = erfc(t);
        let rel = (lhs - rhs).abs() / rhs;
        if rel > 1e-13 {
            return failed(label, format!("identity off by {rel:.3e} at t = {t}"));
        }
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    for t in [1.0, 3.0, 10.0, 30.0, 100.0] {
        let v = erfcx(t);
        let hi = 1.0 / (sqrt_pi * t);
        let lo = 1.0 / (sqrt_pi * (t + 1.0 / t));
        if !(lo < v && v <= hi) {
            return failed(label, format!("erfcx({t}) = {v:.6e} outside ({lo:.6e}, {hi:.6e}]"));
        }
    }
    pass(label)
}

fn check_truncated_moments() -> Outcome {
    let label = "truncated moments: agree with direct quadrature on [-1, 2]";
    let y = TargetInterval::new(-1.0, 2.0).expect("valid interval");
    let tm = match truncated_normal_moments(0.0, 1.0, &y) {
        Ok(tm) => tm,
        Err(e) => return failed(label, e.to_string()),
    };
    // Simpson on the standard normal restricted to [-1, 2].
    let n = 20_000usize;
    let h = 3.0 / n as f64;
    let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut mass = 0.0;
    let mut mean = 0.0;
    let mut second = 0.0;
    for k in 0..=n {
        let z = -1.0 + k as f64 * h;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let p = w * pdf(z);
        mass += p;
        mean += p * z;
        second += p * z * z;
    }
    mean /= mass;
    second /= mass;
    let var = second - mean * mean;
    let mean_gap = (tm.nu_t - mean).abs();
    let var_gap = (tm.gamma_t_sq - var).abs();
    if mean_gap < 1e-10 && var_gap < 1e-10 {
        pass(label)
    } else {
        failed(label, format!("mean gap {mean_gap:.3e}, variance gap {var_gap:.3e}"))
    }
}

fn catalog_checks() -> Vec<Outcome> {
    let mut out = Vec::new();

    match models::by_name("affine", &CatalogParams { m: Some(2), ..CatalogParams::default() }) {
        Ok(model) => out.push(check_gradient("affine", model.as_ref(), Array1::ones(2), 1e-5)),
        Err(e) => out.push(failed("affine: construction", e.to_string())),
    }

    let rank1 = CatalogParams {
        m: Some(6),
        analytic_gradient: Some(true),
        ..CatalogParams::default()
    };
    match models::by_name("rank1", &rank1) {
        Ok(model) => out.push(check_gradient("rank1", model.as_ref(), Array1::ones(6), 1e-5)),
        Err(e) => out.push(failed("rank1: construction", e.to_string())),
    }

    match models::by_name("periodic", &CatalogParams::default()) {
        Ok(model) => {
            out.push(check_gradient("periodic", model.as_ref(), Array1::from_vec(vec![0.9, 1.3]), 1e-7))
        }
        Err(e) => out.push(failed("periodic: construction", e.to_string())),
    }

    match models::by_name("elliptic-fd", &CatalogParams { grid_n: Some(9), ..CatalogParams::default() }) {
        Ok(model) => {
            let mut x = Array1::zeros(81);
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = 0.3 * ((i % 7) as f64 / 7.0 - 0.4);
            }
            out.push(check_gradient("elliptic-fd", model.as_ref(), x, 1e-5));
        }
        Err(e) => out.push(failed("elliptic-fd: construction", e.to_string())),
    }

    out.push(check_step_refinement("reaction", 0.25, 1000, Array1::from_vec(vec![0.5])));
    out.push(check_step_refinement(
        "lorenz",
        0.1,
        1000,
        Array1::from_vec(vec![1.508870, -1.531271, 25.46091]),
    ));
    out.push(check_erfcx());
    out.push(check_truncated_moments());
    out
}

fn config_checks(path: &Path) -> Result<Vec<Outcome>, String> {
    let cfg = RunConfig::load(path).map_err(|e| e.to_string())?;
    let model = cfg.build_model().map_err(|e| e.to_string())?;
    let nominal = cfg.build_nominal(model.dim()).map_err(|e| e.to_string())?;
    cfg.build_target().map_err(|e| e.to_string())?;

    let mut out = Vec::new();
    let mean = match &nominal {
        Density::Gaussian(g) => g.mean().to_owned(),
        Density::Mixture(m) => m.components()[0].mean().to_owned(),
    };
    let label = format!("{}: eval finite at the nominal mean", model.name());
    match model.eval(mean.view()) {
        Ok(f) if f.is_finite() => out.push(pass(label)),
        Ok(f) => out.push(failed(label, format!("got {f}"))),
        Err(e) => out.push(failed(label, e.to_string())),
    }
    out.push(check_gradient(model.name(), model.as_ref(), mean, 1e-4));
    Ok(out)
}

pub fn run(config: Option<&Path>, quiet: bool) -> ExitCode {
    let outcomes = match config {
        Some(path) => match config_checks(path) {
            Ok(o) => o,
            Err(message) => {
                eprintln!("error: {message}");
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => catalog_checks(),
    };
    let mut failures = 0usize;
    for o in &outcomes {
        match &o.error {
            None => {
                if !quiet {
                    println!("ok   {}", o.label);
                }
            }
            Some(detail) => {
                failures += 1;
                println!("FAIL {}: {detail}", o.label);
            }
        }
    }
    if failures == 0 {
        if !quiet {
            println!("all {} checks passed", outcomes.len());
        }
        ExitCode::SUCCESS
    } else {
        println!("{failures} of {} checks failed", outcomes.len());
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
