//! Monte Carlo and importance-sampling estimators for the target probability,
//! plus the pipeline that assembles the importance density from tuned
//! pseudo-data and Laplace approximations of the corresponding posteriors.
//!
//! Sampling is deterministic for a given seed regardless of how work is split
//! across threads: sample `i` always draws from stream `base + i` of a
//! ChaCha8 generator keyed by the seed, and per-sample values are reduced in
//! index order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::gaussian::{Density, GaussianDensity, GaussianMixture};
use crate::inverse::{find_map, laplace_approx, PseudoLikelihood};
use crate::models::ForwardModel;
use crate::tuning::{linearize_at_midpoint, TunedParams};
use crate::{Error, Result, TargetInterval};

/// Samples processed per parallel work item. Has no effect on the estimate,
/// only on scheduling granularity.
const CHUNK: usize = 1024;

/// Smallest per-component sample budget when a mixture nominal splits the
/// total across components.
const MIN_COMPONENT_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MC")]
    Mc,
    #[serde(rename = "BIMC")]
    Bimc,
}

/// Sample budget and seed for one estimator run.
#[derive(Debug, Clone, Copy)]
pub struct SampleOpts {
    pub n_samples: usize,
    pub seed: u64,
}

/// Optional pins for the pseudo-data parameters. A pinned value replaces the
/// tuned one; anything left `None` comes out of the KL minimization.
#[derive(Debug, Clone, Copy, Default)]
pub struct TuningOverrides {
    pub y: Option<f64>,
    pub sigma_sq: Option<f64>,
}

/// Importance-density construction options.
#[derive(Debug, Clone, Copy)]
pub struct BimcOpts {
    /// Number of pseudo-data points. One point uses the tuned `y*`; more
    /// spread evenly over the target interval, endpoints included.
    pub n_pseudo: usize,
    pub overrides: TuningOverrides,
}

impl Default for BimcOpts {
    fn default() -> Self {
        Self { n_pseudo: 1, overrides: TuningOverrides::default() }
    }
}

/// Outcome of one estimator run. `acceptance_ratio * n_samples` is always an
/// integer (`n_hits`), and for plain Monte Carlo `mu_hat` equals the
/// acceptance ratio bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    pub mu_hat: f64,
    /// Estimated relative root-mean-square error. `None` when no sample hit
    /// the interval, where the estimator carries no error information.
    pub rel_rmse_hat: Option<f64>,
    /// Fraction of samples whose model output landed in the interval.
    pub acceptance_ratio: f64,
    /// Effective sample size `(sum w)^2 / sum w^2`, at most `n_samples`.
    pub ess: f64,
    pub n_samples: usize,
    pub n_hits: u64,
    /// Forward-model evaluations consumed by the whole run, tuning and MAP
    /// solves included, audited against the model's own counter.
    pub n_model_evals: u64,
    /// Pseudo-data points behind the importance density (zero for MC).
    pub n_pseudo: usize,
    pub seed: u64,
    /// Tuning record when a single importance density was built for this run.
    pub tuned: Option<TunedParams>,
    /// Set when the estimate is degenerate, for example when no sample hit.
    pub degenerate: Option<String>,
    /// Per-component reports when a mixture nominal was split.
    pub components: Vec<EstimateReport>,
}

fn check_run_dims(model: &dyn ForwardModel, density: &Density, n_samples: usize) -> Result<()> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            reason: "must be at least 1".into(),
        });
    }
    if density.dim() != model.dim() {
        return Err(Error::DimMismatch { expected: model.dim(), got: density.dim() });
    }
    Ok(())
}

fn at_sample(model: &dyn ForwardModel, index: usize, err: Error) -> Error {
    match err {
        Error::Model { model, reason } => {
            Error::Model { model, reason: format!("sample {index}: {reason}") }
        }
        other => Error::Model {
            model: model.name().to_string(),
            reason: format!("sample {index}: {other}"),
        },
    }
}

/// Count samples of `p` that the model maps into the interval. Streams are
/// indexed from zero; the count is an exact integer so the reduction order
/// cannot matter.
fn count_hits(
    model: &dyn ForwardModel,
    p: &Density,
    y: &TargetInterval,
    seed: u64,
    n: usize,
) -> Result<u64> {
    let master = ChaCha8Rng::seed_from_u64(seed);
    let hits = AtomicU64::new(0);
    let n_chunks = n.div_ceil(CHUNK);
    let failures: Vec<(usize, Error)> = (0..n_chunks)
        .into_par_iter()
        .filter_map(|c| {
            let mut local = 0u64;
            for i in c * CHUNK..n.min((c + 1) * CHUNK) {
                let mut rng = master.clone();
                rng.set_stream(i as u64);
                let x = p.sample(&mut rng);
                match model.eval(x.view()) {
                    Ok(f) => local += u64::from(y.contains(f)),
                    Err(e) => return Some((i, e)),
                }
            }
            hits.fetch_add(local, Ordering::Relaxed);
            None
        })
        .collect();
    if let Some((i, e)) = failures.into_iter().min_by_key(|(i, _)| *i) {
        return Err(at_sample(model, i, e));
    }
    Ok(hits.load(Ordering::Relaxed))
}

/// Draw `n` samples of `q` starting at stream `base + i` and record the
/// importance weight `1_Y(f(x)) p(x) / q(x)` for each, in sample order.
fn importance_weights(
    model: &dyn ForwardModel,
    p: &Density,
    q: &Density,
    y: &TargetInterval,
    seed: u64,
    stream_base: u64,
    n: usize,
) -> Result<(Vec<f64>, u64)> {
    let master = ChaCha8Rng::seed_from_u64(seed);
    let hits = AtomicU64::new(0);
    let mut weights = vec![0.0; n];
    let failures: Vec<(usize, Error)> = weights
        .par_chunks_mut(CHUNK)
        .enumerate()
        .filter_map(|(c, slot)| {
            let mut local = 0u64;
            for (j, w) in slot.iter_mut().enumerate() {
                let i = c * CHUNK + j;
                let mut rng = master.clone();
                rng.set_stream(stream_base + i as u64);
                let x = q.sample(&mut rng);
                let f = match model.eval(x.view()) {
                    Ok(f) => f,
                    Err(e) => return Some((i, e)),
                };
                if y.contains(f) {
                    local += 1;
                    // Weights near the tuned density are O(1), so direct
                    // exponentiation of the log ratio is safe here.
                    let log_w = match (p.logpdf(x.view()), q.logpdf(x.view())) {
                        (Ok(lp), Ok(lq)) => lp - lq,
                        (Err(e), _) | (_, Err(e)) => return Some((i, e)),
                    };
                    *w = log_w.exp();
                }
            }
            hits.fetch_add(local, Ordering::Relaxed);
            None
        })
        .collect();
    if let Some((i, e)) = failures.into_iter().min_by_key(|(i, _)| *i) {
        return Err(at_sample(model, i, e));
    }
    Ok((weights, hits.load(Ordering::Relaxed)))
}

/// Effective sample size from raw weights, normalized by the largest weight
/// so squaring cannot overflow.
fn effective_sample_size(weights: &[f64]) -> f64 {
    let w_max = weights.iter().fold(0.0f64, |a, &b| a.max(b));
    if w_max == 0.0 {
        return 0.0;
    }
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for &w in weights {
        let r = w / w_max;
        s1 += r;
        s2 += r * r;
    }
    s1 * s1 / s2
}

/// Plain Monte Carlo: the acceptance ratio is the estimate.
pub fn mc_estimate(
    model: &dyn ForwardModel,
    nominal: &Density,
    y: &TargetInterval,
    opts: &SampleOpts,
) -> Result<EstimateReport> {
    check_run_dims(model, nominal, opts.n_samples)?;
    let evals_before = model.eval_count();
    let hits = count_hits(model, nominal, y, opts.seed, opts.n_samples)?;
    let n = opts.n_samples as f64;
    let mu_hat = hits as f64 / n;
    let rel_rmse_hat =
        (hits > 0).then(|| (mu_hat * (1.0 - mu_hat) / (n * mu_hat * mu_hat)).sqrt());
    Ok(EstimateReport {
        method: Method::Mc,
        mu_hat,
        rel_rmse_hat,
        acceptance_ratio: hits as f64 / n,
        ess: hits as f64,
        n_samples: opts.n_samples,
        n_hits: hits,
        n_model_evals: model.eval_count() - evals_before,
        n_pseudo: 0,
        seed: opts.seed,
        tuned: None,
        degenerate: (hits == 0).then(|| "no samples hit the target interval".to_string()),
        components: Vec::new(),
    })
}

struct IsRun {
    method: Method,
    n_pseudo: usize,
    tuned: Option<TunedParams>,
    stream_base: u64,
    evals_before: u64,
}

fn is_run(
    model: &dyn ForwardModel,
    nominal: &Density,
    q: &Density,
    y: &TargetInterval,
    opts: &SampleOpts,
    run: IsRun,
) -> Result<EstimateReport> {
    check_run_dims(model, nominal, opts.n_samples)?;
    if q.dim() != model.dim() {
        return Err(Error::DimMismatch { expected: model.dim(), got: q.dim() });
    }
    let (weights, hits) =
        importance_weights(model, nominal, q, y, opts.seed, run.stream_base, opts.n_samples)?;
    let n = opts.n_samples as f64;
    let mu_hat = weights.iter().sum::<f64>() / n;
    let rel_rmse_hat = if hits > 0 && mu_hat > 0.0 && opts.n_samples > 1 {
        let mut ss = 0.0;
        for &w in &weights {
            ss += (w - mu_hat) * (w - mu_hat);
        }
        let sample_var = ss / (n - 1.0);
        Some((sample_var / (n * mu_hat * mu_hat)).sqrt())
    } else {
        None
    };
    Ok(EstimateReport {
        method: run.method,
        mu_hat,
        rel_rmse_hat,
        acceptance_ratio: hits as f64 / n,
        ess: effective_sample_size(&weights),
        n_samples: opts.n_samples,
        n_hits: hits,
        n_model_evals: model.eval_count() - run.evals_before,
        n_pseudo: run.n_pseudo,
        seed: opts.seed,
        tuned: run.tuned,
        degenerate: (hits == 0).then(|| "no samples hit the target interval".to_string()),
        components: Vec::new(),
    })
}

/// Importance sampling with a caller-supplied density `q`. The weight of a
/// sample outside the interval is zero; inside it is `p(x)/q(x)`.
pub fn is_estimate(
    model: &dyn ForwardModel,
    nominal: &Density,
    q: &Density,
    y: &TargetInterval,
    opts: &SampleOpts,
) -> Result<EstimateReport> {
    let n_pseudo = match q {
        Density::Gaussian(_) => 1,
        Density::Mixture(m) => m.components().len(),
    };
    let run = IsRun {
        method: Method::Bimc,
        n_pseudo,
        tuned: None,
        stream_base: 0,
        evals_before: model.eval_count(),
    };
    is_run(model, nominal, q, y, opts, run)
}

/// Tune the pseudo-data parameters and build the importance density: an
/// equal-weight mixture of Laplace approximations, one per pseudo-data
/// point, each MAP solve warm-started from the midpoint solve.
pub fn build_bimc_density(
    model: &dyn ForwardModel,
    prior: &GaussianDensity,
    y: &TargetInterval,
    n_pseudo: usize,
    overrides: &TuningOverrides,
) -> Result<(GaussianMixture, TunedParams)> {
    if n_pseudo == 0 {
        return Err(Error::InvalidParameter {
            name: "n_pseudo",
            reason: "must be at least 1".into(),
        });
    }
    if overrides.y.is_some() && n_pseudo > 1 {
        return Err(Error::InvalidParameter {
            name: "overrides.y",
            reason: "pinning the pseudo-data point requires n_pseudo = 1".into(),
        });
    }
    let mut tuned = linearize_at_midpoint(model, prior, y)?;
    if let Some(y_pin) = overrides.y {
        if !y_pin.is_finite() {
            return Err(Error::InvalidParameter {
                name: "overrides.y",
                reason: format!("must be finite, got {y_pin}"),
            });
        }
        tuned.y_star = y_pin;
    }
    if let Some(s_pin) = overrides.sigma_sq {
        if !(s_pin.is_finite() && s_pin > 0.0) {
            return Err(Error::InvalidParameter {
                name: "overrides.sigma_sq",
                reason: format!("must be positive and finite, got {s_pin}"),
            });
        }
        tuned.sigma_star_sq = s_pin;
    }
    let points: Vec<f64> = if n_pseudo == 1 {
        vec![tuned.y_star]
    } else {
        (0..n_pseudo)
            .map(|k| y.y_min() + y.width() * k as f64 / (n_pseudo - 1) as f64)
            .collect()
    };
    let mut components = Vec::with_capacity(n_pseudo);
    for y_k in points {
        let lik = PseudoLikelihood::new(y_k, tuned.sigma_star_sq)?;
        let map = find_map(model, prior, &lik, Some(tuned.x_map_mid.view()))?;
        if !map.report.converged {
            return Err(Error::MapNotConverged {
                iterations: map.report.iterations,
                grad_norm: map.report.grad_norm,
            });
        }
        components.push(laplace_approx(model, prior, &lik, map)?.density);
    }
    let weights = vec![1.0 / n_pseudo as f64; n_pseudo];
    Ok((GaussianMixture::new(components, weights)?, tuned))
}

fn gaussian_bimc(
    model: &dyn ForwardModel,
    prior: &GaussianDensity,
    y: &TargetInterval,
    bimc: &BimcOpts,
    opts: &SampleOpts,
    stream_base: u64,
) -> Result<EstimateReport> {
    let evals_before = model.eval_count();
    let (q, tuned) = build_bimc_density(model, prior, y, bimc.n_pseudo, &bimc.overrides)?;
    let p = Density::from(prior.clone());
    let q = Density::from(q);
    let run = IsRun {
        method: Method::Bimc,
        n_pseudo: bimc.n_pseudo,
        tuned: Some(tuned),
        stream_base,
        evals_before,
    };
    is_run(model, &p, &q, y, opts, run)
}

/// The full estimator: tune, build the importance density, sample. A mixture
/// nominal is handled component by component with the sample budget split in
/// proportion to the component weights, and the partial estimates recombined
/// with those weights.
pub fn bimc_estimate(
    model: &dyn ForwardModel,
    nominal: &Density,
    y: &TargetInterval,
    bimc: &BimcOpts,
    opts: &SampleOpts,
) -> Result<EstimateReport> {
    check_run_dims(model, nominal, opts.n_samples)?;
    let mix = match nominal {
        Density::Gaussian(g) => return gaussian_bimc(model, g, y, bimc, opts, 0),
        Density::Mixture(m) => m,
    };
    let active: Vec<(usize, &GaussianDensity, f64)> = mix
        .components()
        .iter()
        .zip(mix.weights())
        .enumerate()
        .filter(|(_, (_, &w))| w > 0.0)
        .map(|(i, (c, &w))| (i, c, w))
        .collect();
    if let [(_, component, _)] = active[..] {
        return gaussian_bimc(model, component, y, bimc, opts, 0);
    }

    let mut stream_base = 0u64;
    let mut parts: Vec<(usize, f64, EstimateReport)> = Vec::with_capacity(active.len());
    for &(index, component, weight) in &active {
        let n_i = ((opts.n_samples as f64 * weight).round() as usize).max(MIN_COMPONENT_SAMPLES);
        let sub_opts = SampleOpts { n_samples: n_i, seed: opts.seed };
        let report = gaussian_bimc(model, component, y, bimc, &sub_opts, stream_base)
            .map_err(|e| Error::Component { index, source: Box::new(e) })?;
        stream_base += n_i as u64;
        parts.push((index, weight, report));
    }

    let mu_hat: f64 = parts.iter().map(|(_, w, r)| w * r.mu_hat).sum();
    let variance: f64 = parts
        .iter()
        .map(|(_, w, r)| match r.rel_rmse_hat {
            Some(rel) => (w * rel * r.mu_hat).powi(2),
            None => 0.0,
        })
        .sum();
    let n_samples: usize = parts.iter().map(|(_, _, r)| r.n_samples).sum();
    let n_hits: u64 = parts.iter().map(|(_, _, r)| r.n_hits).sum();
    let degenerate = parts
        .iter()
        .find_map(|(i, _, r)| r.degenerate.as_ref().map(|d| format!("component {i}: {d}")));
    Ok(EstimateReport {
        method: Method::Bimc,
        mu_hat,
        rel_rmse_hat: (mu_hat > 0.0).then(|| variance.sqrt() / mu_hat),
        acceptance_ratio: n_hits as f64 / n_samples as f64,
        ess: parts.iter().map(|(_, _, r)| r.ess).sum(),
        n_samples,
        n_hits,
        n_model_evals: parts.iter().map(|(_, _, r)| r.n_model_evals).sum(),
        n_pseudo: bimc.n_pseudo,
        seed: opts.seed,
        tuned: None,
        degenerate,
        components: parts.into_iter().map(|(_, _, r)| r).collect(),
    })
}
