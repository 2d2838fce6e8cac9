//! Selection of the pseudo-data point and pseudo-likelihood variance.
//!
//! Linearizing the model around a preliminary MAP point turns the
//! pushforward of the nominal density into a scalar Gaussian. Among all
//! sampling densities reachable by the pseudo-posterior construction, the
//! one closest (in KL divergence) to the ideal zero-variance density has a
//! closed form: match the first two moments of that Gaussian truncated to
//! the target interval.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::gaussian::{erf, erfc, truncated_normal_moments, GaussianDensity, TruncatedMoments};
use crate::inverse::{find_map, PseudoLikelihood};
use crate::models::ForwardModel;
use crate::{Error, Result, TargetInterval};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Scalar Gaussian law of the linearized observable under the nominal
/// density: `v'x + beta` with `x ~ N(x0, cov0)`.
#[derive(Debug, Clone, Copy)]
pub struct PushforwardMoments {
    pub nu: f64,
    pub gamma_sq: f64,
}

/// Everything the tuning stage hands to the sampler: the optimal
/// pseudo-observation, its variance, the linearization it came from, and
/// the analytic probability of the linearized event.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TunedParams {
    pub y_star: f64,
    pub sigma_star_sq: f64,
    /// Probability of the target interval under the linearized pushforward.
    pub mu_lin: f64,
    /// Gradient of the model at the preliminary MAP point.
    pub v: Array1<f64>,
    /// Offset making `v'x + beta` the tangent model there.
    pub beta: f64,
    pub x_map_mid: Array1<f64>,
    /// True when the closed form degenerated and a grid search picked the
    /// parameters instead.
    pub used_fallback: bool,
}

/// Moments of the linearized pushforward `N(v'x0 + beta, v' cov0 v)`.
pub fn pushforward_moments(
    v: ArrayView1<f64>,
    beta: f64,
    prior: &GaussianDensity,
) -> Result<PushforwardMoments> {
    if v.len() != prior.dim() {
        return Err(Error::DimMismatch { expected: prior.dim(), got: v.len() });
    }
    if v.iter().all(|c| *c == 0.0) {
        return Err(Error::ZeroDirection);
    }
    let nu = v.dot(&prior.mean()) + beta;
    let gamma_sq = prior.cov_quadratic(v);
    if !(gamma_sq > 0.0) {
        return Err(Error::ZeroDirection);
    }
    Ok(PushforwardMoments { nu, gamma_sq })
}

/// Probability that the linearized observable lands in `y`, evaluated in
/// whichever tail representation avoids cancellation.
pub fn linearized_probability(pm: &PushforwardMoments, y: &TargetInterval) -> Result<f64> {
    if !(pm.gamma_sq > 0.0) || !pm.gamma_sq.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma_sq",
            reason: format!("pushforward variance must be positive, got {}", pm.gamma_sq),
        });
    }
    let g = pm.gamma_sq.sqrt();
    let a = (y.y_min() - pm.nu) / g;
    let b = (y.y_max() - pm.nu) / g;
    let p = if a >= 0.0 {
        0.5 * (erfc(a * FRAC_1_SQRT_2) - erfc(b * FRAC_1_SQRT_2))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * FRAC_1_SQRT_2) - erfc(-a * FRAC_1_SQRT_2))
    } else {
        0.5 * (erf(b * FRAC_1_SQRT_2) - erf(a * FRAC_1_SQRT_2))
    };
    if !(p > 0.0) {
        return Err(Error::TailOverflow);
    }
    Ok(p.min(1.0))
}

/// Slide `base` along the pushforward axis, keeping its width, until its
/// linearized probability equals `target_mu`. The interval moves into
/// whichever tail its midpoint already occupies (below or above `pm.nu`), by
/// bisection on the standardized near edge. Used to recreate a configuration
/// at a prescribed rarity level.
pub fn place_interval(
    pm: &PushforwardMoments,
    base: &TargetInterval,
    target_mu: f64,
) -> Result<TargetInterval> {
    if !(target_mu > 0.0 && target_mu < 0.5) {
        return Err(Error::InvalidParameter {
            name: "target_mu",
            reason: format!("placement target must be in (0, 0.5), got {target_mu}"),
        });
    }
    let g = pm.gamma_sq.sqrt();
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::ZeroDirection);
    }
    let width = base.width();
    let dz = width / g;
    // P(z) = Phi(z + dz) - Phi(z) decreases monotonically on z >= 0 from
    // Phi(dz) - 1/2 toward zero; z is the standardized distance from nu to
    // the interval edge nearest to it.
    let prob =
        |z: f64| 0.5 * (erfc(z * FRAC_1_SQRT_2) - erfc((z + dz) * FRAC_1_SQRT_2));
    if prob(0.0) < target_mu {
        return Err(Error::InvalidParameter {
            name: "target_mu",
            reason: format!(
                "interval of width {width} cannot reach probability {target_mu} in the tail"
            ),
        });
    }
    let (mut lo, mut hi) = (0.0f64, 45.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if prob(mid) > target_mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    if 0.5 * (base.y_min() + base.y_max()) < pm.nu {
        TargetInterval::new(pm.nu - z * g - width, pm.nu - z * g)
    } else {
        TargetInterval::new(pm.nu + z * g, pm.nu + z * g + width)
    }
}

/// Shift `base` into the pushforward tail until the linearized probability
/// measured at the shifted interval's own midpoint MAP matches `target_mu`.
///
/// Nonlinear models bend the pushforward as the interval moves, so a single
/// placement against the base linearization can miss the requested level by
/// orders of magnitude. Re-linearizing at each candidate and placing again
/// closes the gap; the loop stops once the self-consistent level is within
/// 0.05 decades of the target.
pub fn place_at_level(
    model: &dyn ForwardModel,
    prior: &GaussianDensity,
    base: &TargetInterval,
    target_mu: f64,
) -> Result<TargetInterval> {
    let tuned = linearize_at_midpoint(model, prior, base)?;
    let mut pm = pushforward_moments(tuned.v.view(), tuned.beta, prior)?;
    let mut y = *base;
    for _ in 0..16 {
        y = place_interval(&pm, &y, target_mu)?;
        let tuned = linearize_at_midpoint(model, prior, &y)?;
        if (tuned.mu_lin / target_mu).log10().abs() < 0.05 {
            return Ok(y);
        }
        pm = pushforward_moments(tuned.v.view(), tuned.beta, prior)?;
    }
    Err(Error::InvalidParameter {
        name: "target_mu",
        reason: format!(
            "interval placement did not settle at level {target_mu:.3e}; \
             the pushforward changes too quickly along the tail"
        ),
    })
}

/// KL divergence from the pseudo-posterior pushforward to the ideal
/// (truncated) density, as a function of the pseudo-data `y` and variance
/// `sigma_sq`. `mu` only shifts the value by `-ln mu`; it does not move the
/// minimizer.
pub fn kl_divergence(
    y: f64,
    sigma_sq: f64,
    pm: &PushforwardMoments,
    tm: &TruncatedMoments,
    mu: f64,
) -> f64 {
    let misfit = ((y - tm.nu_t).powi(2) + tm.gamma_t_sq) / (2.0 * sigma_sq);
    let pull = (y - pm.nu).powi(2) / (2.0 * (sigma_sq + pm.gamma_sq));
    let volume = 0.5 * (sigma_sq / (sigma_sq + pm.gamma_sq)).ln();
    misfit - pull + volume - mu.ln()
}

const FALLBACK_GRID: usize = 50;
const LOG10_SIGMA_RANGE: (f64, f64) = (-6.0, 2.0);

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if hi - lo < 1e-12 * (1.0 + lo.abs() + hi.abs()) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Last-resort minimizer for near-total truncation, where the closed form
/// divides by (almost) zero: coarse grid over `y` in the interval and
/// `log10 sigma_sq`, then coordinate-wise golden-section refinement.
fn grid_minimum(
    pm: &PushforwardMoments,
    tm: &TruncatedMoments,
    y: &TargetInterval,
    mu: f64,
) -> (f64, f64) {
    let (t_lo, t_hi) = LOG10_SIGMA_RANGE;
    let dy = y.width() / (FALLBACK_GRID - 1) as f64;
    let dt = (t_hi - t_lo) / (FALLBACK_GRID - 1) as f64;
    let mut best = (f64::INFINITY, y.mid(), 0.5 * (t_lo + t_hi));
    for i in 0..FALLBACK_GRID {
        let yy = y.y_min() + dy * i as f64;
        for j in 0..FALLBACK_GRID {
            let t = t_lo + dt * j as f64;
            let d = kl_divergence(yy, 10f64.powf(t), pm, tm, mu);
            if d < best.0 {
                best = (d, yy, t);
            }
        }
    }
    let (mut yy, mut t) = (best.1, best.2);
    for _ in 0..3 {
        yy = golden_min(
            |z| kl_divergence(z, 10f64.powf(t), pm, tm, mu),
            (yy - dy).max(y.y_min()),
            (yy + dy).min(y.y_max()),
        );
        t = golden_min(
            |z| kl_divergence(yy, 10f64.powf(z), pm, tm, mu),
            (t - dt).max(t_lo),
            (t + dt).min(t_hi),
        );
    }
    (yy, 10f64.powf(t))
}

/// KL-optimal pseudo-data and variance. The closed form
///
/// `y* = (nu_T gamma^2 - nu gamma_T^2) / (gamma^2 - gamma_T^2)`,
/// `sigma*^2 = gamma_T^2 gamma^2 / (gamma^2 - gamma_T^2)`
///
/// is exact whenever the truncated variance is strictly below the
/// pushforward variance, which truncation guarantees in theory; when the
/// gap closes numerically the grid fallback takes over and the last tuple
/// element reports it.
pub fn optimal_params(
    pm: &PushforwardMoments,
    tm: &TruncatedMoments,
    y: &TargetInterval,
    mu: f64,
) -> (f64, f64, bool) {
    let gap = pm.gamma_sq - tm.gamma_t_sq;
    if gap > 1e-12 * pm.gamma_sq {
        let y_star = (tm.nu_t * pm.gamma_sq - pm.nu * tm.gamma_t_sq) / gap;
        let sigma_star_sq = tm.gamma_t_sq * pm.gamma_sq / gap;
        (y_star, sigma_star_sq, false)
    } else {
        let (y_star, sigma_star_sq) = grid_minimum(pm, tm, y, mu);
        (y_star, sigma_star_sq, true)
    }
}

/// The full tuning pipeline. A preliminary MAP solve targets the interval
/// midpoint with noise scaled to the interval width (`sigma_0 = width/10`),
/// the model is linearized there, and the optimal parameters follow from
/// the linearized pushforward.
pub fn linearize_at_midpoint(
    model: &dyn ForwardModel,
    prior: &GaussianDensity,
    y: &TargetInterval,
) -> Result<TunedParams> {
    let sigma0 = 0.1 * y.width();
    let lik = PseudoLikelihood::new(y.mid(), sigma0 * sigma0)?;
    let map = find_map(model, prior, &lik, None)?;
    if !map.report.converged {
        return Err(Error::MapNotConverged {
            iterations: map.report.iterations,
            grad_norm: map.report.grad_norm,
        });
    }
    let v = model.grad(map.point.view())?;
    let f_mid = model.eval(map.point.view())?;
    let beta = f_mid - v.dot(&map.point);
    let pm = pushforward_moments(v.view(), beta, prior)?;
    let mu_lin = linearized_probability(&pm, y)?;
    let tm = truncated_normal_moments(pm.nu, pm.gamma_sq, y)?;
    let (y_star, sigma_star_sq, used_fallback) = optimal_params(&pm, &tm, y, mu_lin);
    Ok(TunedParams {
        y_star,
        sigma_star_sq,
        mu_lin,
        v,
        beta,
        x_map_mid: map.point,
        used_fallback,
    })
}
