//! The fictitious inverse problem behind the importance-sampling density.
//!
//! A scalar pseudo-observation `y` with noise variance `sigma_sq` is
//! combined with the nominal density acting as prior. The posterior mode
//! (MAP point) and the Gauss-Newton Hessian there define a Gaussian that
//! concentrates near the preimage of `y`, which is what the sampler needs.

use ndarray::{Array1, Array2, ArrayView1};

use crate::gaussian::GaussianDensity;
use crate::models::ForwardModel;
use crate::{Error, Result};

/// Scalar Gaussian pseudo-likelihood `y | x ~ N(f(x), sigma_sq)`.
#[derive(Debug, Clone, Copy)]
pub struct PseudoLikelihood {
    pub y: f64,
    pub sigma_sq: f64,
}

impl PseudoLikelihood {
    pub fn new(y: f64, sigma_sq: f64) -> Result<Self> {
        if !y.is_finite() {
            return Err(Error::InvalidParameter {
                name: "y",
                reason: format!("pseudo-data must be finite, got {y}"),
            });
        }
        if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sigma_sq",
                reason: format!("pseudo-likelihood variance must be positive, got {sigma_sq}"),
            });
        }
        Ok(Self { y, sigma_sq })
    }
}

/// What the MAP optimizer did, kept alongside every downstream result so a
/// flaky solve is visible instead of silently baked into the estimate.
#[derive(Debug, Clone, Copy)]
pub struct SolverReport {
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

/// MAP point plus the solver trace that produced it.
#[derive(Debug, Clone)]
pub struct MapResult {
    pub point: Array1<f64>,
    pub report: SolverReport,
}

/// Gaussian (Laplace) approximation of the pseudo-posterior: mean at the
/// MAP point, covariance the inverse Gauss-Newton Hessian.
#[derive(Debug)]
pub struct LaplaceApprox {
    pub map_point: Array1<f64>,
    pub gn_hessian: Array2<f64>,
    pub density: GaussianDensity,
    pub solver_report: SolverReport,
}

/// Negative log posterior up to the prior's normalizing constant:
/// `(y - f(x))^2 / (2 sigma_sq) + (x - x0)' cov0^-1 (x - x0) / 2`.
pub fn neg_log_posterior(
    model: &dyn ForwardModel,
    prior: &GaussianDensity,
    lik: &PseudoLikelihood,
    x: ArrayView1<f64>,
) -> Result<f64> {
    if prior.dim() != model.dim() {
        return Err(Error::DimMismatch { expected: model.dim(), got: prior.dim() });
    }
    let residual = lik.y - model.eval(x)?;
    let diff = &x - &prior.mean();
    let quad = diff.dot(&prior.solve_cov(diff.view()));
    Ok(residual * residual / (2.0 * lik.sigma_sq) + 0.5 * quad)
}

/// Exact gradient of [`neg_log_posterior`] given the model's gradient:
/// `-(y - f(x)) / sigma_sq * grad f(x) + cov0^-1 (x - x0)`.
pub fn nlp_gradient(
    model: &dyn ForwardModel,
    prior: &GaussianDensity,
    lik: &PseudoLikelihood,
    x: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    if prior.dim() != model.dim() {
        return Err(Error::DimMismatch { expected: model.dim(), got: prior.dim() });
    }
    let residual = lik.y - model.eval(x)?;
    let g = model.grad(x)?;
    let diff = &x - &prior.mean();
    Ok(prior.solve_cov(diff.view()) - (residual / lik.sigma_sq) * &g)
}

const MAX_ITERATIONS: usize = 500;
const GRAD_TOL: f64 = 1e-8;
const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

fn clamp_to_domain(x: &mut Array1<f64>, domain: &Option<(Array1<f64>, Array1<f64>)>) {
    if let Some((lo, hi)) = domain {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = xi.clamp(lo[i], hi[i]);
        }
    }
}

/// First-order optimality measure that respects bound constraints: the norm
/// of `P(x - g) - x`, which reduces to `|g|` at interior points.
fn stationarity(x: &Array1<f64>, g: &Array1<f64>, domain: &Option<(Array1<f64>, Array1<f64>)>) -> f64 {
    let mut step = x - g;
    clamp_to_domain(&mut step, domain);
    step -= x;
    step.dot(&step).sqrt()
}

/// Minimize the negative log posterior by BFGS with a backtracking Armijo
/// line search, projecting onto the model's box domain when it has one.
/// Non-convergence is reported in the result, not raised: callers near a
/// chaotic or flat region decide for themselves whether to proceed.
pub fn find_map(
    model: &dyn ForwardModel,
    prior: &GaussianDensity,
    lik: &PseudoLikelihood,
    x_init: Option<ArrayView1<f64>>,
) -> Result<MapResult> {
    let m = model.dim();
    if prior.dim() != m {
        return Err(Error::DimMismatch { expected: m, got: prior.dim() });
    }
    let mut x = match x_init {
        Some(v) => {
            if v.len() != m {
                return Err(Error::DimMismatch { expected: m, got: v.len() });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "x_init",
                    reason: "starting point must be finite".into(),
                });
            }
            v.to_owned()
        }
        None => prior.mean().to_owned(),
    };
    let domain = model.domain();
    clamp_to_domain(&mut x, &domain);

    let mut fval = neg_log_posterior(model, prior, lik, x.view())?;
    let mut g = nlp_gradient(model, prior, lik, x.view())?;
    let tol = GRAD_TOL * stationarity(&x, &g, &domain).max(1.0);

    // The prior covariance is the natural initial inverse metric: the
    // Gauss-Newton Hessian is Sigma_0^-1 plus a rank-one misfit term, so
    // BFGS only has to learn the correction along the model gradient.
    let mut h_inv = prior.cov().to_owned();
    let mut rescale_pending = false;
    let mut fresh_metric = true;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        if stationarity(&x, &g, &domain) <= tol {
            converged = true;
            break;
        }
        let mut direction = -h_inv.dot(&g);
        if direction.dot(&g) >= 0.0 {
            // Curvature information went stale; restart from steepest descent.
            h_inv = Array2::eye(m);
            rescale_pending = true;
            fresh_metric = true;
            direction = -g.clone();
        }

        let mut accepted: Option<(Array1<f64>, Array1<f64>, f64, Option<Array1<f64>>)> = None;
        let mut alpha = 1.0;
        for _ in 0..MAX_HALVINGS {
            let mut trial = &x + &(alpha * &direction);
            clamp_to_domain(&mut trial, &domain);
            let step = &trial - &x;
            let slope = g.dot(&step);
            if slope < 0.0 {
                // Trial objective failures (model blowup off the line) just
                // shrink the step instead of aborting the solve.
                if let Ok(ft) = neg_log_posterior(model, prior, lik, trial.view()) {
                    if ft.is_finite() && ft <= fval + ARMIJO_C * slope {
                        accepted = Some((trial, step, ft, None));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }

        if accepted.is_none() {
            if !fresh_metric {
                // A stale metric can shrink the step below floating-point
                // resolution; retry the iteration from a fresh one.
                h_inv = Array2::eye(m);
                rescale_pending = true;
                fresh_metric = true;
                iterations += 1;
                continue;
            }
            // Terminal stall: near the minimum the objective is flat to
            // rounding while the gradient still resolves the descent
            // direction, so accept a step that strictly shrinks the
            // stationarity measure instead.
            let snorm = stationarity(&x, &g, &domain);
            let mut alpha = 1.0;
            for _ in 0..MAX_HALVINGS {
                let mut trial = &x + &(alpha * &direction);
                clamp_to_domain(&mut trial, &domain);
                let step = &trial - &x;
                if step.iter().all(|c| *c == 0.0) {
                    break;
                }
                if let (Ok(ft), Ok(gt)) = (
                    neg_log_posterior(model, prior, lik, trial.view()),
                    nlp_gradient(model, prior, lik, trial.view()),
                ) {
                    if ft.is_finite() && stationarity(&trial, &gt, &domain) < 0.999 * snorm {
                        accepted = Some((trial, step, ft, Some(gt)));
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }

        let Some((x_new, s, f_new, g_cached)) = accepted else {
            break;
        };
        fresh_metric = false;

        let g_new = match g_cached {
            Some(gt) => gt,
            None => nlp_gradient(model, prior, lik, x_new.view())?,
        };
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        let s_norm = s.dot(&s).sqrt();
        let y_norm = yv.dot(&yv).sqrt();
        if sy > 1e-10 * s_norm * y_norm {
            if rescale_pending {
                // Scale the identity to the first secant pair before any
                // update so the initial step sizes are sane.
                h_inv *= sy / yv.dot(&yv);
                rescale_pending = false;
            }
            let rho = 1.0 / sy;
            let hy = h_inv.dot(&yv);
            let yhy = yv.dot(&hy);
            let coeff = rho * rho * yhy + rho;
            for i in 0..m {
                for j in 0..m {
                    h_inv[[i, j]] += coeff * s[i] * s[j] - rho * (s[i] * hy[j] + hy[i] * s[j]);
                }
            }
        }
        x = x_new;
        fval = f_new;
        g = g_new;
        iterations += 1;
    }
    let grad_norm = stationarity(&x, &g, &domain);
    if !converged && grad_norm <= tol {
        converged = true;
    }
    Ok(MapResult { point: x, report: SolverReport { iterations, grad_norm, converged } })
}

/// Gauss-Newton Hessian of the negative log posterior at `x_map`:
/// `grad f grad f' / sigma_sq + cov0^-1`. SPD by construction.
pub fn gauss_newton_hessian(
    model: &dyn ForwardModel,
    prior: &GaussianDensity,
    lik: &PseudoLikelihood,
    x_map: ArrayView1<f64>,
) -> Result<Array2<f64>> {
    let g = model.grad(x_map)?;
    let mut h = prior.precision();
    let m = g.len();
    for i in 0..m {
        for j in 0..m {
            h[[i, j]] += g[i] * g[j] / lik.sigma_sq;
        }
    }
    Ok(h)
}

/// Invert the Gauss-Newton Hessian without a dense factorization. The
/// Hessian is prior precision plus a rank-one term, so its inverse is
/// `cov0 - (cov0 v)(cov0 v)' / (sigma_sq + v' cov0 v)` exactly.
fn laplace_covariance(prior: &GaussianDensity, v: ArrayView1<f64>, sigma_sq: f64) -> Array2<f64> {
    let u = prior.cov().dot(&v);
    let denom = sigma_sq + v.dot(&u);
    let m = u.len();
    let mut cov = prior.cov().to_owned();
    for i in 0..m {
        for j in 0..m {
            cov[[i, j]] -= u[i] * u[j] / denom;
        }
    }
    cov
}

/// Assemble the Laplace approximation around an already-computed MAP point.
pub fn laplace_approx(
    model: &dyn ForwardModel,
    prior: &GaussianDensity,
    lik: &PseudoLikelihood,
    map: MapResult,
) -> Result<LaplaceApprox> {
    let v = model.grad(map.point.view())?;
    if v.iter().all(|c| *c == 0.0) {
        return Err(Error::ZeroDirection);
    }
    let gn_hessian = gauss_newton_hessian(model, prior, lik, map.point.view())?;
    let cov = laplace_covariance(prior, v.view(), lik.sigma_sq);
    let density = GaussianDensity::new(map.point.clone(), cov)?;
    Ok(LaplaceApprox { map_point: map.point, gn_hessian, density, solver_report: map.report })
}

/// Laplace approximation for an affine model `f(x) = v'x + beta` without
/// running the optimizer:
/// `x_map = x0 + (y - f(x0)) / (sigma_sq + v' cov0 v) * cov0 v`.
pub fn affine_laplace_closed_form(
    v: ArrayView1<f64>,
    beta: f64,
    prior: &GaussianDensity,
    lik: &PseudoLikelihood,
) -> Result<LaplaceApprox> {
    if v.len() != prior.dim() {
        return Err(Error::DimMismatch { expected: prior.dim(), got: v.len() });
    }
    if v.iter().all(|c| *c == 0.0) {
        return Err(Error::ZeroDirection);
    }
    let u = prior.cov().dot(&v);
    let denom = lik.sigma_sq + v.dot(&u);
    let residual = lik.y - (v.dot(&prior.mean()) + beta);
    let map_point = &prior.mean() + &(residual / denom * &u);

    let mut gn_hessian = prior.precision();
    let m = v.len();
    for i in 0..m {
        for j in 0..m {
            gn_hessian[[i, j]] += v[i] * v[j] / lik.sigma_sq;
        }
    }
    let cov = laplace_covariance(prior, v, lik.sigma_sq);
    let density = GaussianDensity::new(map_point.clone(), cov)?;
    Ok(LaplaceApprox {
        map_point,
        gn_hessian,
        density,
        solver_report: SolverReport { iterations: 0, grad_norm: 0.0, converged: true },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AffineModel, ReactionModel};
    use ndarray::array;

    fn scalar_setup() -> (AffineModel, GaussianDensity) {
        let model = AffineModel::new(array![1.0], 0.0);
        let prior = GaussianDensity::scaled_identity(array![0.0], 1.0).unwrap();
        (model, prior)
    }

    #[test]
    fn objective_reference_values() {
        let (model, prior) = scalar_setup();
        let lik = PseudoLikelihood::new(0.0, 1.0).unwrap();
        let at0 = neg_log_posterior(&model, &prior, &lik, array![0.0].view()).unwrap();
        let at1 = neg_log_posterior(&model, &prior, &lik, array![1.0].view()).unwrap();
        assert_eq!(at0, 0.0);
        assert!((at1 - 1.0).abs() < 1e-15, "misfit 1/2 plus prior 1/2, got {at1}");
    }

    #[test]
    fn flat_likelihood_leaves_only_the_prior() {
        let (model, prior) = scalar_setup();
        let lik = PseudoLikelihood::new(0.3, 1e16).unwrap();
        for &x in &[-2.0, -0.5, 0.0, 1.7] {
            let nlp = neg_log_posterior(&model, &prior, &lik, array![x].view()).unwrap();
            assert!((nlp - 0.5 * x * x).abs() < 1e-12, "x={x}: {nlp}");
        }
    }

    #[test]
    fn gradient_matches_affine_closed_form() {
        let v = array![0.5, 0.25];
        let model = AffineModel::new(v.clone(), 0.1);
        let prior =
            GaussianDensity::new(array![1.0, 1.0], array![[0.1, 0.02], [0.02, 0.3]]).unwrap();
        let lik = PseudoLikelihood::new(1.4, 0.05).unwrap();
        let x = array![0.8, 1.3];
        let g = nlp_gradient(&model, &prior, &lik, x.view()).unwrap();
        let residual = lik.y - (v.dot(&x) + 0.1);
        let expected = prior.solve_cov((&x - &prior.mean()).view()) - (residual / lik.sigma_sq) * &v;
        for i in 0..2 {
            assert!((g[i] - expected[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_is_the_derivative_of_the_objective() {
        let v = array![0.5, 0.25];
        let model = AffineModel::new(v, 0.0);
        let prior =
            GaussianDensity::new(array![1.0, 1.0], array![[0.1, 0.0], [0.0, 0.1]]).unwrap();
        let lik = PseudoLikelihood::new(1.37, 3.125e-4).unwrap();
        let x = array![1.1, 0.9];
        let g = nlp_gradient(&model, &prior, &lik, x.view()).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[i] += h;
            lo[i] -= h;
            let fd = (neg_log_posterior(&model, &prior, &lik, hi.view()).unwrap()
                - neg_log_posterior(&model, &prior, &lik, lo.view()).unwrap())
                / (2.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(1.0);
            assert!(rel < 1e-6, "coord {i}: {} vs fd {fd}", g[i]);
        }
    }

    #[test]
    fn optimizer_reaches_the_affine_closed_form() {
        let v = array![0.5, 0.25];
        let model = AffineModel::new(v.clone(), 0.0);
        let prior = GaussianDensity::scaled_identity(array![1.0, 1.0], 0.1).unwrap();
        let lik = PseudoLikelihood::new(1.37, 3.125e-4).unwrap();
        let solved = find_map(&model, &prior, &lik, None).unwrap();
        assert!(solved.report.converged, "{:?}", solved.report);
        let exact = affine_laplace_closed_form(v.view(), 0.0, &prior, &lik).unwrap();
        for i in 0..2 {
            assert!(
                (solved.point[i] - exact.map_point[i]).abs() < 1e-8,
                "coord {i}: {} vs {}",
                solved.point[i],
                exact.map_point[i]
            );
        }
        // Stationarity at the solution.
        let g = nlp_gradient(&model, &prior, &lik, solved.point.view()).unwrap();
        assert!(g.dot(&g).sqrt() <= 1e-8 * 10.0, "gradient not small: {g}");
    }

    #[test]
    fn matching_pseudo_data_keeps_the_prior_mean() {
        let v = array![0.5, 0.25];
        let model = AffineModel::new(v.clone(), 0.0);
        let prior = GaussianDensity::scaled_identity(array![1.0, 1.0], 0.1).unwrap();
        // y equals the nominal prediction v'x0 = 0.75.
        let lik = PseudoLikelihood::new(0.75, 0.01).unwrap();
        let solved = find_map(&model, &prior, &lik, None).unwrap();
        assert!(solved.report.converged);
        for i in 0..2 {
            assert!((solved.point[i] - 1.0).abs() < 1e-10);
        }
        let exact = affine_laplace_closed_form(v.view(), 0.0, &prior, &lik).unwrap();
        for i in 0..2 {
            assert!((exact.map_point[i] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_closed_form_reference() {
        let (model, prior) = scalar_setup();
        let lik = PseudoLikelihood::new(2.0, 1.0).unwrap();
        let exact = affine_laplace_closed_form(array![1.0].view(), 0.0, &prior, &lik).unwrap();
        assert!((exact.map_point[0] - 1.0).abs() < 1e-15);
        assert!((exact.density.cov()[[0, 0]] - 0.5).abs() < 1e-15);
        assert!((exact.gn_hessian[[0, 0]] - 2.0).abs() < 1e-15);
        let _ = model;
    }

    #[test]
    fn hessian_flattens_to_prior_precision_as_noise_grows() {
        let v = array![0.5, 0.25];
        let model = AffineModel::new(v, 0.0);
        let prior = GaussianDensity::scaled_identity(array![1.0, 1.0], 0.1).unwrap();
        let lik = PseudoLikelihood::new(1.0, 1e14).unwrap();
        let h = gauss_newton_hessian(&model, &prior, &lik, array![1.0, 1.0].view()).unwrap();
        let p = prior.precision();
        for i in 0..2 {
            for j in 0..2 {
                assert!((h[[i, j]] - p[[i, j]]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rank_one_inverse_matches_dense_inverse() {
        let v = array![0.5, 0.25, -0.3];
        let model = AffineModel::new(v.clone(), 0.0);
        let prior = GaussianDensity::new(
            array![0.2, -0.1, 0.4],
            array![[0.5, 0.1, 0.0], [0.1, 0.4, 0.05], [0.0, 0.05, 0.3]],
        )
        .unwrap();
        let lik = PseudoLikelihood::new(0.9, 0.02).unwrap();
        let exact = affine_laplace_closed_form(v.view(), 0.0, &prior, &lik).unwrap();
        // H * cov = I ties the Sherman-Morrison covariance to the assembled
        // Hessian without a second inversion routine.
        let product = exact.gn_hessian.dot(&exact.density.cov());
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (product[[i, j]] - expected).abs() < 1e-10,
                    "H cov at ({i},{j}) = {}",
                    product[[i, j]]
                );
            }
        }
        let _ = model;
    }

    #[test]
    fn variance_shrinks_only_along_the_informed_direction() {
        let v = array![0.5, 0.25];
        let prior = GaussianDensity::new(array![1.0, 1.0], array![[0.1, 0.03], [0.03, 0.2]]).unwrap();
        let lik = PseudoLikelihood::new(1.4, 0.01).unwrap();
        let exact = affine_laplace_closed_form(v.view(), 0.0, &prior, &lik).unwrap();
        let cov = exact.density.cov();
        // Along v the variance strictly shrinks.
        let before = v.dot(&prior.cov().dot(&v));
        let after = v.dot(&cov.dot(&v));
        assert!(after < before, "no shrink: {after} vs {before}");
        // For w with w' cov0 v = 0 the quadratic form is untouched, and the
        // mean shift is parallel to cov0 v.
        let u = prior.cov().dot(&v);
        let w = array![-u[1], u[0]];
        assert!(w.dot(&u).abs() < 1e-15);
        let before_w = w.dot(&prior.cov().dot(&w));
        let after_w = w.dot(&cov.dot(&w));
        assert!((before_w - after_w).abs() < 1e-14 * before_w.max(1.0));
        let shift = &exact.map_point - &prior.mean();
        let cross = shift[0] * u[1] - shift[1] * u[0];
        assert!(cross.abs() < 1e-12, "mean shift not parallel to cov0 v");
    }

    #[test]
    fn randomized_affine_problems_agree_with_the_optimizer() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for case in 0..20 {
            let m = 1 + case % 4;
            let v = Array1::from_shape_fn(m, |_| rng.gen_range(-1.0..1.0_f64) + 0.1);
            let mean = Array1::from_shape_fn(m, |_| rng.gen_range(-1.0..1.0));
            let scale = rng.gen_range(0.05..0.5);
            let prior = GaussianDensity::scaled_identity(mean, scale).unwrap();
            let beta = rng.gen_range(-0.5..0.5);
            let lik =
                PseudoLikelihood::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.001..1.0)).unwrap();
            let model = AffineModel::new(v.clone(), beta);
            let solved = find_map(&model, &prior, &lik, None).unwrap();
            let exact = affine_laplace_closed_form(v.view(), beta, &prior, &lik).unwrap();
            assert!(solved.report.converged, "case {case}: {:?}", solved.report);
            for i in 0..m {
                assert!(
                    (solved.point[i] - exact.map_point[i]).abs() < 1e-8,
                    "case {case} coord {i}"
                );
            }
            let numeric =
                laplace_approx(&model, &prior, &lik, solved).unwrap();
            for i in 0..m {
                for j in 0..m {
                    assert!(
                        (numeric.density.cov()[[i, j]] - exact.density.cov()[[i, j]]).abs() < 1e-10,
                        "case {case} cov ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn reaction_map_beats_the_prior_mean_misfit() {
        let model = ReactionModel::new(ReactionModel::CATALOG_T_FINAL, 1000).unwrap();
        let prior = GaussianDensity::scaled_identity(array![0.5], 0.01).unwrap();
        let lik = PseudoLikelihood::new(0.75, 1e-4).unwrap();
        let solved = find_map(&model, &prior, &lik, None).unwrap();
        assert!(solved.report.converged, "{:?}", solved.report);
        let f_map = model.eval(solved.point.view()).unwrap();
        assert!(
            (0.5..=0.8).contains(&f_map),
            "MAP prediction {f_map} strayed from the target"
        );
        let f_mean = model.eval(array![0.5].view()).unwrap();
        assert!(
            (lik.y - f_map).abs() < (lik.y - f_mean).abs(),
            "MAP misfit {f_map} no better than prior mean {f_mean}"
        );
        // Grid-search cross-check: nothing on a fine grid beats the solve.
        let nlp_map = neg_log_posterior(&model, &prior, &lik, solved.point.view()).unwrap();
        for i in 0..=400 {
            let x = array![i as f64 / 400.0];
            let nlp = neg_log_posterior(&model, &prior, &lik, x.view()).unwrap();
            assert!(
                nlp >= nlp_map - 1e-6,
                "grid point {} undercuts the MAP: {nlp} vs {nlp_map}",
                x[0]
            );
        }
    }

    #[test]
    fn zero_direction_is_rejected() {
        let prior = GaussianDensity::scaled_identity(array![0.0, 0.0], 1.0).unwrap();
        let lik = PseudoLikelihood::new(1.0, 1.0).unwrap();
        let err = affine_laplace_closed_form(array![0.0, 0.0].view(), 0.0, &prior, &lik).err();
        assert!(matches!(err, Some(Error::ZeroDirection)));
    }

    #[test]
    fn bad_likelihood_parameters_are_rejected() {
        assert!(PseudoLikelihood::new(f64::NAN, 1.0).is_err());
        assert!(PseudoLikelihood::new(0.0, 0.0).is_err());
        assert!(PseudoLikelihood::new(0.0, -1.0).is_err());
    }
}
