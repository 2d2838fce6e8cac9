//! Forward models mapping an uncertain parameter vector to a scalar
//! observable. Every evaluation is counted, so estimator reports can audit
//! exactly how much model work a run performed.

mod affine;
mod elliptic;
mod lorenz;
mod periodic;
mod rank1;
mod reaction;
mod rk4;

pub use affine::AffineModel;
pub use elliptic::{smoothness_covariance, EllipticFdModel};
pub use lorenz::LorenzModel;
pub use periodic::PeriodicModel;
pub use rank1::Rank1Model;
pub use reaction::ReactionModel;

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, ArrayView1};

use crate::{Error, Result};

/// Thread-safe evaluation counter carried by every model.
#[derive(Debug, Default)]
pub struct EvalCounter(AtomicU64);

impl EvalCounter {
    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// Scalar-valued forward model `f: R^m -> R`.
///
/// `grad` defaults to central finite differences; models with analytic or
/// adjoint gradients override it. Gradient evaluations that go through the
/// finite-difference path show up in `eval_count` (2m calls per gradient).
pub trait ForwardModel: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn eval(&self, x: ArrayView1<f64>) -> Result<f64>;

    fn grad(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        fd_gradient(self, x)
    }

    /// Total `eval` calls since construction.
    fn eval_count(&self) -> u64;

    /// Box constraints on the parameter vector, when the model has any.
    fn domain(&self) -> Option<(Array1<f64>, Array1<f64>)> {
        None
    }
}

/// Central finite differences with per-coordinate step
/// `h_i = cbrt(eps) * (1 + |x_i|)`; costs exactly `2 m` model evaluations.
pub fn fd_gradient<M: ForwardModel + ?Sized>(model: &M, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    let m = x.len();
    if m != model.dim() {
        return Err(Error::DimMismatch { expected: model.dim(), got: m });
    }
    let h0 = f64::EPSILON.cbrt();
    let mut probe = x.to_owned();
    let mut g = Array1::zeros(m);
    for i in 0..m {
        let h = h0 * (1.0 + x[i].abs());
        let hi = x[i] + h;
        let lo = x[i] - h;
        probe[i] = hi;
        let f_hi = model.eval(probe.view())?;
        probe[i] = lo;
        let f_lo = model.eval(probe.view())?;
        probe[i] = x[i];
        let gi = (f_hi - f_lo) / (hi - lo);
        if !gi.is_finite() {
            return Err(Error::NonFiniteGradient { coord: i });
        }
        g[i] = gi;
    }
    Ok(g)
}

/// Names accepted by [`by_name`], in catalog order.
pub const CATALOG: [&str; 6] = ["affine", "rank1", "reaction", "lorenz", "periodic", "elliptic-fd"];

/// Parameters a catalog entry may consume; fields irrelevant to the chosen
/// model must stay unset.
#[derive(Debug, Clone, Default)]
pub struct CatalogParams {
    /// Parameter dimension (affine, rank1).
    pub m: Option<usize>,
    /// Generation seed for the synthetic rank-one problem.
    pub seed: Option<u64>,
    /// Use the analytic gradient instead of finite differences (rank1).
    pub analytic_gradient: Option<bool>,
    /// Integration horizon in seconds (reaction, lorenz).
    pub t_final: Option<f64>,
    /// Fixed RK4 step count (reaction, lorenz).
    pub step_count: Option<usize>,
    /// Cells per side of the unit-square grid (elliptic-fd).
    pub grid_n: Option<usize>,
}

macro_rules! reject_unused {
    ($model:expr, $params:expr, [$($field:ident),*]) => {
        $(
            if $params.$field.is_some() {
                return Err(Error::InvalidParameter {
                    name: stringify!($field),
                    reason: format!("not a parameter of the `{}` model", $model),
                });
            }
        )*
    };
}

/// Build a catalog model from its name and parameters.
pub fn by_name(name: &str, params: &CatalogParams) -> Result<Box<dyn ForwardModel>> {
    match name {
        "affine" => {
            reject_unused!(name, params, [seed, analytic_gradient, t_final, step_count, grid_n]);
            Ok(Box::new(AffineModel::catalog(params.m.unwrap_or(2))))
        }
        "rank1" => {
            reject_unused!(name, params, [t_final, step_count, grid_n]);
            Ok(Box::new(Rank1Model::new(
                params.m.unwrap_or(10),
                params.seed.unwrap_or(Rank1Model::CATALOG_SEED),
                params.analytic_gradient.unwrap_or(false),
            )?))
        }
        "reaction" => {
            reject_unused!(name, params, [m, seed, analytic_gradient, grid_n]);
            Ok(Box::new(ReactionModel::new(
                params.t_final.unwrap_or(ReactionModel::CATALOG_T_FINAL),
                params.step_count.unwrap_or(1000),
            )?))
        }
        "lorenz" => {
            reject_unused!(name, params, [m, seed, analytic_gradient, grid_n]);
            Ok(Box::new(LorenzModel::new(
                params.t_final.unwrap_or(0.1),
                params.step_count.unwrap_or(1000),
            )?))
        }
        "periodic" => {
            reject_unused!(name, params, [m, seed, analytic_gradient, t_final, step_count, grid_n]);
            Ok(Box::new(PeriodicModel::new()))
        }
        "elliptic-fd" => {
            reject_unused!(name, params, [m, seed, analytic_gradient, t_final, step_count]);
            Ok(Box::new(EllipticFdModel::new(params.grid_n.unwrap_or(17))?))
        }
        other => Err(Error::InvalidParameter {
            name: "model",
            reason: format!("unknown model `{other}`; known models: {}", CATALOG.join(", ")),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn fd_gradient_costs_two_m_evals() {
        let model = PeriodicModel::new();
        let before = model.eval_count();
        fd_gradient(&model, array![0.4, -0.2].view()).unwrap();
        assert_eq!(model.eval_count() - before, 4);
    }

    #[test]
    fn fd_gradient_matches_analytic_on_smooth_model() {
        let model = PeriodicModel::new();
        let x = array![0.9, 1.3];
        let fd = fd_gradient(&model, x.view()).unwrap();
        let exact = model.grad(x.view()).unwrap();
        for (a, b) in fd.iter().zip(exact.iter()) {
            assert!((a - b).abs() < 1e-9, "fd {a} vs exact {b}");
        }
    }

    #[test]
    fn catalog_names_resolve() {
        for name in CATALOG {
            let p = CatalogParams {
                grid_n: (name == "elliptic-fd").then_some(9),
                ..Default::default()
            };
            let model = by_name(name, &p).unwrap();
            assert_eq!(model.name(), name);
        }
        assert!(by_name("unknown", &CatalogParams::default()).is_err());
    }

    #[test]
    fn inapplicable_parameter_rejected() {
        let p = CatalogParams { t_final: Some(1.0), ..Default::default() };
        let err = by_name("affine", &p).err().unwrap();
        assert!(err.to_string().contains("t_final"));
    }
}
