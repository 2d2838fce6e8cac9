use ndarray::ArrayView1;

use crate::models::{rk4, EvalCounter, ForwardModel};
use crate::{Error, Result};

/// Lorenz system with the classical parameters (sigma = 10, rho = 28,
/// beta = 8/3), observed through the first coordinate at `t_final`:
///
/// `f(x) = u_1(t_final)` where `u(0) = x`.
///
/// For short horizons the flow map is smooth and nearly affine around a
/// given initial state; for long horizons it is chaotic and the observable
/// decorrelates from the input, which makes this the catalog's stress test.
#[derive(Debug)]
pub struct LorenzModel {
    t_final: f64,
    step_count: usize,
    calls: EvalCounter,
}

const SIGMA: f64 = 10.0;
const RHO: f64 = 28.0;
const BETA: f64 = 8.0 / 3.0;

impl LorenzModel {
    pub fn new(t_final: f64, step_count: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidParameter {
                name: "t_final",
                reason: format!("integration horizon must be positive, got {t_final}"),
            });
        }
        if step_count == 0 {
            return Err(Error::InvalidParameter {
                name: "step_count",
                reason: "need at least one integration step".into(),
            });
        }
        Ok(Self { t_final, step_count, calls: EvalCounter::default() })
    }
}

fn rhs(u: &[f64], du: &mut [f64]) {
    du[0] = SIGMA * (u[1] - u[0]);
    du[1] = u[0] * (RHO - u[2]) - u[1];
    du[2] = u[0] * u[1] - BETA * u[2];
}

impl ForwardModel for LorenzModel {
    fn name(&self) -> &str {
        "lorenz"
    }

    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.calls.bump();
        if x.len() != 3 {
            return Err(Error::DimMismatch { expected: 3, got: x.len() });
        }
        let mut state = [x[0], x[1], x[2]];
        rk4::integrate("lorenz", rhs, &mut state, self.t_final, self.step_count)?;
        Ok(state[0])
    }

    fn eval_count(&self) -> u64 {
        self.calls.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    // Reference state used across the integration tests: a point near the
    // attractor rather than a symmetric special case.
    fn base_point() -> ndarray::Array1<f64> {
        array![1.508_870, -1.531_271, 25.460_91]
    }

    #[test]
    fn short_horizon_matches_step_doubling() {
        // RK4 is fourth order, so doubling the steps should reproduce the
        // observable to near the combined truncation error.
        let coarse = LorenzModel::new(0.1, 1000).unwrap();
        let fine = LorenzModel::new(0.1, 2000).unwrap();
        let a = coarse.eval(base_point().view()).unwrap();
        let b = fine.eval(base_point().view()).unwrap();
        assert!((a - b).abs() < 1e-10, "short-horizon refinement gap: {a} vs {b}");
    }

    #[test]
    fn long_horizon_needs_fine_steps_but_converges() {
        let coarse = LorenzModel::new(5.0, 50_000).unwrap();
        let fine = LorenzModel::new(5.0, 100_000).unwrap();
        let a = coarse.eval(base_point().view()).unwrap();
        let b = fine.eval(base_point().view()).unwrap();
        assert!((a - b).abs() < 1e-6, "long-horizon refinement gap: {a} vs {b}");
    }

    #[test]
    fn equilibrium_stays_put() {
        // The fixed point (sqrt(beta (rho - 1)), same, rho - 1) is stationary;
        // the integrator should keep u_1 there to rounding.
        let c = (BETA * (RHO - 1.0)).sqrt();
        let m = LorenzModel::new(0.5, 5000).unwrap();
        let f = m.eval(array![c, c, RHO - 1.0].view()).unwrap();
        assert!((f - c).abs() < 1e-9, "fixed point drifted: {f} vs {c}");
    }

    #[test]
    fn sensitivity_grows_with_horizon() {
        // Chaos in action: a 1e-6 input perturbation is amplified far more
        // over t = 5 than over t = 0.1.
        let short = LorenzModel::new(0.1, 1000).unwrap();
        let long = LorenzModel::new(5.0, 50_000).unwrap();
        let mut bumped = base_point();
        bumped[0] += 1e-6;
        let ds = (short.eval(bumped.view()).unwrap() - short.eval(base_point().view()).unwrap()).abs();
        let dl = (long.eval(bumped.view()).unwrap() - long.eval(base_point().view()).unwrap()).abs();
        assert!(dl > ds * 10.0, "expected strong amplification, got {ds} -> {dl}");
    }
}
