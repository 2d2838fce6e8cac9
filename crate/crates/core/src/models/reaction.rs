use ndarray::{array, Array1, ArrayView1};

use crate::models::{rk4, EvalCounter, ForwardModel};
use crate::{Error, Result};

/// Ignition of a homogeneous premixed mixture: the reaction progress
/// variable `u in [0, 1]` evolves under an Arrhenius source term
///
/// `du/dt = B u (1 - u) exp(-T_act / T(u))`,  `T(u) = T_u + (T_b - T_u) u`,
///
/// and the observable is `u(t_final)` started from `u(0) = x`. The source
/// vanishes at both ends, so the state stays in [0, 1] and the map is
/// monotone in the initial condition.
#[derive(Debug)]
pub struct ReactionModel {
    t_final: f64,
    step_count: usize,
    calls: EvalCounter,
}

const T_UNBURNT: f64 = 300.0;
const T_BURNT: f64 = 2100.0;
const T_ACTIVATION: f64 = 30_000.0;
const RATE_B: f64 = 6.11e7;

fn source(u: f64) -> f64 {
    let temp = T_UNBURNT + (T_BURNT - T_UNBURNT) * u;
    RATE_B * u * (1.0 - u) * (-T_ACTIVATION / temp).exp()
}

impl ReactionModel {
    /// Default integration horizon in seconds. Calibrated so that with the
    /// catalog prior N(0.5, 0.01) the probability of u(t_final) landing in
    /// [0.7, 0.8] is a rare-but-estimable event of order 1e-2.
    pub const CATALOG_T_FINAL: f64 = 0.25;

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

impl ForwardModel for ReactionModel {
    fn name(&self) -> &str {
        "reaction"
    }

    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.calls.bump();
        if x.len() != 1 {
            return Err(Error::DimMismatch { expected: 1, got: x.len() });
        }
        let u0 = x[0];
        if !(0.0..=1.0).contains(&u0) {
            return Err(Error::Model {
                model: "reaction".into(),
                reason: format!("progress variable out of range: {u0}"),
            });
        }
        let mut state = [u0];
        rk4::integrate("reaction", |s, d| d[0] = source(s[0]), &mut state, self.t_final, self.step_count)?;
        Ok(state[0])
    }

    fn eval_count(&self) -> u64 {
        self.calls.get()
    }

    fn domain(&self) -> Option<(Array1<f64>, Array1<f64>)> {
        Some((array![0.0], array![1.0]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn fixed_points_at_both_ends() {
        let m = ReactionModel::new(1.0, 500).unwrap();
        assert_eq!(m.eval(array![0.0].view()).unwrap(), 0.0);
        assert_eq!(m.eval(array![1.0].view()).unwrap(), 1.0);
    }

    #[test]
    fn map_is_monotone_and_progresses() {
        let m = ReactionModel::new(1.0, 1000).unwrap();
        let mut prev = -1.0;
        for &u0 in &[0.1, 0.3, 0.5, 0.7, 0.9] {
            let u = m.eval(array![u0].view()).unwrap();
            assert!(u >= u0, "progress cannot run backwards: {u0} -> {u}");
            assert!(u > prev, "monotonicity violated at {u0}");
            assert!((0.0..=1.0).contains(&u));
            prev = u;
        }
    }

    #[test]
    fn out_of_range_input_rejected() {
        let m = ReactionModel::new(1.0, 100).unwrap();
        assert!(m.eval(array![-0.01].view()).is_err());
        assert!(m.eval(array![1.01].view()).is_err());
    }

    #[test]
    fn step_refinement_converges() {
        let coarse = ReactionModel::new(0.5, 1000).unwrap();
        let fine = ReactionModel::new(0.5, 2000).unwrap();
        let a = coarse.eval(array![0.72].view()).unwrap();
        let b = fine.eval(array![0.72].view()).unwrap();
        assert!((a - b).abs() < 1e-9, "RK4 not converged: {a} vs {b}");
    }
}
