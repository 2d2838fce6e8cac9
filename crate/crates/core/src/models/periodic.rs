use ndarray::{array, Array1, ArrayView1};

use crate::models::{EvalCounter, ForwardModel};
use crate::{Error, Result};

/// Two-dimensional periodic map `f(x) = sin(x_1) cos(x_2)`.
///
/// The level sets are a lattice of disconnected components, so a local
/// quadratic picture around any single MAP point cannot cover the whole
/// preimage of a target interval. This is the catalog's designated failure
/// mode for unimodal importance sampling.
#[derive(Debug, Default)]
pub struct PeriodicModel {
    calls: EvalCounter,
}

impl PeriodicModel {
    pub fn new() -> Self {
        Self::default()
    }
}

impl ForwardModel for PeriodicModel {
    fn name(&self) -> &str {
        "periodic"
    }

    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.calls.bump();
        if x.len() != 2 {
            return Err(Error::DimMismatch { expected: 2, got: x.len() });
        }
        Ok(x[0].sin() * x[1].cos())
    }

    fn grad(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != 2 {
            return Err(Error::DimMismatch { expected: 2, got: x.len() });
        }
        Ok(array![x[0].cos() * x[1].cos(), -x[0].sin() * x[1].sin()])
    }

    fn eval_count(&self) -> u64 {
        self.calls.get()
    }
}
