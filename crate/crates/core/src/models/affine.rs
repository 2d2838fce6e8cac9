use ndarray::{Array1, ArrayView1};

use crate::models::{EvalCounter, ForwardModel};
use crate::{Error, Result};

/// Exactly linear observable `f(x) = v'x + beta`. The one model whose
/// posterior, Laplace approximation, and tuning are all available in closed
/// form, which makes it the reference point for everything else.
#[derive(Debug)]
pub struct AffineModel {
    v: Array1<f64>,
    beta: f64,
    calls: EvalCounter,
}

impl AffineModel {
    pub fn new(v: Array1<f64>, beta: f64) -> Self {
        Self { v, beta, calls: EvalCounter::default() }
    }

    /// Catalog instance: `v_i = 1 / (m * i)` with 1-based `i`, `beta = 0`.
    /// The decaying weights give the coordinates unequal influence.
    pub fn catalog(m: usize) -> Self {
        let v = Array1::from_iter((1..=m).map(|i| 1.0 / (m as f64 * i as f64)));
        Self::new(v, 0.0)
    }

    pub fn v(&self) -> ArrayView1<'_, f64> {
        self.v.view()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl ForwardModel for AffineModel {
    fn name(&self) -> &str {
        "affine"
    }

    fn dim(&self) -> usize {
        self.v.len()
    }

    fn eval(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.calls.bump();
        if x.len() != self.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.v.dot(&x) + self.beta)
    }

    fn grad(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.v.clone())
    }

    fn eval_count(&self) -> u64 {
        self.calls.get()
    }
}
