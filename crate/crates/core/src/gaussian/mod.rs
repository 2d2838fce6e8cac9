//! Multivariate normal densities and mixtures.
//!
//! The Cholesky factor of every covariance is computed once at construction
//! and reused for log-density evaluation, sampling, and solves against the
//! covariance. Construction rejects asymmetric input and applies the
//! crate-wide single-jitter retry before giving up on a factorization.

mod special;
mod truncated;

pub use special::{erf, erfc, erfcx, normal_cdf};
pub use truncated::{truncated_normal_moments, TruncatedMoments};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg;
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Multivariate normal with cached lower Cholesky factor of the covariance.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    mean: Array1<f64>,
    cov: Array2<f64>,
    chol: Array2<f64>,
    /// -(m/2) ln(2 pi) - sum(ln L_ii), the log normalization constant.
    log_norm: f64,
}

impl GaussianDensity {
    pub fn new(mean: Array1<f64>, cov: Array2<f64>) -> Result<Self> {
        let m = mean.len();
        if cov.nrows() != m || cov.ncols() != m {
            return Err(Error::DimMismatch { expected: m, got: cov.nrows() });
        }
        linalg::check_symmetric(&cov.view())?;
        let chol = linalg::cholesky_spd(&cov.view())?;
        let log_det_half: f64 = chol.diag().iter().map(|d| d.ln()).sum();
        let log_norm = -0.5 * m as f64 * LN_2PI - log_det_half;
        Ok(Self { mean, cov, chol, log_norm })
    }

    /// Convenience constructor for a diagonal covariance.
    pub fn diagonal(mean: Array1<f64>, variances: &[f64]) -> Result<Self> {
        let m = mean.len();
        if variances.len() != m {
            return Err(Error::DimMismatch { expected: m, got: variances.len() });
        }
        let mut cov = Array2::zeros((m, m));
        for (i, &v) in variances.iter().enumerate() {
            cov[[i, i]] = v;
        }
        Self::new(mean, cov)
    }

    /// Isotropic covariance `scale * I`.
    pub fn scaled_identity(mean: Array1<f64>, scale: f64) -> Result<Self> {
        let v = vec![scale; mean.len()];
        Self::diagonal(mean, &v)
    }

    /// Gaussian given by its precision (inverse covariance) matrix.
    pub fn from_precision(mean: Array1<f64>, precision: ArrayView2<f64>) -> Result<Self> {
        let m = mean.len();
        if precision.nrows() != m || precision.ncols() != m {
            return Err(Error::DimMismatch { expected: m, got: precision.nrows() });
        }
        linalg::check_symmetric(&precision)?;
        let l = linalg::cholesky_spd(&precision)?;
        Self::new(mean, linalg::spd_inverse(&l.view()))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> ArrayView1<'_, f64> {
        self.mean.view()
    }

    pub fn cov(&self) -> ArrayView2<'_, f64> {
        self.cov.view()
    }

    /// Lower Cholesky factor of the covariance.
    pub fn chol(&self) -> ArrayView2<'_, f64> {
        self.chol.view()
    }

    pub fn logpdf(&self, x: ArrayView1<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), got: x.len() });
        }
        let r = &x - &self.mean;
        let z = linalg::solve_lower(&self.chol.view(), &r.view());
        Ok(self.log_norm - 0.5 * z.dot(&z))
    }

    /// Draw one sample: `mean + L z` with iid standard normal `z`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Array1<f64> {
        let m = self.dim();
        let z: Array1<f64> = Array1::from_iter((0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let mut x = self.mean.clone();
        for i in 0..m {
            let mut acc = 0.0;
            for k in 0..=i {
                acc += self.chol[[i, k]] * z[k];
            }
            x[i] += acc;
        }
        x
    }

    /// Solve `cov * out = rhs` using the cached factor.
    pub fn solve_cov(&self, rhs: ArrayView1<f64>) -> Array1<f64> {
        linalg::spd_solve(&self.chol.view(), &rhs)
    }

    /// Dense inverse of the covariance (the prior precision). Recomputed on
    /// each call; callers that need it repeatedly should hold on to it.
    pub fn precision(&self) -> Array2<f64> {
        linalg::spd_inverse(&self.chol.view())
    }

    /// Quadratic form `v' cov v`, evaluated as `|L' v|^2` so it cannot go
    /// negative through round-off.
    pub fn cov_quadratic(&self, v: ArrayView1<f64>) -> f64 {
        let m = self.dim();
        let mut total = 0.0;
        for k in 0..m {
            let mut acc = 0.0;
            for i in k..m {
                acc += self.chol[[i, k]] * v[i];
            }
            total += acc * acc;
        }
        total
    }
}

/// Finite mixture of Gaussians with fixed non-negative weights summing to 1.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    components: Vec<GaussianDensity>,
    weights: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianDensity>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyMixture);
        }
        if weights.len() != components.len() {
            return Err(Error::DimMismatch { expected: components.len(), got: weights.len() });
        }
        let dim = components[0].dim();
        for c in &components {
            if c.dim() != dim {
                return Err(Error::DimMismatch { expected: dim, got: c.dim() });
            }
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::BadMixtureWeights { sum });
        }
        Ok(Self { components, weights })
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn components(&self) -> &[GaussianDensity] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Log of the mixture density via a log-sum-exp over the active
    /// components; zero-weight components are skipped entirely.
    pub fn logpdf(&self, x: ArrayView1<f64>) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.components.len());
        for (c, &w) in self.components.iter().zip(&self.weights) {
            if w > 0.0 {
                terms.push(w.ln() + c.logpdf(x)?);
            }
        }
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Ok(max);
        }
        let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
        Ok(max + sum.ln())
    }

    /// Draw a component by weight, then a sample from it. A single-component
    /// mixture consumes no randomness for the component choice.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Array1<f64> {
        let idx = if self.components.len() == 1 {
            0
        } else {
            let u: f64 = rng.gen::<f64>();
            let mut acc = 0.0;
            let mut chosen = self.components.len() - 1;
            for (i, &w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        self.components[idx].sample(rng)
    }
}

/// A nominal or importance density: either a single Gaussian or a mixture.
#[derive(Debug, Clone)]
pub enum Density {
    Gaussian(GaussianDensity),
    Mixture(GaussianMixture),
}

impl Density {
    pub fn dim(&self) -> usize {
        match self {
            Density::Gaussian(g) => g.dim(),
            Density::Mixture(m) => m.dim(),
        }
    }

    pub fn logpdf(&self, x: ArrayView1<f64>) -> Result<f64> {
        match self {
            Density::Gaussian(g) => g.logpdf(x),
            Density::Mixture(m) => m.logpdf(x),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Array1<f64> {
        match self {
            Density::Gaussian(g) => g.sample(rng),
            Density::Mixture(m) => m.sample(rng),
        }
    }
}

impl From<GaussianDensity> for Density {
    fn from(g: GaussianDensity) -> Self {
        Density::Gaussian(g)
    }
}

impl From<GaussianMixture> for Density {
    fn from(m: GaussianMixture) -> Self {
        Density::Mixture(m)
    }
}
