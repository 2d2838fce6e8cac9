use ndarray::{Array1, Array2, ArrayView1};

use crate::models::{EvalCounter, ForwardModel};
use crate::{linalg, Error, Result};

/// Steady single-phase flow through a heterogeneous medium on the unit
/// square: `-div(exp(x) grad u) = 0` with `u = 1` on the top edge, `u = 0`
/// on the bottom edge and no-flux sides. The parameter vector `x` is the
/// cell-wise log-permeability on an `n x n` cell-centered grid and the
/// observable is the pressure in the cell containing the point (0.1, 0.5).
///
/// Discretization: 5-point finite volumes with harmonic-mean face
/// transmissibilities. The resulting SPD system is solved by a banded
/// Cholesky factorization (half-bandwidth `n`); the gradient comes from the
/// discrete adjoint, which reuses the factorization for one extra solve.
#[derive(Debug)]
pub struct EllipticFdModel {
    n: usize,
    dim: usize,
    obs: usize,
    calls: EvalCounter,
}

const P_TOP: f64 = 1.0;
const P_BOTTOM: f64 = 0.0;

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Banded lower-triangular storage: `ab[[d, j]] = A[j + d, j]` for
/// diagonal offsets `d = 0..=bw`. Entries beyond the band are absent.
fn cholesky_banded(ab: &mut Array2<f64>) -> Result<()> {
    let bw = ab.nrows() - 1;
    let m = ab.ncols();
    for j in 0..m {
        let start = j.saturating_sub(bw);
        let mut d = ab[[0, j]];
        for k in start..j {
            let l = ab[[j - k, k]];
            d -= l * l;
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let pivot = d.sqrt();
        ab[[0, j]] = pivot;
        for i in (j + 1)..(j + bw + 1).min(m) {
            let mut s = ab[[i - j, j]];
            for k in start.max(i.saturating_sub(bw))..j {
                s -= ab[[i - k, k]] * ab[[j - k, k]];
            }
            ab[[i - j, j]] = s / pivot;
        }
    }
    Ok(())
}

/// In-place solve of `L L^T z = rhs` with `L` in banded storage.
fn solve_banded(lb: &Array2<f64>, rhs: &mut Array1<f64>) {
    let bw = lb.nrows() - 1;
    let m = lb.ncols();
    for j in 0..m {
        let yj = rhs[j] / lb[[0, j]];
        rhs[j] = yj;
        for i in (j + 1)..(j + bw + 1).min(m) {
            rhs[i] -= lb[[i - j, j]] * yj;
        }
    }
    for j in (0..m).rev() {
        let mut s = rhs[j];
        for i in (j + 1)..(j + bw + 1).min(m) {
            s -= lb[[i - j, j]] * rhs[i];
        }
        rhs[j] = s / lb[[0, j]];
    }
}

impl EllipticFdModel {
    pub fn new(grid_n: usize) -> Result<Self> {
        if grid_n < 5 {
            return Err(Error::InvalidParameter {
                name: "grid_n",
                reason: format!("need at least a 5x5 grid, got {grid_n}"),
            });
        }
        let obs_col = grid_n / 10;
        let obs_row = grid_n / 2;
        Ok(Self {
            n: grid_n,
            dim: grid_n * grid_n,
            obs: obs_row * grid_n + obs_col,
            calls: EvalCounter::default(),
        })
    }

    /// Permeabilities from log-permeabilities, rejecting inputs whose
    /// exponential is not a positive finite number.
    fn permeability(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimMismatch { expected: self.dim, got: x.len() });
        }
        let k = x.mapv(f64::exp);
        if k.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Model {
                model: "elliptic-fd".into(),
                reason: "log-permeability yields a non-finite or zero coefficient".into(),
            });
        }
        Ok(k)
    }

    /// Assemble the flux-balance system and return (banded Cholesky factor,
    /// pressure). Cells are indexed row-major with row 0 at the bottom.
    fn solve_pressure(&self, k: &Array1<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
        let n = self.n;
        let m = self.dim;
        let mut ab = Array2::<f64>::zeros((n + 1, m));
        let mut rhs = Array1::<f64>::zeros(m);
        for row in 0..n {
            for col in 0..n {
                let c = row * n + col;
                if col + 1 < n {
                    let t = harmonic(k[c], k[c + 1]);
                    ab[[0, c]] += t;
                    ab[[0, c + 1]] += t;
                    ab[[1, c]] -= t;
                }
                if row + 1 < n {
                    let t = harmonic(k[c], k[c + n]);
                    ab[[0, c]] += t;
                    ab[[0, c + n]] += t;
                    ab[[n, c]] -= t;
                }
                if row == 0 {
                    // Dirichlet face at half a cell's distance: T = 2k.
                    let t = 2.0 * k[c];
                    ab[[0, c]] += t;
                    rhs[c] += t * P_BOTTOM;
                }
                if row + 1 == n {
                    let t = 2.0 * k[c];
                    ab[[0, c]] += t;
                    rhs[c] += t * P_TOP;
                }
            }
        }
        cholesky_banded(&mut ab).map_err(|_| Error::Model {
            model: "elliptic-fd".into(),
            reason: "flux-balance system is not positive definite".into(),
        })?;
        solve_banded(&ab, &mut rhs);
        Ok((ab, rhs))
    }
}

impl ForwardModel for EllipticFdModel {
    fn name(&self) -> &str {
        "elliptic-fd"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.calls.bump();
        let k = self.permeability(x)?;
        let (_, p) = self.solve_pressure(&k)?;
        Ok(p[self.obs])
    }

    /// Discrete adjoint: with A(x) p = b(x) and f = p[obs], solve
    /// A lambda = e_obs and accumulate per-face transmissibility
    /// derivatives. Chain rule through k = exp(x) multiplies each
    /// dT/dk by k.
    fn grad(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let n = self.n;
        let k = self.permeability(x)?;
        let (factor, p) = self.solve_pressure(&k)?;
        let mut lambda = Array1::<f64>::zeros(self.dim);
        lambda[self.obs] = 1.0;
        solve_banded(&factor, &mut lambda);

        let mut g = Array1::<f64>::zeros(self.dim);
        for row in 0..n {
            for col in 0..n {
                let c = row * n + col;
                if col + 1 < n {
                    let (a, b) = (c, c + 1);
                    let denom = (k[a] + k[b]) * (k[a] + k[b]);
                    let jump = (lambda[a] - lambda[b]) * (p[a] - p[b]);
                    g[a] -= 2.0 * k[a] * k[b] * k[b] / denom * jump;
                    g[b] -= 2.0 * k[b] * k[a] * k[a] / denom * jump;
                }
                if row + 1 < n {
                    let (a, b) = (c, c + n);
                    let denom = (k[a] + k[b]) * (k[a] + k[b]);
                    let jump = (lambda[a] - lambda[b]) * (p[a] - p[b]);
                    g[a] -= 2.0 * k[a] * k[b] * k[b] / denom * jump;
                    g[b] -= 2.0 * k[b] * k[a] * k[a] / denom * jump;
                }
                if row == 0 {
                    g[c] -= 2.0 * k[c] * lambda[c] * (p[c] - P_BOTTOM);
                }
                if row + 1 == n {
                    g[c] -= 2.0 * k[c] * lambda[c] * (p[c] - P_TOP);
                }
            }
        }
        Ok(g)
    }

    fn eval_count(&self) -> u64 {
        self.calls.get()
    }
}

/// Squared-inverse smoothness prior covariance `(gamma L + delta I)^-2`
/// on the n x n grid, where `L` is the 5-point finite-difference Laplacian
/// (4-neighbor stencil scaled by 1/h^2, h = 1/n, with no-flux boundaries)
/// so the operator is grid-consistent with the continuum `-gamma lap + delta`.
/// `delta > 0` keeps it invertible.
pub fn smoothness_covariance(grid_n: usize, gamma: f64, delta: f64) -> Result<Array2<f64>> {
    if grid_n == 0 {
        return Err(Error::InvalidParameter { name: "grid_n", reason: "grid must be non-empty".into() });
    }
    if !(delta > 0.0) || gamma < 0.0 || !gamma.is_finite() || !delta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma/delta",
            reason: format!("need gamma >= 0 and delta > 0, got gamma={gamma}, delta={delta}"),
        });
    }
    let n = grid_n;
    let m = n * n;
    let w = gamma * (n * n) as f64;
    let mut op = Array2::<f64>::zeros((m, m));
    for row in 0..n {
        for col in 0..n {
            let c = row * n + col;
            let mut degree = 0.0;
            let mut neighbor = |r: usize| {
                degree += 1.0;
                op[[c, r]] -= w;
            };
            if col > 0 {
                neighbor(c - 1);
            }
            if col + 1 < n {
                neighbor(c + 1);
            }
            if row > 0 {
                neighbor(c - n);
            }
            if row + 1 < n {
                neighbor(c + n);
            }
            op[[c, c]] = w * degree + delta;
        }
    }
    let squared = op.dot(&op);
    let chol = linalg::cholesky_spd(&squared.view())?;
    Ok(linalg::spd_inverse(&chol.view()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::fd_gradient;

    #[test]
    fn uniform_field_observes_mid_height_pressure() {
        // With constant permeability the discrete pressure equals the linear
        // profile (row + 0.5)/n at the cell centers, so the mid-height
        // observation reads 0.5.
        let model = EllipticFdModel::new(17).unwrap();
        let f = model.eval(Array1::zeros(289).view()).unwrap();
        assert!((f - 0.5).abs() < 1e-10, "uniform-field pressure {f}");
    }

    #[test]
    fn constant_shift_leaves_pressure_unchanged() {
        let model = EllipticFdModel::new(9).unwrap();
        let base = model.eval(Array1::zeros(81).view()).unwrap();
        let shifted = model.eval(Array1::from_elem(81, 1.3).view()).unwrap();
        assert!((base - shifted).abs() < 1e-12, "{base} vs {shifted}");
    }

    #[test]
    fn adjoint_gradient_matches_differences() {
        let model = EllipticFdModel::new(9).unwrap();
        let x = Array1::from_shape_fn(81, |i| 0.3 * (i as f64 * 0.7).sin());
        let adj = model.grad(x.view()).unwrap();
        let fd = fd_gradient(&model, x.view()).unwrap();
        let scale = fd.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        for i in 0..81 {
            assert!(
                (adj[i] - fd[i]).abs() <= 1e-5 * scale,
                "coord {i}: adjoint {} vs fd {}",
                adj[i],
                fd[i]
            );
        }
    }

    #[test]
    fn gradient_points_along_observable_growth() {
        // Nudging the field along the adjoint gradient must increase the
        // observable (first-order growth check).
        let model = EllipticFdModel::new(9).unwrap();
        let x = Array1::from_shape_fn(81, |i| 0.1 * (i as f64).cos());
        let g = model.grad(x.view()).unwrap();
        let f0 = model.eval(x.view()).unwrap();
        let norm = g.dot(&g).sqrt();
        assert!(norm > 0.0);
        let f1 = model.eval((&x + &(1e-4 / norm * &g)).view()).unwrap();
        assert!(f1 > f0, "step along gradient decreased f: {f0} -> {f1}");
    }

    #[test]
    fn smoothness_prior_is_spd_and_inverts_cleanly() {
        let n = 5;
        let cov = smoothness_covariance(n, 0.1, 0.5).unwrap();
        assert_eq!(cov.nrows(), 25);
        // Symmetry.
        for i in 0..25 {
            for j in 0..i {
                assert!((cov[[i, j]] - cov[[j, i]]).abs() < 1e-12);
            }
        }
        // (gamma L + delta I)^2 cov = I, with L carrying the 1/h^2 = n^2
        // finite-difference scaling.
        let w = 0.1 * (n * n) as f64;
        let mut op = Array2::<f64>::zeros((25, 25));
        for row in 0..n {
            for col in 0..n {
                let c = row * n + col;
                let neighbors: Vec<usize> = [
                    (col > 0).then(|| c - 1),
                    (col + 1 < n).then(|| c + 1),
                    (row > 0).then(|| c - n),
                    (row + 1 < n).then(|| c + n),
                ]
                .into_iter()
                .flatten()
                .collect();
                op[[c, c]] = w * neighbors.len() as f64 + 0.5;
                for r in neighbors {
                    op[[c, r]] = -w;
                }
            }
        }
        let product = op.dot(&op).dot(&cov);
        for i in 0..25 {
            for j in 0..25 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((product[[i, j]] - expect).abs() < 1e-9, "({i},{j}) = {}", product[[i, j]]);
            }
        }
    }

    #[test]
    fn rejects_tiny_grids_and_bad_fields() {
        assert!(EllipticFdModel::new(4).is_err());
        let model = EllipticFdModel::new(5).unwrap();
        assert!(model.eval(Array1::zeros(7).view()).is_err());
        assert!(model.eval(Array1::from_elem(25, 1e4).view()).is_err());
    }
}
