//! Dense helpers for the small covariance matrices this crate works with.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::{Error, Result};

/// Relative asymmetry tolerated before a covariance is rejected.
const SYM_TOL: f64 = 1e-12;

/// Diagonal jitter applied once, as a fraction of the mean diagonal entry,
/// when a factorization hits a non-positive pivot.
const JITTER_FRACTION: f64 = 1e-12;

pub(crate) fn check_symmetric(a: &ArrayView2<f64>) -> Result<()> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    if worst > SYM_TOL * scale {
        return Err(Error::Asymmetric { max_abs_diff: worst });
    }
    Ok(())
}

/// Plain lower Cholesky; reports the failing pivot index on breakdown.
pub(crate) fn cholesky(a: &ArrayView2<f64>) -> std::result::Result<Array2<f64>, usize> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(j);
        }
        let piv = d.sqrt();
        l[[j, j]] = piv;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / piv;
        }
    }
    Ok(l)
}

/// Cholesky with the crate's jitter policy: on a failed pivot, add
/// `1e-12 * trace / n` to the diagonal once and retry, then give up.
pub(crate) fn cholesky_spd(a: &ArrayView2<f64>) -> Result<Array2<f64>> {
    match cholesky(a) {
        Ok(l) => Ok(l),
        Err(_) => {
            let n = a.nrows();
            let jitter = JITTER_FRACTION * a.diag().sum() / n as f64;
            let mut b = a.to_owned();
            for i in 0..n {
                b[[i, i]] += jitter;
            }
            cholesky(&b.view()).map_err(|pivot| Error::NotPositiveDefinite { pivot })
        }
    }
}

/// Solve `L z = b` for lower-triangular `L`.
pub(crate) fn solve_lower(l: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut z = b.to_owned();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[[i, k]] * z[k];
        }
        z[i] = s / l[[i, i]];
    }
    z
}

/// Solve `L' z = b` for lower-triangular `L`.
pub(crate) fn solve_lower_t(l: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut z = b.to_owned();
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * z[k];
        }
        z[i] = s / l[[i, i]];
    }
    z
}

/// Solve `(L L') x = b`.
pub(crate) fn spd_solve(l: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    let y = solve_lower(l, b);
    solve_lower_t(l, &y.view())
}

/// Inverse of `L L'` column by column; the result is symmetrized to clear
/// round-off asymmetry.
pub(crate) fn spd_inverse(l: &ArrayView2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut inv = Array2::<f64>::zeros((n, n));
    let mut e = Array1::<f64>::zeros(n);
    for j in 0..n {
        e[j] = 1.0;
        let col = spd_solve(l, &e.view());
        inv.column_mut(j).assign(&col);
        e[j] = 0.0;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (inv[[i, j]] + inv[[j, i]]);
            inv[[i, j]] = v;
            inv[[j, i]] = v;
        }
    }
    inv
}
