//! First and second moments of a one-dimensional truncated normal.
//!
//! All tail work is expressed through `erfcx` so that a truncation deep in
//! the tail (even 30 standard deviations out) loses no precision to the
//! classic `Phi(b) - Phi(a)` cancellation. The moment ratios share the
//! factor `exp(-a^2/2)`, so they stay representable long after the interval
//! mass itself has underflowed; the mass is still checked and reported as a
//! tail overflow when it cannot be represented, because every downstream
//! quantity would be meaningless.

use std::f64::consts::FRAC_2_SQRT_PI;

use crate::gaussian::special::{erf, erfcx, normal_pdf};
use crate::{Error, Result, TargetInterval};

/// Mean and variance of the nominal pushforward restricted to the target
/// interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoments {
    /// Truncated mean; always inside the interval.
    pub nu_t: f64,
    /// Truncated variance; always below the untruncated variance.
    pub gamma_t_sq: f64,
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// sqrt(2/pi)
const SQRT_2_OVER_PI: f64 = FRAC_2_SQRT_PI * FRAC_1_SQRT_2;

/// Moments of `N(nu, gamma_sq)` truncated to `y`.
pub fn truncated_normal_moments(
    nu: f64,
    gamma_sq: f64,
    y: &TargetInterval,
) -> Result<TruncatedMoments> {
    if !(gamma_sq > 0.0) || !gamma_sq.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma_sq",
            reason: format!("pushforward variance must be positive and finite, got {gamma_sq}"),
        });
    }
    let g = gamma_sq.sqrt();
    let a = (y.y_min() - nu) / g;
    let b = (y.y_max() - nu) / g;

    // Standardized moment ratios r1 = (phi(a)-phi(b))/Z and
    // r2 = (a phi(a)-b phi(b))/Z, computed in whichever frame is stable.
    let (r1, r2) = if b <= 0.0 {
        let (r1, r2) = tail_ratios(-b, -a)?;
        (-r1, r2)
    } else if a >= 0.0 {
        tail_ratios(a, b)?
    } else {
        central_ratios(a, b)
    };

    let mean = (nu + g * r1).clamp(y.y_min(), y.y_max());
    let var = gamma_sq * (1.0 + r2 - r1 * r1);
    if !(var > 0.0) || !var.is_finite() || !mean.is_finite() {
        return Err(Error::TailOverflow);
    }
    Ok(TruncatedMoments { nu_t: mean, gamma_t_sq: var })
}

/// Ratios for 0 <= a < b. Everything is scaled by exp(a^2/2): with
/// d = exp((a^2-b^2)/2) in (0, 1],
///   Z "=" (erfcx(a/s2) - d erfcx(b/s2)) / 2
///   r1 = sqrt(2/pi) (1 - d)   / (erfcx(a/s2) - d erfcx(b/s2))
///   r2 = sqrt(2/pi) (a - d b) / (erfcx(a/s2) - d erfcx(b/s2))
/// Both bracket terms are positive (erfcx decreases, d <= 1), so no
/// cancellation beyond what the interval geometry itself dictates.
fn tail_ratios(a: f64, b: f64) -> Result<(f64, f64)> {
    let span = (b - a) * (b + a) * 0.5;
    let d = (-span).exp();
    let ea = erfcx(a * FRAC_1_SQRT_2);
    let eb = erfcx(b * FRAC_1_SQRT_2);
    let bracket = ea - d * eb;
    // The interval mass is exp(-a^2/2) * bracket / 2; representability of
    // the exponential factor decides whether downstream weights exist.
    let mass_scale = (-0.5 * a * a).exp();
    if mass_scale * bracket <= 0.0 || bracket <= 0.0 {
        return Err(Error::TailOverflow);
    }
    let one_minus_d = -(-span).exp_m1();
    let r1 = SQRT_2_OVER_PI * one_minus_d / bracket;
    let r2 = SQRT_2_OVER_PI * (a - d * b) / bracket;
    Ok((r1, r2))
}

/// Ratios for a < 0 < b: the mass is O(1), so direct formulas are fine.
/// Z = (erf(b/s2) + erf(-a/s2))/2 adds two positive terms.
fn central_ratios(a: f64, b: f64) -> (f64, f64) {
    let z = 0.5 * (erf(b * FRAC_1_SQRT_2) + erf(-a * FRAC_1_SQRT_2));
    let pa = normal_pdf(a);
    let pb = normal_pdf(b);
    ((pa - pb) / z, (a * pa - b * pb) / z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn interval(a: f64, b: f64) -> TargetInterval {
        TargetInterval::new(a, b).unwrap()
    }

    #[test]
    fn half_normal() {
        // [0, 1e8] standardized is numerically a half line: mean sqrt(2/pi),
        // variance 1 - 2/pi.
        let tm = truncated_normal_moments(0.0, 1.0, &interval(0.0, 1e8)).unwrap();
        assert_relative_eq!(tm.nu_t, 0.797_884_560_802_865_4, max_relative = 1e-13);
        assert_relative_eq!(tm.gamma_t_sq, 0.363_380_227_632_418_66, max_relative = 1e-13);
    }

    #[test]
    fn unit_interval_in_the_near_tail() {
        // Frozen from a 40-digit reference for N(0,1) on [1, 2].
        let tm = truncated_normal_moments(0.0, 1.0, &interval(1.0, 2.0)).unwrap();
        assert_relative_eq!(tm.nu_t, 1.383_169_046_631_552_8, max_relative = 1e-12);
        assert_relative_eq!(tm.gamma_t_sq, 0.072_742_886_100_601_29, max_relative = 1e-12);
    }

    #[test]
    fn deep_tail_reference() {
        // [8, 9] and [29, 30] standardized, frozen from the same reference.
        let tm = truncated_normal_moments(0.0, 1.0, &interval(8.0, 9.0)).unwrap();
        assert_relative_eq!(tm.nu_t, 8.121_188_992_979_797, max_relative = 1e-10);
        assert_relative_eq!(tm.gamma_t_sq, 0.014_148_542_782_748_111, max_relative = 1e-10);
        let tm = truncated_normal_moments(0.0, 1.0, &interval(29.0, 30.0)).unwrap();
        assert_relative_eq!(tm.nu_t, 29.034_401_237_736_177, max_relative = 1e-9);
        assert_relative_eq!(tm.gamma_t_sq, 1.180_660_488_618_685_3e-3, max_relative = 1e-8);
    }

    #[test]
    fn reflection_symmetry() {
        let right = truncated_normal_moments(0.0, 1.0, &interval(1.0, 2.0)).unwrap();
        let left = truncated_normal_moments(0.0, 1.0, &interval(-2.0, -1.0)).unwrap();
        assert_relative_eq!(left.nu_t, -right.nu_t, max_relative = 1e-14);
        assert_relative_eq!(left.gamma_t_sq, right.gamma_t_sq, max_relative = 1e-14);
    }

    #[test]
    fn symmetric_interval_keeps_the_mean() {
        let tm = truncated_normal_moments(3.0, 4.0, &interval(1.0, 5.0)).unwrap();
        assert_relative_eq!(tm.nu_t, 3.0, epsilon = 1e-14);
        assert!(tm.gamma_t_sq < 4.0);
    }

    #[test]
    fn location_scale_consistency() {
        // Moments must transform affinely with the parent density.
        let base = truncated_normal_moments(0.0, 1.0, &interval(0.5, 1.5)).unwrap();
        let shifted = truncated_normal_moments(10.0, 4.0, &interval(11.0, 13.0)).unwrap();
        assert_relative_eq!(shifted.nu_t, 10.0 + 2.0 * base.nu_t, max_relative = 1e-13);
        assert_relative_eq!(shifted.gamma_t_sq, 4.0 * base.gamma_t_sq, max_relative = 1e-13);
    }

    #[test]
    fn mean_stays_inside_and_variance_shrinks() {
        for k in 0..40 {
            let lo = -6.0 + 0.31 * k as f64;
            let y = interval(lo, lo + 0.7 + 0.05 * k as f64);
            let tm = truncated_normal_moments(0.3, 2.7, &y).unwrap();
            assert!(y.contains(tm.nu_t));
            assert!(tm.gamma_t_sq > 0.0 && tm.gamma_t_sq < 2.7);
        }
    }

    #[test]
    fn unrepresentable_tail_is_an_error() {
        let r = truncated_normal_moments(0.0, 1.0, &interval(40.0, 41.0));
        assert!(matches!(r, Err(Error::TailOverflow)));
    }

    #[test]
    fn bad_variance_is_an_error() {
        assert!(truncated_normal_moments(0.0, 0.0, &interval(0.0, 1.0)).is_err());
        assert!(truncated_normal_moments(0.0, -1.0, &interval(0.0, 1.0)).is_err());
    }
}
