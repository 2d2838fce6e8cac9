//! Error-function family tuned for tail work.
//!
//! `erfcx(t) = exp(t^2) erfc(t)` is the workhorse: it stays O(1/t) far into
//! the tail where `erfc` underflows, which is what makes truncated-normal
//! moments computable at 30 standard deviations. The rational approximations
//! below follow Cody's classic three-interval scheme (max relative error a
//! few ulps), with the usual split-exponential trick to keep `exp(-t^2)`
//! accurate.

/// Boundary between the central rational approximation and the erfcx forms.
const THRESH: f64 = 0.46875;

/// 1/sqrt(pi).
const INV_SQRT_PI: f64 = 5.641_895_835_477_562_9e-1;

/// Below this, `exp(t^2)` in the negative-argument reflection overflows.
const NEG_LIMIT: f64 = -26.628;

const A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_56e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_47e3,
    1.857_777_061_846_031_53e-1,
];
const B: [f64; 4] = [
    2.360_129_095_234_412_09e1,
    2.440_246_379_344_441_73e2,
    1.282_616_526_077_372_28e3,
    2.844_236_833_439_170_62e3,
];
const C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_375_94e0,
    6.611_919_063_714_162_95e1,
    2.986_351_381_974_001_31e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_58e3,
    2.051_078_377_826_071_47e3,
    1.230_339_354_797_997_25e3,
    2.153_115_354_744_038_46e-8,
];
const D: [f64; 8] = [
    1.574_492_611_070_983_47e1,
    1.176_939_508_913_124_99e2,
    5.371_811_018_620_098_58e2,
    1.621_389_574_566_690_19e3,
    3.290_799_235_733_459_63e3,
    4.362_619_090_143_247_16e3,
    3.439_367_674_143_721_64e3,
    1.230_339_354_803_749_42e3,
];
const P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const Q: [f64; 5] = [
    2.568_520_192_289_822_42e0,
    1.872_952_849_923_460_47e0,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];

/// erf on |x| <= THRESH.
fn erf_central(x: f64) -> f64 {
    let z = x * x;
    let mut num = A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + A[i]) * z;
        den = (den + B[i]) * z;
    }
    x * (num + A[3]) / (den + B[3])
}

/// erfcx on THRESH < y <= 4.
fn erfcx_mid(y: f64) -> f64 {
    let mut num = C[8] * y;
    let mut den = y;
    for i in 0..7 {
        num = (num + C[i]) * y;
        den = (den + D[i]) * y;
    }
    (num + C[7]) / (den + D[7])
}

/// erfcx on y > 4.
fn erfcx_far(y: f64) -> f64 {
    // Past 1/(2 sqrt(eps)) the correction term vanishes below working
    // precision and the leading asymptote is exact to double precision.
    if y > 6.71e7 {
        return INV_SQRT_PI / y;
    }
    let z = 1.0 / (y * y);
    let mut num = P[5] * z;
    let mut den = z;
    for i in 0..4 {
        num = (num + P[i]) * z;
        den = (den + Q[i]) * z;
    }
    let r = z * (num + P[4]) / (den + Q[4]);
    (INV_SQRT_PI - r) / y
}

/// `exp(-y^2)` with the argument split at a multiple of 1/16 so the large
/// square is exact and the residual exponent stays small.
fn exp_neg_sq(y: f64) -> f64 {
    let hi = (y * 16.0).trunc() / 16.0;
    let del = (y - hi) * (y + hi);
    (-hi * hi).exp() * (-del).exp()
}

/// Scaled complementary error function `exp(t^2) erfc(t)`.
///
/// Accurate to a few ulps for t >= 0; for t < 0 it grows like
/// `2 exp(t^2)` and overflows to infinity below about -26.6.
pub fn erfcx(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    let y = t.abs();
    let r = if y <= THRESH {
        (t * t).exp() * (1.0 - erf_central(t))
    } else if y <= 4.0 {
        erfcx_mid(y)
    } else {
        erfcx_far(y)
    };
    if t < -THRESH {
        if t < NEG_LIMIT {
            return f64::INFINITY;
        }
        // erfcx(-t) = 2 exp(t^2) - erfcx(t), with the same split trick.
        let hi = (t * 16.0).trunc() / 16.0;
        let del = (t - hi) * (t + hi);
        let e = (hi * hi).exp() * del.exp();
        2.0 * e - r
    } else {
        r
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    if y <= THRESH {
        return 1.0 - erf_central(x);
    }
    let scaled = if y <= 4.0 { erfcx_mid(y) } else { erfcx_far(y) };
    let r = exp_neg_sq(y) * scaled;
    if x < 0.0 {
        2.0 - r
    } else {
        r
    }
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.abs() <= THRESH {
        erf_central(x)
    } else {
        let tail = 1.0 - erfc(x.abs());
        if x < 0.0 {
            -tail
        } else {
            tail
        }
    }
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub(crate) fn normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    (-0.5 * z * z).exp() * INV_SQRT_2PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn erfcx_reference_points() {
        // Frozen from a 40-digit evaluation of exp(t^2) erfc(t).
        assert_relative_eq!(erfcx(1.0), 0.427_583_576_155_807, max_relative = 1e-14);
        assert_relative_eq!(erfcx(0.1), 0.896_456_979_969_126_6, max_relative = 1e-14);
        assert_relative_eq!(erfcx(2.5), 0.210_806_364_061_143_58, max_relative = 1e-14);
        assert_relative_eq!(erfcx(5.0), 0.110_704_637_733_068_63, max_relative = 1e-14);
        assert_relative_eq!(erfcx(10.0), 0.056_140_992_743_822_586, max_relative = 1e-14);
        assert_relative_eq!(erfcx(30.0), 0.018_795_888_861_416_751, max_relative = 1e-14);
        assert_relative_eq!(erfcx(-1.0), 5.008_980_080_762_283, max_relative = 1e-13);
        assert_relative_eq!(erfcx(-3.0), 16_205.988_853_999_587, max_relative = 1e-13);
    }

    #[test]
    fn erfcx_asymptote() {
        // t * sqrt(pi) * erfcx(t) -> 1; at t = 30 the first correction term
        // is 1/(2 t^2) ~ 5.6e-4.
        let v = erfcx(30.0) * 30.0 * std::f64::consts::PI.sqrt();
        assert!((v - 1.0).abs() < 1e-3, "asymptote violated: {v}");
        assert_relative_eq!(v, 0.999_445_367_808_306_5, max_relative = 1e-13);
    }

    #[test]
    fn erfcx_negative_identity() {
        for &t in &[0.3, 0.9, 1.7, 3.1, 4.8] {
            let lhs = erfcx(-t);
            let rhs = 2.0 * (t * t).exp() - erfcx(t);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
        assert_eq!(erfcx(-27.0), f64::INFINITY);
    }

    #[test]
    fn erfc_erf_consistency() {
        for &x in &[-6.0, -2.2, -0.3, 0.0, 0.2, 1.0, 3.3, 8.0] {
            assert_relative_eq!(erf(x) + erfc(x), 1.0, epsilon = 1e-15);
            assert_relative_eq!(erf(-x), -erf(x), epsilon = 1e-15);
        }
        assert_relative_eq!(erfc(1.0), 0.157_299_207_050_285_13, max_relative = 1e-14);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert_relative_eq!(normal_cdf(1.96), 0.975_002_104_851_779_7, epsilon = 1e-14);
        assert_relative_eq!(normal_cdf(-1.96), 0.024_997_895_148_220_43, epsilon = 1e-14);
        assert_relative_eq!(normal_cdf(4.0), 0.999_968_328_758_166_9, epsilon = 1e-14);
        assert_relative_eq!(normal_cdf(-8.0), 6.220_960_574_271_78e-16, max_relative = 1e-13);
        for &z in &[-5.0, -1.0, 0.7, 2.5] {
            assert_relative_eq!(normal_cdf(z) + normal_cdf(-z), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn normal_cdf_monotone_on_grid() {
        let mut prev = 0.0;
        for k in 0..=6000 {
            let z = -30.0 + k as f64 * 0.01;
            let p = normal_cdf(z);
            assert!(p >= prev, "cdf decreased at z = {z}");
            prev = p;
        }
    }
}
