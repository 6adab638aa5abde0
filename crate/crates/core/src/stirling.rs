//! Stirling-series remainder.
//!
//! `stirlerr(x) = ln Γ(x+1) - ln sqrt(2π) - (x + 1/2) ln x + x`, the error of
//! Stirling's formula for `ln x!`. Writing `x! = sqrt(2π) x^(x+1/2) e^(-x + θ(x)/(12x))`
//! gives `θ(x) = 12 x stirlerr(x)`, which lies in `(0, 1)` for every `x > 0`.

use crate::error::{domain, Result};
use crate::gaussian::LN_SQRT_2PI;

#[allow(clippy::excessive_precision)]
/// `stirlerr(k)` for `k = 0..=15`, exact to double precision (index 0 is unused).
const STIRLERR_TABLE: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_22,
    0.041_340_695_955_409_294_09,
    0.027_677_925_684_998_339_15,
    0.020_790_672_103_765_093_11,
    0.016_644_691_189_821_192_16,
    0.013_876_128_823_070_747_999,
    0.011_896_709_945_891_770_095,
    0.010_411_265_261_972_096_497,
    0.009_255_462_182_712_732_918,
    0.008_330_563_433_362_871_256,
    0.007_573_675_487_951_840_795,
    0.006_942_840_107_209_529_866,
    0.006_408_994_188_004_207_068,
    0.005_951_370_112_758_847_736,
    0.005_554_733_551_962_801_371,
];

const S0: f64 = 1.0 / 12.0;
const S1: f64 = 1.0 / 360.0;
const S2: f64 = 1.0 / 1260.0;
const S3: f64 = 1.0 / 1680.0;
const S4: f64 = 1.0 / 1188.0;

/// Error of Stirling's approximation to `ln x!`, for `x > 0`.
///
/// Uses a table at small integers, the asymptotic series above 15, and a
/// direct `ln Γ` difference for small non-integer arguments.
pub fn stirlerr(x: f64) -> f64 {
    if x > 15.0 {
        let xx = x * x;
        return (S0 - (S1 - (S2 - (S3 - S4 / xx) / xx) / xx) / xx) / x;
    }
    if x.fract() == 0.0 && x >= 1.0 {
        return STIRLERR_TABLE[x as usize];
    }
    libm::lgamma(x + 1.0) - (x + 0.5) * x.ln() + x - LN_SQRT_2PI
}

/// The Stirling correction `θ(x)` defined by
/// `x! = sqrt(2π) x^(x+1/2) exp(-x + θ(x)/(12x))`.
///
/// `θ` is strictly between 0 and 1 and increases towards 1 as `x` grows
/// (`θ(x) = 1 - 1/(30 x^2) + O(x^-4)`).
pub fn stirling_theta(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("stirling_theta requires x > 0, got {x}")));
    }
    if x > 15.0 {
        // 1 - 12 x^2 (S0/x - stirlerr(x)) directly, so rounding can never push the result past 1.
        // Below 1 - 2^-53 is not representable once 1/(30 x^2) drops under it (x above ~1.7e7).
        let xx = x * x;
        return Ok(1.0 - 12.0 * (S1 - (S2 - (S3 - S4 / xx) / xx) / xx) / xx);
    }
    Ok(12.0 * x * stirlerr(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_at_one_matches_closed_expression() {
        // ln Γ(2) = 0, so θ(1) = 12 (1 - ln sqrt(2π)).
        let want = 12.0 * (1.0 - LN_SQRT_2PI);
        let got = stirling_theta(1.0).unwrap();
        assert!((got - want).abs() < 1e-14);
        assert!((got - 0.9727).abs() < 1e-4);
    }

    #[test]
    fn table_agrees_with_lgamma() {
        for (k, &tabulated) in STIRLERR_TABLE.iter().enumerate().skip(1) {
            let x = k as f64;
            let direct = libm::lgamma(x + 1.0) - (x + 0.5) * x.ln() + x - LN_SQRT_2PI;
            assert!((tabulated - direct).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn series_and_table_join_smoothly() {
        // Series at 15 against the exact table value.
        let xx = 225.0;
        let series = (S0 - (S1 - (S2 - (S3 - S4 / xx) / xx) / xx) / xx) / 15.0;
        // The first omitted term, 1/(1188 x^11), is about 1e-16 at x = 15.
        assert!((series - STIRLERR_TABLE[15]).abs() < 3e-16);
    }

    #[test]
    fn theta_in_unit_interval_and_tends_to_one() {
        let mut prev = 0.0;
        let mut x = 1.0;
        while x <= 1e6 {
            let t = stirling_theta(x).unwrap();
            assert!(t > 0.0 && t < 1.0, "theta({x}) = {t}");
            assert!(t >= prev, "theta not increasing at {x}");
            prev = t;
            x = (x * 1.37f64).ceil();
        }
        let t = stirling_theta(1e6).unwrap();
        assert!((1.0 - t) < 1e-12);
        let t10 = stirling_theta(10.0).unwrap();
        assert!((t10 - (1.0 - 1.0 / 3000.0)).abs() < 1e-6);
    }

    #[test]
    fn theta_rejects_non_positive() {
        assert!(stirling_theta(0.0).is_err());
        assert!(stirling_theta(-2.0).is_err());
        assert!(stirling_theta(f64::NAN).is_err());
    }

    #[test]
    fn non_integer_arguments() {
        let t = stirling_theta(0.5).unwrap();
        assert!(t > 0.0 && t < 1.0);
        let t = stirling_theta(7.25).unwrap();
        assert!(t > 0.0 && t < 1.0);
    }
}
