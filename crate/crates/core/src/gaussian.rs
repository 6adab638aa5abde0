//! Standard normal reference measure.
//!
//! `cdf` and `sf` are both built on the complementary error function so that
//! each keeps full relative accuracy in its own tail, and `sf(x) == cdf(-x)`
//! holds bit for bit. The log-tail functions keep working far past the point
//! where `sf` underflows, which the tail-ratio scans over large grids need.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `ln(sqrt(2*pi))`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Threshold above which `ln_sf` switches to the Mills-ratio continued fraction.
const MILLS_CF_THRESHOLD: f64 = 20.0;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `Phi(x) = P[xi <= x]`.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `Phi_bar(x) = 1 - Phi(x) = P[xi > x]`, computed as `erfc(x/sqrt 2)/2`.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Mills ratio `Phi_bar(x) / phi(x)` for large positive `x`, by the modified
/// Lentz evaluation of `1/(x + 1/(x + 2/(x + 3/(x + ...))))`.
fn mills_ratio_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// `ln Phi_bar(x)`, finite for every finite `x`.
pub fn ln_sf(x: f64) -> f64 {
    if x < 0.0 {
        (-cdf(x)).ln_1p()
    } else if x < MILLS_CF_THRESHOLD {
        sf(x).ln()
    } else {
        ln_pdf(x) + mills_ratio_cf(x).ln()
    }
}

/// `ln Phi(x)`, finite for every finite `x`.
#[inline]
pub fn ln_cdf(x: f64) -> f64 {
    ln_sf(-x)
}
