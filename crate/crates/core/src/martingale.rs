//! Densities of the equivalent martingale measures.
//!
//! In the continuous model the density is `Z = exp(-ω(1)/2 - 1/8)`. In the
//! `n`-step binomial model it is `Z_n = exp(-a_n ω(1) - b_n)`, where `a_n`
//! makes the discounted price a martingale and `b_n` normalizes the measure.
//! For `p = 1/2` the coefficients are `a_n = 1/2` and
//! `b_n = n ln cosh(1/(2 sqrt n))`, increasing to `1/8`.
//!
//! For `p != 1/2` the one-step log-returns are `z_{1,1}/sqrt(n)` (up) and
//! `z_{1,0}/sqrt(n)` (down) with `z_{1,0} = -sqrt(p/(1-p))`,
//! `z_{1,1} = sqrt((1-p)/p)`, and
//!
//! ```text
//! a_n = sqrt(n)/(z11 - z10) * ln( p/(1-p) * (e^{z11/sqrt n} - 1)/(1 - e^{z10/sqrt n}) )
//! b_n = n ln( (1-p) e^{-z10 a_n/sqrt n} + p e^{-z11 a_n/sqrt n} )
//! ```
//!
//! Both expressions cancel to leading order, so they are evaluated through
//! `e^x - 1 - x` kernels instead of `exp`.

use serde::Serialize;

use crate::binomial::BinomialGrid;
use crate::error::{domain, Error, Result};
use crate::summation::par_map_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingaleCoefficients {
    pub n: u64,
    pub p: f64,
    pub a: f64,
    pub b: f64,
    /// `1/2 - (2p-1)/(24 sqrt(p(1-p))) n^{-1/2}`
    pub a_asym2: f64,
    /// `1/8 - (1-p+p^2)/(576 p(1-p)) n^{-1}`
    pub b_asym2: f64,
}

/// `e^x - 1 - x` without cancellation for small `|x|`.
pub(crate) fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let mut term = x * x / 2.0;
        let mut sum = term;
        for k in 3..40 {
            term *= x / k as f64;
            let next = sum + term;
            if next == sum {
                break;
            }
            sum = next;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// `ln((e^x - 1)/x)`, with the removable singularity at zero filled in.
fn ln_expm1_over_x(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (expm1_minus_x(x) / x).ln_1p()
    }
}

/// Up and down standardized one-step moves `(z_{1,1}, z_{1,0})`.
pub fn one_step_moves(p: f64) -> (f64, f64) {
    let q = 1.0 - p;
    ((q / p).sqrt(), -(p / q).sqrt())
}

fn asymptotics(n: u64, p: f64) -> (f64, f64) {
    let nf = n as f64;
    let pq = p * (1.0 - p);
    let a2 = 0.5 - (2.0 * p - 1.0) / (24.0 * pq.sqrt()) / nf.sqrt();
    let b2 = 0.125 - (1.0 - p + p * p) / (576.0 * pq) / nf;
    (a2, b2)
}

/// Exact coefficients `(a_n, b_n)` for `p` in `[1/2, 1)`.
pub fn coefficients(n: u64, p: f64) -> Result<MartingaleCoefficients> {
    if !(0.5..1.0).contains(&p) {
        return Err(domain(format!(
            "martingale coefficients require p in [1/2, 1), got {p} (use coefficients_probe)"
        )));
    }
    coefficients_probe(n, p)
}

/// Same formulas without the `p >= 1/2` restriction; `p` only has to lie in `(0, 1)`.
pub fn coefficients_probe(n: u64, p: f64) -> Result<MartingaleCoefficients> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("probability must lie in (0,1), got {p}")));
    }
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    let nf = n as f64;
    let (a2, b2) = asymptotics(n, p);
    if p == 0.5 {
        let half = 0.25 / nf.sqrt();
        // ln cosh(x) = ln(1 + 2 sinh^2(x/2))
        let sh = half.sinh();
        let b = nf * (2.0 * sh * sh).ln_1p();
        return Ok(MartingaleCoefficients {
            n,
            p,
            a: 0.5,
            b,
            a_asym2: a2,
            b_asym2: b2,
        });
    }
    let q = 1.0 - p;
    let (up, down) = one_step_moves(p);
    let s = 1.0 / nf.sqrt();
    // p/(1-p) * up/(-down) == 1, so the log splits into two ln((e^x-1)/x) terms.
    let ln_ratio = ln_expm1_over_x(up * s) - ln_expm1_over_x(down * s);
    let a = nf.sqrt() / (up - down) * ln_ratio;
    // q*(-a*down*s) + p*(-a*up*s) == 0, leaving only the second-order parts.
    let inner = q * expm1_minus_x(-down * a * s) + p * expm1_minus_x(-up * a * s);
    let b = nf * inner.ln_1p();
    Ok(MartingaleCoefficients {
        n,
        p,
        a,
        b,
        a_asym2: a2,
        b_asym2: b2,
    })
}

/// Residual of the one-step martingale condition under the measure encoded by
/// `coeffs`: `|q e^{z11/sqrt n} + (1-q) e^{z10/sqrt n} - 1|` with
/// `q = p exp(-a z11/sqrt n - b/n)`.
pub fn one_step_risk_neutral_check(coeffs: &MartingaleCoefficients) -> f64 {
    let s = 1.0 / (coeffs.n as f64).sqrt();
    let (up, down) = one_step_moves(coeffs.p);
    let q_up = risk_neutral_up_probability(coeffs);
    (q_up * (up * s).exp_m1() + (1.0 - q_up) * (down * s).exp_m1()).abs()
}

/// One-step risk-neutral probability of an up move.
pub fn risk_neutral_up_probability(coeffs: &MartingaleCoefficients) -> f64 {
    let nf = coeffs.n as f64;
    let (up, _) = one_step_moves(coeffs.p);
    coeffs.p * (-coeffs.a * up / nf.sqrt() - coeffs.b / nf).exp()
}

/// Continuous-model density `Z(x) = exp(-x/2 - 1/8)`.
#[inline]
pub fn continuous_density(x: f64) -> f64 {
    (-0.5 * x - 0.125).exp()
}

/// `Z_n` on a grid, kept as logarithms.
#[derive(Debug, Clone, Serialize)]
pub struct DensityEval {
    pub n: u64,
    pub p: f64,
    pub log_z: Vec<f64>,
}

impl DensityEval {
    /// `sum_k Z_n(z_k) f_{n,k}`; equals one when `b_n` is the exact normalizer.
    pub fn total_mass(&self, grid: &BinomialGrid) -> f64 {
        let logf = grid.logf();
        par_map_sum(self.log_z.len(), |k| (self.log_z[k] + logf[k]).exp())
    }

    pub fn value(&self, k: usize) -> f64 {
        self.log_z[k].exp()
    }
}

/// `ln Z_n(z_k) = -a_n z_k - b_n` for every atom of `grid`.
pub fn density_on_grid(grid: &BinomialGrid, coeffs: &MartingaleCoefficients) -> Result<DensityEval> {
    if grid.n() != coeffs.n || grid.p() != coeffs.p {
        return Err(Error::Usage(format!(
            "grid (n={}, p={}) does not match coefficients (n={}, p={})",
            grid.n(),
            grid.p(),
            coeffs.n,
            coeffs.p
        )));
    }
    let log_z = grid.z().iter().map(|&z| -coeffs.a * z - coeffs.b).collect();
    Ok(DensityEval {
        n: coeffs.n,
        p: coeffs.p,
        log_z,
    })
}

/// Smallest `n` on the doubling sequence `1, 2, 4, .., n_max` from which on
/// `0 < a_n <= 1/2` and `1/8 - delta <= b_n <= 1/8` hold for every later
/// entry. `None` when the window is still violated at `n_max`.
pub fn bound_window_threshold(p: f64, delta: f64, n_max: u64) -> Result<Option<u64>> {
    let mut ns = Vec::new();
    let mut n = 1u64;
    while n <= n_max {
        ns.push(n);
        n *= 2;
    }
    let mut threshold = None;
    for &n in ns.iter().rev() {
        let c = coefficients(n, p)?;
        let ok = c.a > 0.0 && c.a <= 0.5 && c.b >= 0.125 - delta && c.b <= 0.125;
        if !ok {
            break;
        }
        threshold = Some(n);
    }
    Ok(threshold)
}
