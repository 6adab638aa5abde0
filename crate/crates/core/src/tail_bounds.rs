//! Gaussian dominance of standardized binomial probabilities.
//!
//! The local comparison bounds each probability by the Gaussian density at
//! the neighbouring atom, scaled by the grid spacing:
//!
//! ```text
//! right side, floor(np) <= k <= n :  f_{n,k} <= C dz phi(z_{n,k+1})
//! left side,  0 <= k <= ceil(np)  :  f_{n,k} <= C dz phi(z_{n,k-1})
//! ```
//!
//! `dz phi(z_{n,k+1})` is a lower bound for the Gaussian mass of the cell
//! `[z_{n,k}, z_{n,k+1}]` on the right (mirror on the left), so summing the
//! local bounds gives the global ones `F_bar_n <= C Phi_bar` on `x >= 0` and
//! `F_n <= C Phi` on `x <= 0`.
//!
//! The scans here report the sharpest such constants. [`BoundFunctions`]
//! holds the analytic certificate `g_n(w) = alpha(w) n + beta_n(w)` that
//! bounds `ln(sqrt(np(1-p)) f_{n,k} / phi(z_{n,k+1}))` at `w = k/n` on the
//! right side.
//!
//! The right side behaves as expected for every `p` in `[1/2, 1)`. On the
//! left side the law is only dominated when `p = 1/2`: for `p > 1/2` the
//! standardized binomial is negatively skewed, its left tail is heavier than
//! the Gaussian one, and `c_left` grows exponentially in `n`. That is why the
//! report carries the constants in log form next to the plain ones.

use rayon::prelude::*;
use serde::Serialize;

use crate::binomial::{build_grid, BinomialGrid};
use crate::error::{domain, Result};
use crate::gaussian::{ln_cdf, ln_pdf, ln_sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Sharpest local and global dominance constants for one `(n, p)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBoundReport {
    pub n: u64,
    pub p: f64,
    pub c_right: f64,
    pub c_left: f64,
    pub argmax_right: u64,
    pub argmax_left: u64,
    pub c_global_right: f64,
    pub c_global_left: f64,
    /// `ln c_right`; stays finite when `c_right` overflows.
    pub ln_c_right: f64,
    pub ln_c_left: f64,
    pub ln_c_global_right: f64,
    pub ln_c_global_left: f64,
}

impl TailBoundReport {
    /// Largest of the two local constants.
    pub fn c_max(&self) -> f64 {
        self.c_right.max(self.c_left)
    }

    /// Both global constants are dominated by their local counterparts.
    pub fn global_within_local(&self, slack: f64) -> bool {
        self.c_global_right <= self.c_right + slack && self.c_global_left <= self.c_left + slack
    }

    /// Checks `f_k <= c dz phi(z_{k+-1})` at every admissible `k` with both
    /// constants inflated by `rel_slack`.
    pub fn verify_local(&self, grid: &BinomialGrid, rel_slack: f64) -> bool {
        let ok_right = (grid.right_start()..grid.len())
            .all(|k| ln_local_ratio_unchecked(grid, k, Side::Right) <= self.ln_c_right + rel_slack);
        let ok_left =
            (0..=grid.left_end()).all(|k| ln_local_ratio_unchecked(grid, k, Side::Left) <= self.ln_c_left + rel_slack);
        ok_right && ok_left
    }
}

fn neighbour(k: usize, side: Side) -> i64 {
    match side {
        Side::Right => k as i64 + 1,
        Side::Left => k as i64 - 1,
    }
}

fn ln_local_ratio_unchecked(grid: &BinomialGrid, k: usize, side: Side) -> f64 {
    grid.logf()[k] - grid.dz().ln() - ln_pdf(grid.z_ext(neighbour(k, side)))
}

fn check_side_range(grid: &BinomialGrid, k: usize, side: Side) -> Result<()> {
    let ok = match side {
        Side::Right => k >= grid.right_start() && k <= grid.n() as usize,
        Side::Left => k <= grid.left_end(),
    };
    if ok {
        Ok(())
    } else {
        Err(domain(format!(
            "k = {k} is outside the {side:?} range for n = {}, p = {}",
            grid.n(),
            grid.p()
        )))
    }
}

/// `ln(f_{n,k} / (dz phi(z_{n,k+-1})))`.
pub fn ln_local_ratio(grid: &BinomialGrid, k: usize, side: Side) -> Result<f64> {
    check_side_range(grid, k, side)?;
    Ok(ln_local_ratio_unchecked(grid, k, side))
}

/// `f_{n,k} / (dz phi(z_{n,k+-1}))`, `+1` on the right side and `-1` on the left.
///
/// ```
/// use binutil::{build_grid, local_ratio, Side};
/// let g = build_grid(1, 0.5).unwrap();
/// // f = 1/2, dz = 2, and the virtual neighbour of k = 1 is z = 3.
/// let r = local_ratio(&g, 1, Side::Right).unwrap();
/// let phi3 = (-4.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
/// assert!((r - 0.5 / (2.0 * phi3)).abs() < 1e-12);
/// ```
pub fn local_ratio(grid: &BinomialGrid, k: usize, side: Side) -> Result<f64> {
    ln_local_ratio(grid, k, side).map(f64::exp)
}

/// Max of `values(k)` over `range`, ties resolved towards the smaller `k`.
fn argmax_over<F>(range: std::ops::Range<usize>, value: F) -> (f64, usize)
where
    F: Fn(usize) -> f64 + Sync,
{
    range.into_par_iter().map(|k| (value(k), k)).reduce(
        || (f64::NEG_INFINITY, usize::MAX),
        |a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        },
    )
}

/// Logarithms of the global constants `(left, right)`.
///
/// The left ratio `F_n/Phi` decreases between atoms, so its supremum over
/// `x <= 0` is attained at atoms. The right ratio `F_bar_n/Phi_bar` increases
/// between atoms; its supremum over `x >= 0` is the left limit
/// `F_bar_n(z_j)/Phi_bar(z_{j+1})` at the next atom.
pub fn ln_global_tail_dominance(grid: &BinomialGrid) -> (f64, f64) {
    let z = grid.z();
    let n = z.len() - 1;
    let ln_cdf_atoms = grid.ln_cdf_at_atoms();
    let ln_sf_atoms = grid.ln_survival_at_atoms();
    let left_end = z.partition_point(|&v| v <= 0.0);
    let (left, _) = argmax_over(0..left_end, |j| ln_cdf_atoms[j] - ln_cdf(z[j]));
    let first = z.partition_point(|&v| v <= 0.0).saturating_sub(1);
    let (right, _) = argmax_over(first..n, |j| {
        if z[j + 1] > 0.0 {
            ln_sf_atoms[j] - ln_sf(z[j + 1])
        } else {
            f64::NEG_INFINITY
        }
    });
    (left, right)
}

/// Global constants `(c_global_left, c_global_right)`: the suprema of
/// `F_n(x)/Phi(x)` over `x <= 0` and of `F_bar_n(x)/Phi_bar(x)` over `x >= 0`.
pub fn global_tail_dominance(grid: &BinomialGrid) -> (f64, f64) {
    let (l, r) = ln_global_tail_dominance(grid);
    (l.exp(), r.exp())
}

/// `F_bar_n(x) / Phi_bar(x)` at a single point.
pub fn global_ratio_right_at(grid: &BinomialGrid, x: f64) -> f64 {
    grid.survival(x) / crate::gaussian::sf(x)
}

/// `F_n(x) / Phi(x)` at a single point.
pub fn global_ratio_left_at(grid: &BinomialGrid, x: f64) -> f64 {
    grid.cdf(x) / crate::gaussian::cdf(x)
}

/// Scans every admissible `k` on both sides of an existing grid. Works for any `p`.
pub fn scan_grid(grid: &BinomialGrid) -> TailBoundReport {
    let (ln_r, kr) = argmax_over(grid.right_start()..grid.len(), |k| {
        ln_local_ratio_unchecked(grid, k, Side::Right)
    });
    let (ln_l, kl) = argmax_over(0..grid.left_end() + 1, |k| {
        ln_local_ratio_unchecked(grid, k, Side::Left)
    });
    let (ln_gl, ln_gr) = ln_global_tail_dominance(grid);
    TailBoundReport {
        n: grid.n(),
        p: grid.p(),
        c_right: ln_r.exp(),
        c_left: ln_l.exp(),
        argmax_right: kr as u64,
        argmax_left: kl as u64,
        c_global_right: ln_gr.exp(),
        c_global_left: ln_gl.exp(),
        ln_c_right: ln_r,
        ln_c_left: ln_l,
        ln_c_global_right: ln_gr,
        ln_c_global_left: ln_gl,
    }
}

/// Sharpest dominance constants for `p` in `[1/2, 1)`.
pub fn minimal_constant(n: u64, p: f64) -> Result<TailBoundReport> {
    if !(0.5..1.0).contains(&p) {
        return Err(domain(format!("minimal_constant requires p in [1/2, 1), got {p}")));
    }
    Ok(scan_grid(&build_grid(n, p)?))
}

/// Smallest entry of `ns` (ascending) from which on every value of
/// `constant(n)` stays at or below `target`.
pub fn observed_threshold(ns: &[u64], constants: &[f64], target: f64) -> Option<u64> {
    let mut threshold = None;
    for (&n, &c) in ns.iter().zip(constants).rev() {
        if c > target {
            break;
        }
        threshold = Some(n);
    }
    threshold
}

/// Closed forms of the bound family `g_n(w) = alpha(w) n + beta_n(w)` on `(p, 1)`.
///
/// With `s = p(1-p)`:
///
/// ```text
/// alpha(w)  = -w ln w - (1-w) ln(1-w) + w^2/(2s) + (ln(p/(1-p)) - 1/(1-p)) w + p/(2(1-p)) + ln(1-p)
/// beta_n(w) = -ln(w(1-w))/2 + w/s - ln 2 - 1/(1-p) + (1/12 + 1/(2s))/n
/// ```
///
/// At `p = 1/2` these are `alpha(w) = -w ln w - (1-w) ln(1-w) - 2w(1-w) + 1/2 - ln 2`
/// and `beta_n(w) = -ln(w(1-w))/2 + 4w - 2 - ln 2 + 25/(12n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundFunctions {
    p: f64,
    q: f64,
    s: f64,
}

/// Below this `|w - p| / min(p, 1-p)` the alpha family is evaluated by its Taylor series at `p`.
const SERIES_RADIUS: f64 = 0.25;

impl BoundFunctions {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.5..1.0).contains(&p) {
            return Err(domain(format!("bound functions require p in [1/2, 1), got {p}")));
        }
        let q = 1.0 - p;
        Ok(Self { p, q, s: p * q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Taylor coefficient of `(w-p)^k` in alpha, `k >= 3`.
    fn taylor_coefficient(&self, k: i32) -> f64 {
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        (sign * self.p.powi(1 - k) - self.q.powi(1 - k)) / (k * (k - 1)) as f64
    }

    /// `alpha^(j)(p + h)` from the Taylor series at `p` (alpha, alpha', alpha'' all vanish at `p`).
    ///
    /// Inside the series radius the terms shrink at least like `4^-k`; odd
    /// terms vanish at `p = 1/2`, so there is no early exit on a zero term.
    fn series_derivative(&self, j: i32, h: f64) -> f64 {
        let mut sum = 0.0;
        for k in 3.max(j)..80 {
            let mut falling = 1.0;
            for i in 0..j {
                falling *= (k - i) as f64;
            }
            sum += self.taylor_coefficient(k) * falling * h.powi(k - j);
        }
        sum
    }

    fn near_p(&self, w: f64) -> bool {
        (w - self.p).abs() < SERIES_RADIUS * self.q.min(self.p)
    }

    pub fn alpha(&self, w: f64) -> f64 {
        if self.near_p(w) {
            return self.series_derivative(0, w - self.p);
        }
        let (p, q, s) = (self.p, self.q, self.s);
        -w * w.ln() - (1.0 - w) * (1.0 - w).ln()
            + w * w / (2.0 * s)
            + ((p / q).ln() - 1.0 / q) * w
            + p / (2.0 * q)
            + q.ln()
    }

    pub fn alpha_d1(&self, w: f64) -> f64 {
        if self.near_p(w) {
            return self.series_derivative(1, w - self.p);
        }
        let (p, q, s) = (self.p, self.q, self.s);
        -w.ln() + (1.0 - w).ln() + w / s + (p / q).ln() - 1.0 / q
    }

    pub fn alpha_d2(&self, w: f64) -> f64 {
        if self.near_p(w) {
            return self.series_derivative(2, w - self.p);
        }
        -1.0 / w - 1.0 / (1.0 - w) + 1.0 / self.s
    }

    pub fn alpha_d3(&self, w: f64) -> f64 {
        1.0 / (w * w) - 1.0 / ((1.0 - w) * (1.0 - w))
    }

    pub fn alpha_d4(&self, w: f64) -> f64 {
        -2.0 / (w * w * w) - 2.0 / ((1.0 - w) * (1.0 - w) * (1.0 - w))
    }

    /// `beta_n(w)` without the `1/n` term, i.e. `lim_{n -> inf} beta_n(w)`.
    pub fn beta_limit(&self, w: f64) -> f64 {
        -0.5 * (w * (1.0 - w)).ln() + w / self.s - std::f64::consts::LN_2 - 1.0 / self.q
    }

    pub fn beta(&self, n: u64, w: f64) -> f64 {
        self.beta_limit(w) + (1.0 / 12.0 + 1.0 / (2.0 * self.s)) / n as f64
    }

    pub fn beta_d1(&self, w: f64) -> f64 {
        1.0 / self.s + 1.0 / (2.0 * (1.0 - w)) - 1.0 / (2.0 * w)
    }

    pub fn g(&self, n: u64, w: f64) -> f64 {
        self.alpha(w) * n as f64 + self.beta(n, w)
    }
}

/// Chebyshev-spaced sample points in `(lo, hi)`, ascending.
pub fn chebyshev_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut pts: Vec<f64> = (0..count)
        .map(|i| {
            let t = (2 * i + 1) as f64 * std::f64::consts::PI / (2 * count) as f64;
            mid - half * t.cos()
        })
        .collect();
    pts.sort_by(f64::total_cmp);
    pts
}

/// Outcome of comparing the exact log-ratio with the `g_n` certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GBoundReport {
    pub n: u64,
    pub p: f64,
    /// `max_k [ln(sqrt(np(1-p)) f_{n,k} / phi(z_{n,k+1})) - g_n(k/n)]` over `floor(np) < k <= n-1`.
    pub max_margin: f64,
    pub argmax_k: Option<u64>,
    /// `ln(f_{n,n} / (dz phi(z_{n,n+1})))`, the extreme cell handled outside `g_n`.
    pub extreme_log_ratio: f64,
}

/// Scans `floor(np) < k <= n-1` and reports how far the exact log-ratio
/// stays below `g_n(k/n)`. A non-positive margin certifies the key inequality.
pub fn g_bound_check(n: u64, p: f64) -> Result<GBoundReport> {
    let bounds = BoundFunctions::new(p)?;
    let grid = build_grid(n, p)?;
    let lo = grid.right_start() + 1;
    let hi = n as usize;
    let ln_dz = grid.dz().ln();
    let (margin, k) = argmax_over(lo..hi, |k| {
        let lhs = grid.logf()[k] - ln_dz - ln_pdf(grid.z_ext(k as i64 + 1));
        lhs - bounds.g(n, k as f64 / n as f64)
    });
    let extreme_log_ratio = ln_local_ratio_unchecked(&grid, n as usize, Side::Right);
    Ok(GBoundReport {
        n,
        p,
        max_margin: margin,
        argmax_k: (lo < hi).then_some(k as u64),
        extreme_log_ratio,
    })
}

/// Finite-difference verification of the closed-form derivatives of alpha.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaDerivativeRecord {
    pub p: f64,
    pub samples: usize,
    /// Worst `|fd - closed| / max(|closed|, 1)` for derivative orders 1..=4.
    pub max_rel_error: [f64; 4],
    /// `alpha, alpha', alpha''` at `w = p` (and `alpha'''` as fourth entry).
    pub values_at_p: [f64; 4],
    /// `(1-2p)/((p-1)^2 p^2)`, the value of alpha''' at `w = p`.
    pub third_derivative_at_p: f64,
    /// alpha, alpha', alpha'', alpha''' negative and decreasing on the samples.
    pub signs_ok: bool,
}

/// Five-point central difference.
fn five_point<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Checks alpha', alpha'', alpha''', alpha'''' against five-point differences
/// of the next-lower closed form, plus the sign and monotonicity conditions,
/// on 64 Chebyshev points inside `(p, 1)`.
pub fn alpha_derivative_check(p: f64) -> Result<AlphaDerivativeRecord> {
    let b = BoundFunctions::new(p)?;
    let lo = p + 0.02 * (1.0 - p);
    let hi = 1.0 - 0.02 * (1.0 - p);
    let pts = chebyshev_points(lo, hi, 64);
    let mut max_rel = [0.0f64; 4];
    for &w in &pts {
        let h = 1e-3 * (w - p).min(1.0 - w);
        let fd = [
            five_point(|x| b.alpha(x), w, h),
            five_point(|x| b.alpha_d1(x), w, h),
            five_point(|x| b.alpha_d2(x), w, h),
            five_point(|x| b.alpha_d3(x), w, h),
        ];
        let exact = [b.alpha_d1(w), b.alpha_d2(w), b.alpha_d3(w), b.alpha_d4(w)];
        for i in 0..4 {
            let err = (fd[i] - exact[i]).abs() / exact[i].abs().max(1.0);
            max_rel[i] = max_rel[i].max(err);
        }
    }
    let sign_pts = chebyshev_points(p + 1e-6, 1.0 - 1e-6, 512);
    let mut signs_ok = true;
    let fns: [&dyn Fn(f64) -> f64; 4] = [&|w| b.alpha(w), &|w| b.alpha_d1(w), &|w| b.alpha_d2(w), &|w| {
        b.alpha_d3(w)
    }];
    for f in fns {
        let vals: Vec<f64> = sign_pts.iter().map(|&w| f(w)).collect();
        let negative = vals.iter().all(|&v| v < 0.0);
        let decreasing = vals.windows(2).all(|v| v[1] < v[0]);
        signs_ok &= negative && decreasing;
    }
    Ok(AlphaDerivativeRecord {
        p,
        samples: pts.len(),
        max_rel_error: max_rel,
        values_at_p: [b.alpha(p), b.alpha_d1(p), b.alpha_d2(p), b.alpha_d3(p)],
        third_derivative_at_p: (1.0 - 2.0 * p) / ((p - 1.0) * (p - 1.0) * p * p),
        signs_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_right_ratio() {
        let g = build_grid(1, 0.5).unwrap();
        let r = local_ratio(&g, 1, Side::Right).unwrap();
        let want = 0.5 / (2.0 * crate::gaussian::pdf(3.0));
        assert!((r - want).abs() < 1e-12 * want);
    }

    #[test]
    fn side_ranges_are_enforced() {
        let g = build_grid(10, 0.5).unwrap();
        assert!(local_ratio(&g, 4, Side::Right).is_err());
        assert!(local_ratio(&g, 5, Side::Right).is_ok());
        assert!(local_ratio(&g, 10, Side::Right).is_ok());
        assert!(local_ratio(&g, 11, Side::Right).is_err());
        assert!(local_ratio(&g, 5, Side::Left).is_ok());
        assert!(local_ratio(&g, 6, Side::Left).is_err());
        let g = build_grid(10, 0.63).unwrap();
        assert!(local_ratio(&g, 6, Side::Right).is_ok());
        assert!(local_ratio(&g, 7, Side::Left).is_ok());
        assert!(local_ratio(&g, 8, Side::Left).is_err());
    }

    #[test]
    fn midpoint_ratio_tends_to_one() {
        let g = build_grid(100, 0.5).unwrap();
        let r = local_ratio(&g, 50, Side::Right).unwrap();
        assert!((r - 1.0).abs() < 0.03, "{r}");
        let g = build_grid(1 << 16, 0.5).unwrap();
        let r = local_ratio(&g, 1 << 15, Side::Right).unwrap();
        assert!((r - 1.0).abs() < 1e-4, "{r}");
    }

    #[test]
    fn extreme_cell_decays() {
        let g = build_grid(10_000, 0.5).unwrap();
        let r = local_ratio(&g, 10_000, Side::Right).unwrap();
        assert!(r < 1.0);
        let mut prev = f64::INFINITY;
        for j in 4..16 {
            let rep = g_bound_check(1 << j, 0.5).unwrap();
            assert!(rep.extreme_log_ratio < prev);
            prev = rep.extreme_log_ratio;
        }
        assert!(prev < -1000.0);
    }

    #[test]
    fn symmetric_law_has_equal_sides() {
        for n in [1u64, 2, 7, 64, 1000, 4097] {
            let r = minimal_constant(n, 0.5).unwrap();
            assert!((r.c_left - r.c_right).abs() <= 1e-12 * r.c_right, "n={n}");
            assert_eq!(r.argmax_left + r.argmax_right, n);
            assert!((r.c_global_left - r.c_global_right).abs() <= 1e-9 * r.c_global_right);
        }
    }

    #[test]
    fn reported_constants_are_tight() {
        for &(n, p) in &[(64u64, 0.5), (300, 0.6), (1000, 0.75), (513, 0.9)] {
            let g = build_grid(n, p).unwrap();
            let r = scan_grid(&g);
            assert!(r.verify_local(&g, 1e-12));
            assert!(!r.verify_local(&g, -1e-9));
            assert!(r.global_within_local(1e-9));
        }
    }

    #[test]
    fn global_pointwise_at_zero() {
        let g = build_grid(1, 0.5).unwrap();
        assert_eq!(global_ratio_right_at(&g, 0.0), 1.0);
        assert_eq!(global_ratio_left_at(&g, 0.0), 1.0);
        // The supremum is the left limit at z = 1: (1/2) / Phi_bar(1).
        let (_, right) = global_tail_dominance(&g);
        assert!((right - 0.5 / crate::gaussian::sf(1.0)).abs() < 1e-12);
    }

    #[test]
    fn global_sup_matches_dense_brute_force() {
        let g = build_grid(40, 0.7).unwrap();
        let (gl, gr) = global_tail_dominance(&g);
        let mut bl: f64 = 0.0;
        let mut br: f64 = 0.0;
        for i in 0..=200_000 {
            let x = i as f64 * 1e-4;
            br = br.max(global_ratio_right_at(&g, x));
            bl = bl.max(global_ratio_left_at(&g, -x));
        }
        // The left supremum sits exactly on an atom, which the dense grid misses.
        for &z in g.z().iter().filter(|&&z| z <= 0.0) {
            bl = bl.max(global_ratio_left_at(&g, z));
        }
        assert!(br <= gr * (1.0 + 1e-12));
        assert!((br - gr).abs() < 1e-2 * gr);
        assert!((bl - gl).abs() < 1e-9 * gl);
    }

    #[test]
    fn beta_spot_values() {
        let b = BoundFunctions::new(0.5).unwrap();
        for n in [1u64, 10, 64, 1000] {
            assert!((b.beta(n, 0.5) - 25.0 / (12.0 * n as f64)).abs() < 1e-14);
        }
        let lim = 1.0 + (2.0 / 3f64.sqrt()).ln();
        assert!((b.beta_limit(0.75) - lim).abs() < 1e-14);
        assert!((b.beta(1 << 30, 0.75) - lim).abs() < 1e-8);
        assert!(b.beta_limit(0.5).abs() < 1e-15);
    }

    #[test]
    fn symmetric_forms_agree() {
        let b = BoundFunctions::new(0.5).unwrap();
        for &w in &[0.55f64, 0.6, 0.75, 0.9, 0.99] {
            let ln2 = std::f64::consts::LN_2;
            let a = -w * w.ln() - (1.0 - w) * (1.0 - w).ln() - 2.0 * w * (1.0 - w) + 0.5 - ln2;
            let be = -0.5 * w.ln() - 0.5 * (1.0 - w).ln() + 4.0 * w - 2.0 - ln2 + 25.0 / 1200.0;
            assert!((b.alpha(w) - a).abs() < 1e-14);
            assert!((b.beta(100, w) - be).abs() < 1e-14);
        }
    }

    #[test]
    fn alpha_vanishes_at_p() {
        for &p in &[0.5, 0.6, 0.75, 0.9] {
            let b = BoundFunctions::new(p).unwrap();
            assert!(b.alpha(p).abs() < 1e-10);
            assert!(b.alpha_d1(p).abs() < 1e-10);
            assert!(b.alpha_d2(p).abs() < 1e-10);
        }
        let b = BoundFunctions::new(0.5).unwrap();
        assert!(b.alpha_d3(0.5).abs() < 1e-10);
    }

    #[test]
    fn series_and_closed_forms_agree_at_the_seam() {
        for &p in &[0.5, 0.6, 0.75, 0.9] {
            let b = BoundFunctions::new(p).unwrap();
            let w = p + SERIES_RADIUS * (1.0 - p).min(p) * 0.999;
            let h = w - p;
            let closed = -w * w.ln() - (1.0 - w) * (1.0 - w).ln()
                + w * w / (2.0 * b.s)
                + ((p / b.q).ln() - 1.0 / b.q) * w
                + p / (2.0 * b.q)
                + b.q.ln();
            let series = b.series_derivative(0, h);
            assert!((closed - series).abs() < 1e-13, "p={p}: {closed} vs {series}");
            let closed2 = -1.0 / w - 1.0 / (1.0 - w) + 1.0 / b.s;
            assert!((closed2 - b.series_derivative(2, h)).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_fourth_derivative_spot_value() {
        let b = BoundFunctions::new(0.5).unwrap();
        let want = -128.0 - 128.0 / 27.0;
        assert!((b.alpha_d4(0.75) - want).abs() < 1e-12);
        // Central differences of alpha'' at step 1e-3.
        let h = 1e-3;
        let fd = (b.alpha_d2(0.75 + h) - 2.0 * b.alpha_d2(0.75) + b.alpha_d2(0.75 - h)) / (h * h);
        assert!((fd - want).abs() < 1e-3 * want.abs());
    }

    #[test]
    fn third_derivative_at_p_matches_constant() {
        let b = BoundFunctions::new(0.6).unwrap();
        let want = (1.0 - 1.2) / (0.4f64.powi(2) * 0.36);
        assert!((b.alpha_d3(0.6) - want).abs() < 1e-12);
        // Away from p the third derivative keeps moving.
        assert!(b.alpha_d3(0.8) < b.alpha_d3(0.6));
    }

    #[test]
    fn derivative_check_passes() {
        for &p in &[0.5, 0.6, 0.75, 0.9] {
            let rec = alpha_derivative_check(p).unwrap();
            for e in rec.max_rel_error {
                assert!(e < 1e-6, "p={p}: {:?}", rec.max_rel_error);
            }
            assert!(rec.signs_ok, "p={p}");
        }
    }

    #[test]
    fn beta_positive_increasing() {
        for &p in &[0.5, 0.6, 0.75, 0.9] {
            let b = BoundFunctions::new(p).unwrap();
            let pts = chebyshev_points(p + 1e-6, 1.0 - 1e-6, 512);
            for n in [1u64, 64, 1 << 20] {
                let vals: Vec<f64> = pts.iter().map(|&w| b.beta(n, w)).collect();
                assert!(vals.iter().all(|&v| v > 0.0));
                assert!(vals.windows(2).all(|v| v[1] > v[0]));
            }
            assert!(pts.iter().all(|&w| b.beta_d1(w) > 0.0));
        }
    }

    #[test]
    fn beta_near_one_grows_like_half_log_n() {
        let b = BoundFunctions::new(0.5).unwrap();
        let mut vals = Vec::new();
        for j in 4..=30 {
            let n = 1u64 << j;
            let w = 1.0 - 1.0 / n as f64;
            vals.push(b.beta(n, w) - 0.5 * (n as f64).ln());
        }
        let spread =
            vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 0.1, "{vals:?}");
    }

    #[test]
    fn g_certificate_holds_for_n_64() {
        let r = g_bound_check(64, 0.5).unwrap();
        assert!(r.max_margin <= 1e-9, "{r:?}");
        assert!(r.argmax_k.is_some());
    }

    #[test]
    fn chebyshev_points_are_inside() {
        let pts = chebyshev_points(0.5, 1.0, 512);
        assert_eq!(pts.len(), 512);
        assert!(pts[0] > 0.5 && pts[511] < 1.0);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn threshold_helper() {
        let ns = [1u64, 2, 4, 8];
        assert_eq!(observed_threshold(&ns, &[3.0, 2.0, 1.05, 1.01], 1.1), Some(4));
        assert_eq!(observed_threshold(&ns, &[3.0, 2.0, 1.05, 1.2], 1.1), None);
        assert_eq!(observed_threshold(&ns, &[1.0, 1.0, 1.0, 1.0], 1.1), Some(1));
    }
}
