//! The standardized binomial law.
//!
//! For `n` Bernoulli(`p`) trials the number of successes `k` is mapped to the
//! standardized point `z_k = (k - np) / sqrt(np(1-p))`, so the law of the
//! scaled partial sum has mean zero and unit variance. Probabilities are
//! stored as logarithms; `f_{n,k}` underflows for `n` in the low thousands
//! long before the interesting tail ratios stop being meaningful.
//!
//! `log_pmf` follows Loader's saddle-point formulation: Stirling remainders
//! plus the deviance term `bd0`, which keeps the relative error near machine
//! precision even where `ln C(n, k)` is of order `n`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::stirling::stirlerr;
use crate::summation::{NeumaierSum, ScaledLogSum};

/// Largest `n` for which [`build_grid`] materializes the arrays.
pub const MAX_GRID_N: u64 = 10_000_000;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Deviance term `x ln(x/np) + np - x`, accurate when `x` is close to `np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        if s.abs() < f64::MIN_POSITIVE {
            return s;
        }
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("probability must lie in (0,1), got {p}")))
    }
}

/// `ln f_{n,k} = ln [C(n,k) p^k (1-p)^(n-k)]`.
pub fn log_pmf(n: u64, p: f64, k: u64) -> Result<f64> {
    check_p(p)?;
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    if k > n {
        return Err(domain(format!("k = {k} outside 0..={n}")));
    }
    Ok(log_pmf_unchecked(n, p, k))
}

pub(crate) fn log_pmf_unchecked(n: u64, p: f64, k: u64) -> f64 {
    let nf = n as f64;
    let ln_q = (-p).ln_1p();
    if k == 0 {
        return nf * ln_q;
    }
    if k == n {
        return nf * p.ln();
    }
    let q = 1.0 - p;
    let kf = k as f64;
    let rest = (n - k) as f64;
    let lc = stirlerr(nf) - stirlerr(kf) - stirlerr(rest) - bd0(kf, nf * p) - bd0(rest, nf * q);
    let lf = LN_2PI + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

/// Materialized standardized binomial law for fixed `(n, p)`.
#[derive(Debug, Clone, Serialize)]
pub struct BinomialGrid {
    n: u64,
    p: f64,
    dz: f64,
    mean: f64,
    z: Vec<f64>,
    logf: Vec<f64>,
}

/// Builds the grid of standardized points and log-probabilities.
///
/// ```
/// let g = binutil::build_grid(2, 0.5).unwrap();
/// let want = [-2f64.sqrt(), 0.0, 2f64.sqrt()];
/// assert!(g.z().iter().zip(want).all(|(z, w)| (z - w).abs() < 1e-15));
/// assert!((g.pmf(1) - 0.5).abs() < 1e-15);
/// ```
pub fn build_grid(n: u64, p: f64) -> Result<BinomialGrid> {
    check_p(p)?;
    if n == 0 || n > MAX_GRID_N {
        return Err(domain(format!("n must lie in 1..={MAX_GRID_N}, got {n}")));
    }
    let nf = n as f64;
    let dz = 1.0 / (nf * p * (1.0 - p)).sqrt();
    let mean = nf * p;
    let (z, logf): (Vec<f64>, Vec<f64>) = (0..=n)
        .into_par_iter()
        .map(|k| ((k as f64 - mean) * dz, log_pmf_unchecked(n, p, k)))
        .unzip();
    Ok(BinomialGrid {
        n,
        p,
        dz,
        mean,
        z,
        logf,
    })
}

impl BinomialGrid {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Grid spacing `1/sqrt(np(1-p))`; equals `2/sqrt(n)` at `p = 1/2`.
    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn logf(&self) -> &[f64] {
        &self.logf
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pmf(&self, k: usize) -> f64 {
        self.logf[k].exp()
    }

    /// Standardized point for any integer index, including the virtual
    /// neighbours `k = -1` and `k = n + 1` that sit one spacing outside the
    /// support (at `p = 1/2`, `z_{n,n+1} = sqrt(n) + 2/sqrt(n)`).
    pub fn z_ext(&self, k: i64) -> f64 {
        (k as f64 - self.mean) * self.dz
    }

    /// `floor(np)`, the first index of the right-side scan.
    pub fn right_start(&self) -> usize {
        self.mean.floor() as usize
    }

    /// `ceil(np)`, the last index of the left-side scan.
    pub fn left_end(&self) -> usize {
        (self.mean.ceil() as usize).min(self.n as usize)
    }

    /// Number of atoms with `z_k <= x`.
    fn count_at_or_below(&self, x: f64) -> usize {
        self.z.partition_point(|&v| v <= x)
    }

    /// `F_n(x) = P[xi_{n,n} <= x]`, summed upward from `k = 0`.
    pub fn cdf(&self, x: f64) -> f64 {
        let m = self.count_at_or_below(x);
        self.logf[..m].iter().map(|l| l.exp()).collect::<NeumaierSum>().value()
    }

    /// `F_bar_n(x) = P[xi_{n,n} > x]`, summed downward from `k = n`.
    pub fn survival(&self, x: f64) -> f64 {
        let m = self.count_at_or_below(x);
        self.logf[m..]
            .iter()
            .rev()
            .map(|l| l.exp())
            .collect::<NeumaierSum>()
            .value()
    }

    /// `ln F_n(z_j)` for every `j`, accumulated from the left end in scaled form.
    pub fn ln_cdf_at_atoms(&self) -> Vec<f64> {
        let mut acc = ScaledLogSum::new();
        self.logf
            .iter()
            .map(|&l| {
                acc.add_ln(l);
                acc.ln_value()
            })
            .collect()
    }

    /// `ln F_bar_n(z_j) = ln P[xi > z_j]` for every `j` (the last entry is `-inf`).
    pub fn ln_survival_at_atoms(&self) -> Vec<f64> {
        let len = self.len();
        let mut out = vec![f64::NEG_INFINITY; len];
        let mut acc = ScaledLogSum::new();
        for j in (0..len - 1).rev() {
            acc.add_ln(self.logf[j + 1]);
            out[j] = acc.ln_value();
        }
        out
    }

    /// Compensated `sum_k g(z_k, ln f_k)`, reduced in a fixed order.
    pub fn expect_with<F>(&self, term: F) -> f64
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        crate::summation::par_map_sum(self.len(), |k| term(self.z[k], self.logf[k]))
    }

    /// `sup_x |F_n(x) - Phi(x)|`, attained at an atom or just left of one.
    pub fn kolmogorov_distance(&self) -> f64 {
        let mut below = NeumaierSum::new();
        let mut worst = 0.0f64;
        for (&z, &l) in self.z.iter().zip(&self.logf) {
            let phi = crate::gaussian::cdf(z);
            worst = worst.max((below.value() - phi).abs());
            below.add(l.exp());
            worst = worst.max((below.value() - phi).abs());
        }
        worst
    }

    /// Total mass, mean and second moment of the standardized law.
    pub fn moments(&self) -> (f64, f64, f64) {
        let m0 = self.expect_with(|_, l| l.exp());
        let m1 = self.expect_with(|z, l| z * l.exp());
        let m2 = self.expect_with(|z, l| z * z * l.exp());
        (m0, m1, m2)
    }
}
