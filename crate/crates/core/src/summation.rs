//! Compensated summation with a reproducible parallel reduction.
//!
//! Sums over binomial atoms mix terms spanning hundreds of orders of
//! magnitude, so every reduction in the crate goes through [`NeumaierSum`].
//! [`par_sum`] splits the input into fixed-size chunks, sums each chunk with
//! compensation and then combines the chunk results in index order, so the
//! result does not depend on the number of worker threads.

use rayon::prelude::*;

/// Chunk length of the fixed reduction tree used by [`par_sum`].
pub const CHUNK: usize = 4096;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    /// Merges another partial sum, keeping both compensation terms.
    #[inline]
    pub fn merge(&mut self, other: NeumaierSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Sequential compensated sum.
pub fn sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<NeumaierSum>().value()
}

/// Compensated sum evaluated over fixed chunks in parallel.
///
/// The chunk boundaries and the order in which chunk results are merged are
/// independent of the thread count, so the output is bit-for-bit reproducible.
pub fn par_sum(values: &[f64]) -> f64 {
    par_map_sum(values.len(), |i| values[i])
}

/// Compensated sum of `term(i)` for `i in 0..len`, with the same fixed
/// reduction tree as [`par_sum`].
pub fn par_map_sum<F>(len: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if len <= CHUNK {
        return (0..len).map(&term).collect::<NeumaierSum>().value();
    }
    let chunks = len.div_ceil(CHUNK);
    let partials: Vec<NeumaierSum> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            (lo..hi).map(&term).collect::<NeumaierSum>()
        })
        .collect();
    let mut total = NeumaierSum::new();
    for partial in partials {
        total.merge(partial);
    }
    total.value()
}

/// Running sum of `exp(ln_v)` terms kept as `exp(scale) * sum`.
///
/// The scale only moves when a term exceeds it by `RESCALE_HEADROOM`, so a
/// long monotone run of terms is rescaled a handful of times instead of once
/// per term.
#[derive(Debug, Clone, Copy)]
pub struct ScaledLogSum {
    scale: f64,
    sum: NeumaierSum,
}

const RESCALE_HEADROOM: f64 = 300.0;

impl Default for ScaledLogSum {
    fn default() -> Self {
        Self::new()
    }
}

impl ScaledLogSum {
    pub fn new() -> Self {
        Self {
            scale: f64::NEG_INFINITY,
            sum: NeumaierSum::new(),
        }
    }

    pub fn add_ln(&mut self, ln_v: f64) {
        if ln_v == f64::NEG_INFINITY {
            return;
        }
        if self.scale == f64::NEG_INFINITY {
            self.scale = ln_v;
        } else if ln_v > self.scale + RESCALE_HEADROOM {
            let factor = (self.scale - ln_v).exp();
            self.sum = NeumaierSum {
                sum: self.sum.sum * factor,
                compensation: self.sum.compensation * factor,
            };
            self.scale = ln_v;
        }
        self.sum.add((ln_v - self.scale).exp());
    }

    pub fn ln_value(&self) -> f64 {
        if self.scale == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        self.scale + self.sum.value().ln()
    }
}

/// `ln(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum(exp(v)))` over a slice, scaled by the maximum and summed with compensation.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: NeumaierSum = values.iter().map(|v| (v - max).exp()).collect();
    max + s.value().ln()
}
