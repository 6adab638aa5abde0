//! Primal and dual value functions of the utility maximization problem.
//!
//! In the continuous model the dual value is `v(y) = E[V(y Z)]` with
//! `Z = exp(-x/2 - 1/8)` and `x` standard normal; in the `n`-step binomial
//! model it is `v_n(y) = sum_k V(y exp(-a_n z_k - b_n)) f_{n,k}`. Primal values
//! follow by conjugation, `u(x) = inf_y [v(y) + x y]`.

use std::cell::Cell;

use rayon::prelude::*;
use serde::Serialize;

use crate::binomial::{build_grid, BinomialGrid};
use crate::error::{domain, Error, Result};
use crate::gaussian::{ln_pdf, LN_SQRT_2PI};
use crate::martingale::{coefficients, MartingaleCoefficients};
use crate::quadrature::integrate;
use crate::roots::brent;
use crate::summation::{par_sum, ScaledLogSum};
use crate::tail_bounds::scan_grid;
use crate::utility::Utility;

/// Smallest and largest truncation half-width tried for Gaussian integrals.
const L_MIN: f64 = 8.0;
const L_MAX: f64 = 200.0;
/// Integrand size at `±L` below which the tails are dropped.
const POINT_TOL: f64 = 1e-16;
/// Search interval for the dual minimizer.
const Y_MIN: f64 = 1e-12;
const Y_MAX: f64 = 1e12;

/// A value of `u`, `u_n`, `v` or `v_n` at one argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValuePoint {
    pub argument: f64,
    /// `+inf` when `finite` is false.
    pub value: f64,
    pub error_estimate: f64,
    /// Number of steps; `None` for the continuous model.
    pub n: Option<u64>,
    pub finite: bool,
    pub reason: Option<String>,
    /// Minimizing `y` for primal values obtained by conjugation.
    pub dual_argument: Option<f64>,
}

impl ValuePoint {
    fn finite(argument: f64, value: f64, error_estimate: f64, n: Option<u64>) -> Self {
        Self {
            argument,
            value,
            error_estimate,
            n,
            finite: true,
            reason: None,
            dual_argument: None,
        }
    }

    fn infinite(argument: f64, n: Option<u64>, reason: String) -> Self {
        Self {
            argument,
            value: f64::INFINITY,
            error_estimate: 0.0,
            n,
            finite: false,
            reason: Some(reason),
            dual_argument: None,
        }
    }
}

/// `H(x) = V(y exp(-x/2 - 1/8))`.
pub fn h_continuous(spec: &Utility, y: f64, x: f64) -> Result<f64> {
    spec.conj_weighted(y.ln() - 0.5 * x - 0.125, 0.0)
}

/// `H_n(z) = V(y exp(-a_n z - b_n))`.
pub fn h_discrete(spec: &Utility, coeffs: &MartingaleCoefficients, y: f64, z: f64) -> Result<f64> {
    spec.conj_weighted(y.ln() - coeffs.a * z - coeffs.b, 0.0)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Outcome of a truncated Gaussian integral.
struct GaussIntegral {
    value: f64,
    error: f64,
}

/// Smallest integer `L >= L_MIN` at which `|g(±L)|` is below `POINT_TOL` and
/// still falling. `None` if the integrand has not decayed by `L_MAX`.
fn truncation_half_width<G: Fn(f64) -> Result<f64>>(g: &G) -> Result<Option<f64>> {
    let mut l = L_MIN;
    while l <= L_MAX {
        let (r, r1) = (g(l)?.abs(), g(l + 1.0)?.abs());
        let (s, s1) = (g(-l)?.abs(), g(-l - 1.0)?.abs());
        if r < POINT_TOL && s < POINT_TOL && r1 <= r && s1 <= s {
            return Ok(Some(l));
        }
        l += 1.0;
    }
    Ok(None)
}

/// Adaptive integral of `g` over `[-l, l]`. The error combines the rule's
/// certificate, the size of the dropped tails and a rounding allowance.
fn integrate_truncated<G: Fn(f64) -> Result<f64>>(g: &G, l: f64) -> Result<GaussIntegral> {
    let failure: Cell<Option<Error>> = Cell::new(None);
    let eval = |x: f64| match g(x) {
        Ok(v) => v,
        Err(e) => {
            failure.set(Some(e));
            f64::NAN
        }
    };
    let pieces = (2.0 * l).ceil() as usize;
    let q = integrate(eval, -l, l, 1e-15, 1e-14, pieces, 20_000);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    if !q.value.is_finite() {
        return Err(Error::Numerical("Gaussian integral is not finite".into()));
    }
    let abs = integrate(|x| eval(x).abs(), -l, l, 1e-15, 1e-12, pieces, 20_000);
    let tails = 2.0 * (g(l)?.abs() + g(-l)?.abs());
    let rounding = 64.0 * f64::EPSILON * abs.value;
    Ok(GaussIntegral {
        value: q.value,
        error: q.error + tails + rounding,
    })
}

fn gauss_expectation<G: Fn(f64) -> Result<f64>>(g: &G) -> Result<Option<GaussIntegral>> {
    match truncation_half_width(g)? {
        Some(l) => integrate_truncated(g, l).map(Some),
        None => Ok(None),
    }
}

/// `v(y) = int H(x) phi(x) dx`.
///
/// A divergent integral is reported as an infinite value with a reason.
pub fn v_continuous(spec: &Utility, y: f64) -> Result<ValuePoint> {
    check_positive("y", y)?;
    let ln_y = y.ln();
    let g = |x: f64| spec.conj_weighted(ln_y - 0.5 * x - 0.125, ln_pdf(x));
    match gauss_expectation(&g) {
        Ok(Some(r)) => Ok(ValuePoint::finite(y, r.value, r.error, None)),
        Ok(None) => Ok(ValuePoint::infinite(
            y,
            None,
            format!("H(x) phi(x) does not decay within |x| <= {L_MAX}"),
        )),
        Err(Error::Numerical(msg)) => Ok(ValuePoint::infinite(y, None, msg)),
        Err(e) => Err(e),
    }
}

/// [`v_continuous`] with a fixed truncation half-width.
pub fn v_continuous_truncated(spec: &Utility, y: f64, half_width: f64) -> Result<ValuePoint> {
    check_positive("y", y)?;
    check_positive("half_width", half_width)?;
    let ln_y = y.ln();
    let g = |x: f64| spec.conj_weighted(ln_y - 0.5 * x - 0.125, ln_pdf(x));
    let r = integrate_truncated(&g, half_width)?;
    Ok(ValuePoint::finite(y, r.value, r.error, None))
}

fn check_pair(grid: &BinomialGrid, coeffs: &MartingaleCoefficients) -> Result<()> {
    if grid.n() != coeffs.n || grid.p() != coeffs.p {
        return Err(Error::Usage(format!(
            "grid (n={}, p={}) does not match coefficients (n={}, p={})",
            grid.n(),
            grid.p(),
            coeffs.n,
            coeffs.p
        )));
    }
    Ok(())
}

/// Evaluates `term(k)` for every atom in parallel and returns the terms in grid order.
fn grid_terms<F>(grid: &BinomialGrid, term: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    (0..grid.len()).into_par_iter().map(&term).collect()
}

/// Terms `V(y Z_n(z_k)) f_{n,k}` of the dual sum.
pub fn v_discrete_terms(
    spec: &Utility,
    grid: &BinomialGrid,
    coeffs: &MartingaleCoefficients,
    y: f64,
) -> Result<Vec<f64>> {
    check_positive("y", y)?;
    check_pair(grid, coeffs)?;
    let (ln_y, z, logf) = (y.ln(), grid.z(), grid.logf());
    grid_terms(grid, |k| spec.conj_weighted(ln_y - coeffs.a * z[k] - coeffs.b, logf[k]))
}

/// `v_n(y) = sum_k V(y exp(-a_n z_k - b_n)) f_{n,k}`, summed with compensation.
///
/// `error_estimate` is the a-priori bound `len * eps * sum |terms|`.
pub fn v_discrete(spec: &Utility, grid: &BinomialGrid, coeffs: &MartingaleCoefficients, y: f64) -> Result<ValuePoint> {
    let n = Some(grid.n());
    let terms = match v_discrete_terms(spec, grid, coeffs, y) {
        Ok(t) => t,
        Err(Error::Numerical(msg)) => return Ok(ValuePoint::infinite(y, n, msg)),
        Err(e) => return Err(e),
    };
    if let Some(k) = terms.iter().position(|t| !t.is_finite()) {
        return Ok(ValuePoint::infinite(y, n, format!("term at k={k} is not finite")));
    }
    let value = par_sum(&terms);
    let abs: f64 = par_sum(&terms.iter().map(|t| t.abs()).collect::<Vec<_>>());
    Ok(ValuePoint::finite(y, value, terms.len() as f64 * f64::EPSILON * abs, n))
}

/// A dual value function together with its first two derivatives in `y`.
pub trait DualModel: Sync {
    /// `None` for the continuous model.
    fn steps(&self) -> Option<u64>;
    fn value(&self, y: f64) -> Result<ValuePoint>;
    /// `v'(y) = -E[Z I(y Z)]`.
    fn derivative(&self, y: f64) -> Result<f64>;
    /// `v''(y) = E[Z^2 V''(y Z)]`.
    fn second_derivative(&self, y: f64) -> Result<f64>;
}

/// The Black-Scholes model.
#[derive(Debug, Clone)]
pub struct ContinuousModel<'a> {
    pub spec: &'a Utility,
}

impl DualModel for ContinuousModel<'_> {
    fn steps(&self) -> Option<u64> {
        None
    }

    fn value(&self, y: f64) -> Result<ValuePoint> {
        v_continuous(self.spec, y)
    }

    fn derivative(&self, y: f64) -> Result<f64> {
        check_positive("y", y)?;
        let ln_y = y.ln();
        let g = |x: f64| {
            let ln_z = -0.5 * x - 0.125;
            self.spec.inv_weighted(ln_y + ln_z, ln_pdf(x) + ln_z)
        };
        gauss_expectation(&g)?
            .map(|r| -r.value)
            .ok_or_else(|| Error::Numerical(format!("v'({y}) diverges")))
    }

    fn second_derivative(&self, y: f64) -> Result<f64> {
        check_positive("y", y)?;
        let ln_y = y.ln();
        let g = |x: f64| {
            let ln_z = -0.5 * x - 0.125;
            self.spec.conj_d2_weighted(ln_y + ln_z, ln_pdf(x) + 2.0 * ln_z)
        };
        gauss_expectation(&g)?
            .map(|r| r.value)
            .ok_or_else(|| Error::Numerical(format!("v''({y}) diverges")))
    }
}

/// The `n`-step binomial model.
#[derive(Debug, Clone)]
pub struct DiscreteModel<'a> {
    pub spec: &'a Utility,
    pub grid: &'a BinomialGrid,
    pub coeffs: &'a MartingaleCoefficients,
}

impl<'a> DiscreteModel<'a> {
    pub fn new(spec: &'a Utility, grid: &'a BinomialGrid, coeffs: &'a MartingaleCoefficients) -> Result<Self> {
        check_pair(grid, coeffs)?;
        Ok(Self { spec, grid, coeffs })
    }

    fn ln_density(&self, k: usize) -> f64 {
        -self.coeffs.a * self.grid.z()[k] - self.coeffs.b
    }
}

impl DualModel for DiscreteModel<'_> {
    fn steps(&self) -> Option<u64> {
        Some(self.grid.n())
    }

    fn value(&self, y: f64) -> Result<ValuePoint> {
        v_discrete(self.spec, self.grid, self.coeffs, y)
    }

    fn derivative(&self, y: f64) -> Result<f64> {
        check_positive("y", y)?;
        let (ln_y, logf) = (y.ln(), self.grid.logf());
        let terms = grid_terms(self.grid, |k| {
            let ln_z = self.ln_density(k);
            self.spec.inv_weighted(ln_y + ln_z, logf[k] + ln_z)
        })?;
        Ok(-par_sum(&terms))
    }

    fn second_derivative(&self, y: f64) -> Result<f64> {
        check_positive("y", y)?;
        let (ln_y, logf) = (y.ln(), self.grid.logf());
        let terms = grid_terms(self.grid, |k| {
            let ln_z = self.ln_density(k);
            self.spec.conj_d2_weighted(ln_y + ln_z, logf[k] + 2.0 * ln_z)
        })?;
        Ok(par_sum(&terms))
    }
}

/// `u(x) = inf_{y>0} [v(y) + x y]` for the dual model `model`.
///
/// Solves `v'(y) + x = 0` by Newton's method in `ln y`, safeguarded by
/// bisection on `[1e-12, 1e12]`. The returned point carries the minimizer in
/// `dual_argument`.
pub fn u_from_v<M: DualModel + ?Sized>(model: &M, x: f64) -> Result<ValuePoint> {
    check_positive("x", x)?;
    // Non-finite derivatives only arise from overflow at tiny y, where v' -> -inf.
    let g = |t: f64| match model.derivative(t.exp()) {
        Ok(d) if d.is_finite() => Ok(d + x),
        Ok(_) | Err(Error::Numerical(_)) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    };
    let (mut lo, mut hi) = (Y_MIN.ln(), Y_MAX.ln());
    if g(lo)? >= 0.0 {
        return Err(Error::Numerical(format!(
            "v'(y) + x >= 0 already at y = {Y_MIN}: no minimizer"
        )));
    }
    if g(hi)? <= 0.0 {
        return Err(Error::Numerical(format!(
            "v'(y) + x <= 0 still at y = {Y_MAX}: no minimizer"
        )));
    }
    let mut t = (-x.ln()).clamp(lo, hi);
    let mut gt = g(t)?;
    let mut last_abs = f64::INFINITY;
    for _ in 0..300 {
        if gt.abs() <= 1e-14 * x || hi - lo <= 1e-15 * t.abs().max(1.0) {
            break;
        }
        if gt < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let slope = model
            .second_derivative(t.exp())
            .map(|d| d * t.exp())
            .unwrap_or(f64::NAN);
        let newton = t - gt / slope;
        let stalled = gt.abs() > 0.5 * last_abs;
        t = if newton.is_finite() && newton > lo && newton < hi && !stalled {
            newton
        } else {
            0.5 * (lo + hi)
        };
        last_abs = gt.abs();
        gt = g(t)?;
    }
    if !(gt.abs() <= 1e-8 * x) {
        return Err(Error::Numerical(format!(
            "first-order residual {gt:e} at y = {} exceeds 1e-8 x",
            t.exp()
        )));
    }
    let y = t.exp();
    let v = model.value(y)?;
    if !v.finite {
        return Err(Error::Numerical(format!("v is not finite at the minimizer y = {y}")));
    }
    Ok(ValuePoint {
        argument: x,
        value: v.value + x * y,
        error_estimate: v.error_estimate + y * gt.abs(),
        n: model.steps(),
        finite: true,
        reason: None,
        dual_argument: Some(y),
    })
}

/// Bisection for `y0 = inf { y : v(y) < inf }` inside `[lo, hi]`.
///
/// Returns `None` when `v` is finite on the whole interval and an error when
/// `v(hi)` is already infinite.
pub fn detect_y0<M: DualModel + ?Sized>(model: &M, lo: f64, hi: f64, iterations: usize) -> Result<Option<f64>> {
    check_positive("lo", lo)?;
    check_positive("hi", hi)?;
    if !model.value(hi)?.finite {
        return Err(Error::Numerical(format!("v is infinite at the upper end y = {hi}")));
    }
    if model.value(lo)?.finite {
        return Ok(None);
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..iterations {
        let m = 0.5 * (a + b);
        if model.value(m.exp())?.finite {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(Some(b.exp()))
}

/// Which of the two value functions a sweep tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `u_n(x)` against `u(x)`.
    Primal,
    /// `v_n(y)` against `v(y)`.
    Dual,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Primal => "primal",
            Mode::Dual => "dual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub value: f64,
    /// `value - continuous.value`.
    pub gap: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub p: f64,
    pub utility: String,
    pub argument: f64,
    pub mode: Mode,
    pub continuous: ValuePoint,
    pub rows: Vec<ConvergenceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub tolerance: f64,
    pub final_n: u64,
    pub final_gap: f64,
    /// Smallest `n` from which on every `|gap| <= tolerance`.
    pub within_tolerance_from: Option<u64>,
    /// Whether `|gap|` never increases along the rows.
    pub gap_monotone: bool,
    /// Final row satisfies `value >= continuous - tolerance`.
    pub lower_consistent: bool,
    /// Final row satisfies `value <= continuous + tolerance`.
    pub upper_consistent: bool,
}

impl ConvergenceTable {
    pub fn summary(&self, tolerance: f64) -> ConvergenceSummary {
        let last = self.rows.last();
        let mut within = None;
        for row in self.rows.iter().rev() {
            if !(row.gap.abs() <= tolerance) {
                break;
            }
            within = Some(row.n);
        }
        let final_gap = last.map_or(f64::NAN, |r| r.gap);
        ConvergenceSummary {
            tolerance,
            final_n: last.map_or(0, |r| r.n),
            final_gap,
            within_tolerance_from: within,
            gap_monotone: self.rows.windows(2).all(|w| w[1].gap.abs() <= w[0].gap.abs()),
            lower_consistent: final_gap >= -tolerance,
            upper_consistent: final_gap <= tolerance,
        }
    }

    /// `true` when the last row is within `tolerance` of the continuous value.
    pub fn passes(&self, tolerance: f64) -> bool {
        self.rows.last().is_some_and(|r| r.gap.abs() <= tolerance)
    }
}

fn discrete_point(spec: &Utility, p: f64, n: u64, argument: f64, mode: Mode) -> Result<ValuePoint> {
    let grid = build_grid(n, p)?;
    let coeffs = coefficients(n, p)?;
    let model = DiscreteModel::new(spec, &grid, &coeffs)?;
    match mode {
        Mode::Dual => model.value(argument),
        Mode::Primal => u_from_v(&model, argument),
    }
}

/// Values for every `n` in `n_list` (ascending) next to the continuous value.
pub fn convergence_sweep(
    spec: &Utility,
    p: f64,
    argument: f64,
    mode: Mode,
    n_list: &[u64],
) -> Result<ConvergenceTable> {
    if !(0.5..1.0).contains(&p) {
        return Err(domain(format!("convergence sweeps require p in [1/2, 1), got {p}")));
    }
    check_positive("argument", argument)?;
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("n_list must be strictly ascending".into()));
    }
    let continuous = match mode {
        Mode::Dual => v_continuous(spec, argument)?,
        Mode::Primal => u_from_v(&ContinuousModel { spec }, argument)?,
    };
    if !continuous.finite {
        return Err(Error::Numerical(format!(
            "continuous value is infinite: {}",
            continuous.reason.clone().unwrap_or_default()
        )));
    }
    let points: Vec<ValuePoint> = n_list
        .par_iter()
        .map(|&n| discrete_point(spec, p, n, argument, mode))
        .collect::<Result<_>>()?;
    let rows = points
        .into_iter()
        .map(|pt| ConvergenceRow {
            n: pt.n.unwrap_or(0),
            value: pt.value,
            gap: pt.value - continuous.value,
            error_estimate: pt.error_estimate,
        })
        .collect();
    Ok(ConvergenceTable {
        p,
        utility: spec.tag(),
        argument,
        mode,
        continuous,
        rows,
    })
}

/// Tail sums at one `(n, M)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UiRow {
    pub n: u64,
    pub m: f64,
    /// `sum_k H(z_k) 1{H(z_k) > M} f_{n,k}`.
    pub right_tail: f64,
    /// `sum_k |H(z_k)| 1{H(z_k) < -M} f_{n,k}`.
    pub left_tail: f64,
    pub ln_right_tail: f64,
    pub ln_left_tail: f64,
    /// Natural logs of the matching Gaussian integrals and local constants.
    pub ln_gauss_right: f64,
    pub ln_gauss_left: f64,
    pub ln_c_right: f64,
    pub ln_c_left: f64,
    /// Dominance of the tail sum by `C` times the Gaussian integral. `None`
    /// where the local bound does not apply (`M <= H(1)_+`, resp. `M <= H(-1)_-`).
    pub right_dominated: Option<bool>,
    pub left_dominated: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UiReport {
    pub p: f64,
    pub utility: String,
    pub y: f64,
    pub m_list: Vec<f64>,
    pub n_list: Vec<u64>,
    pub rows: Vec<UiRow>,
    /// Per entry of `m_list`, the supremum over `n` of the right/left tail sums.
    pub sup_right: Vec<f64>,
    pub sup_left: Vec<f64>,
}

impl UiReport {
    /// Both sup curves are non-increasing in `M` and end below `threshold`.
    pub fn tails_vanish(&self, threshold: f64) -> bool {
        let mono = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
        mono(&self.sup_right)
            && mono(&self.sup_left)
            && self.sup_right.last().is_some_and(|&s| s < threshold)
            && self.sup_left.last().is_some_and(|&s| s < threshold)
    }

    /// No applicable dominance check failed.
    pub fn dominance_holds(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.right_dominated != Some(false) && r.left_dominated != Some(false))
    }

    pub fn dominance_checks(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.right_dominated.is_some() as usize + r.left_dominated.is_some() as usize)
            .sum()
    }
}

/// Point where the increasing function `h` crosses `level`; `±inf` when it
/// stays on one side over `[-1e4, 1e4]`.
fn crossing<F: Fn(f64) -> Result<f64>>(h: &F, level: f64) -> Result<f64> {
    let f = |x: f64| h(x).map(|v| v - level);
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while f(hi)? <= 0.0 {
        hi *= 2.0;
        if hi > 1e4 {
            return Ok(f64::INFINITY);
        }
    }
    while f(lo)? > 0.0 {
        lo *= 2.0;
        if lo < -1e4 {
            return Ok(f64::NEG_INFINITY);
        }
    }
    brent(|x| f(x).unwrap_or(f64::NAN), lo, hi, 1e-14, 200)
        .ok_or_else(|| Error::Numerical(format!("level {level} of H could not be located")))
}

/// `ln int_t^inf w(x) phi(x) dx` for `w >= 0` on `(t, inf)`, where
/// `weighted(x, ln_c)` returns `w(x) e^ln_c`. For `t >= 0` the integral is
/// taken as `phi(t) int_0^S w(t+s) e^{-ts - s^2/2} ds` so it stays
/// representable far in the tail.
fn ln_gauss_tail<W: Fn(f64, f64) -> Result<f64>>(weighted: &W, t: f64) -> Result<f64> {
    if t == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let failure: Cell<Option<Error>> = Cell::new(None);
    let guard = |v: Result<f64>| match v {
        Ok(v) => v,
        Err(e) => {
            failure.set(Some(e));
            f64::NAN
        }
    };
    let r = if t >= 0.0 {
        let span = 40.0 / t.max(1.0) + 12.0;
        let q = integrate(
            |s| guard(weighted(t + s, -t * s - 0.5 * s * s)),
            0.0,
            span,
            0.0,
            1e-12,
            16,
            20_000,
        );
        q.value.ln() - 0.5 * t * t - LN_SQRT_2PI
    } else {
        let lo = t.max(-L_MAX);
        let q = integrate(|x| guard(weighted(x, ln_pdf(x))), lo, L_MAX, 0.0, 1e-12, 64, 20_000);
        q.value.ln()
    };
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(r)
}

/// Tail sums of `H` under the binomial law and their Gaussian dominating integrals.
///
/// `H` is the continuous-model function at `y`; the dominance constants are
/// the local constants of each grid. Accepts any `p` in `(0, 1)`.
pub fn uniform_integrability_probe(spec: &Utility, p: f64, y: f64, m_list: &[f64], n_list: &[u64]) -> Result<UiReport> {
    check_positive("y", y)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("p must lie in (0,1), got {p}")));
    }
    if m_list.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
        return Err(domain("tail levels M must be positive and finite"));
    }
    let ln_y = y.ln();
    let h = |x: f64| spec.conj_weighted(ln_y - 0.5 * x - 0.125, 0.0);
    let right_floor = h(1.0)?.max(0.0);
    let left_floor = (-h(-1.0)?).max(0.0);

    struct Level {
        m: f64,
        t: f64,
        s: f64,
        ln_gauss_right: f64,
        ln_gauss_left: f64,
    }
    let levels: Vec<Level> = m_list
        .iter()
        .map(|&m| {
            let t = crossing(&h, m)?;
            let s = crossing(&h, -m)?;
            let ln_gauss_right = ln_gauss_tail(&|x, c| spec.conj_weighted(ln_y - 0.5 * x - 0.125, c), t)?;
            // |H(x)| on x < s, mirrored to x' = -x > -s.
            let ln_gauss_left = ln_gauss_tail(&|x, c| spec.conj_weighted(ln_y + 0.5 * x - 0.125, c).map(|v| -v), -s)?;
            Ok(Level {
                m,
                t,
                s,
                ln_gauss_right,
                ln_gauss_left,
            })
        })
        .collect::<Result<_>>()?;

    let per_n: Vec<Vec<UiRow>> = n_list
        .par_iter()
        .map(|&n| {
            let grid = build_grid(n, p)?;
            let report = scan_grid(&grid);
            let hz: Vec<f64> = grid.z().iter().map(|&z| h(z)).collect::<Result<_>>()?;
            let slack = 1e-9f64.ln_1p();
            Ok(levels
                .iter()
                .map(|lv| {
                    let mut right = ScaledLogSum::new();
                    let mut left = ScaledLogSum::new();
                    for (k, &hk) in hz.iter().enumerate() {
                        if hk > lv.m {
                            right.add_ln(hk.ln() + grid.logf()[k]);
                        } else if hk < -lv.m {
                            left.add_ln((-hk).ln() + grid.logf()[k]);
                        }
                    }
                    let (ln_r, ln_l) = (right.ln_value(), left.ln_value());
                    let dominated = |ln_tail: f64, ln_c: f64, ln_gauss: f64| {
                        ln_tail == f64::NEG_INFINITY || ln_tail <= ln_c + ln_gauss + slack
                    };
                    UiRow {
                        n,
                        m: lv.m,
                        right_tail: ln_r.exp(),
                        left_tail: ln_l.exp(),
                        ln_right_tail: ln_r,
                        ln_left_tail: ln_l,
                        ln_gauss_right: lv.ln_gauss_right,
                        ln_gauss_left: lv.ln_gauss_left,
                        ln_c_right: report.ln_c_right,
                        ln_c_left: report.ln_c_left,
                        right_dominated: (lv.m > right_floor && lv.t > 1.0)
                            .then(|| dominated(ln_r, report.ln_c_right, lv.ln_gauss_right)),
                        left_dominated: (lv.m > left_floor && lv.s < -1.0)
                            .then(|| dominated(ln_l, report.ln_c_left, lv.ln_gauss_left)),
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let rows: Vec<UiRow> = per_n.into_iter().flatten().collect();
    let sup = |m: f64, pick: fn(&UiRow) -> f64| rows.iter().filter(|r| r.m == m).map(pick).fold(0.0, f64::max);
    Ok(UiReport {
        p,
        utility: spec.tag(),
        y,
        m_list: m_list.to_vec(),
        n_list: n_list.to_vec(),
        sup_right: m_list.iter().map(|&m| sup(m, |r| r.right_tail)).collect(),
        sup_left: m_list.iter().map(|&m| sup(m, |r| r.left_tail)).collect(),
        rows,
    })
}

/// Per-atom comparison of `H_n` with `H` on one grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitCheck {
    pub n: u64,
    pub p: f64,
    pub delta: f64,
    /// Atoms with `z_k >= 0` where `H_n(z_k) > H(z_k)`.
    pub right_violations: usize,
    /// Atoms with `z_k <= 0` where `H_n(z_k) < H~(z_k)`, `H~` built from `y e^delta`.
    pub left_violations: usize,
    /// Atoms anywhere with `H_n(z_k) > H(z_k)`.
    pub global_violations: usize,
}

/// Counts atoms violating `H_n <= H` (right half), `H_n >= H~` (left half)
/// and `H_n <= H` everywhere. Comparisons allow a relative rounding slack.
pub fn split_check(
    spec: &Utility,
    grid: &BinomialGrid,
    coeffs: &MartingaleCoefficients,
    y: f64,
    delta: f64,
) -> Result<SplitCheck> {
    check_positive("y", y)?;
    check_pair(grid, coeffs)?;
    let tol = |a: f64, b: f64| 1e-13 * a.abs().max(b.abs()).max(1.0);
    let (mut right, mut left, mut global) = (0, 0, 0);
    for &z in grid.z() {
        let hn = h_discrete(spec, coeffs, y, z)?;
        let h = h_continuous(spec, y, z)?;
        if hn > h + tol(hn, h) {
            global += 1;
            if z >= 0.0 {
                right += 1;
            }
        }
        if z <= 0.0 {
            let ht = h_continuous(spec, y * delta.exp(), z)?;
            if hn < ht - tol(hn, ht) {
                left += 1;
            }
        }
    }
    Ok(SplitCheck {
        n: grid.n(),
        p: grid.p(),
        delta,
        right_violations: right,
        left_violations: left,
        global_violations: global,
    })
}
