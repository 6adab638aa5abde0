//! Utility functions and their convex conjugates.
//!
//! A utility `U` on `(0, inf)` is strictly increasing, strictly concave and
//! satisfies the Inada conditions `U'(0+) = inf`, `U'(inf) = 0`. Its conjugate
//! is `V(y) = sup_{x>0} [U(x) - x y]`, attained at the inverse marginal
//! `x = I(y) = (U')^{-1}(y)`; `V` is convex and decreasing with `V'(y) = -I(y)`.
//!
//! The value-function sums evaluate `V` at `y exp(-a z - b)` for `z` of order
//! `sqrt(n)`, so the evaluation entry points used there take `ln y` and a log
//! weight and combine the exponents before exponentiating.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::roots::brent;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Family {
    Power { gamma: f64 },
    Log,
    Custom(Arc<CustomUtility>),
    Table(Arc<TabulatedUtility>),
}

/// A validated utility function together with its conjugate.
#[derive(Clone)]
pub struct Utility {
    family: Family,
}

impl fmt::Debug for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Utility").field(&self.tag()).finish()
    }
}

/// User-supplied `(U, U')` pair.
pub struct CustomUtility {
    name: String,
    u: ScalarFn,
    du: ScalarFn,
}

fn check_y(y: f64) -> Result<()> {
    if y > 0.0 && y.is_finite() {
        Ok(())
    } else {
        Err(domain(format!(
            "conjugate arguments must be positive and finite, got {y}"
        )))
    }
}

/// Sample points used to validate user-supplied utilities: 10^-8 ..= 10^8.
fn validation_grid() -> Vec<f64> {
    (-80..=80).map(|i| 10f64.powf(i as f64 / 10.0)).collect()
}

fn validate_pair(u: &dyn Fn(f64) -> f64, du: &dyn Fn(f64) -> f64) -> Result<()> {
    let xs = validation_grid();
    let us: Vec<f64> = xs.iter().map(|&x| u(x)).collect();
    let dus: Vec<f64> = xs.iter().map(|&x| du(x)).collect();
    if us.iter().chain(&dus).any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec("U or U' is not finite on the sample grid".into()));
    }
    if dus.iter().any(|&d| d <= 0.0) {
        return Err(Error::InvalidSpec("U' must be strictly positive".into()));
    }
    if dus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidSpec("sampled U' is not strictly decreasing".into()));
    }
    if us.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpec("sampled U is not strictly increasing".into()));
    }
    for w in xs.windows(2) {
        let mid = u(0.5 * (w[0] + w[1]));
        let chord = 0.5 * (u(w[0]) + u(w[1]));
        if mid < chord - 1e-12 * chord.abs().max(1.0) {
            return Err(Error::InvalidSpec(format!(
                "U fails midpoint concavity on [{}, {}]",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

impl Utility {
    /// `U(x) = x^(1-gamma)/(1-gamma)` for `gamma > 0`, `gamma != 1`.
    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || gamma == 1.0 || !gamma.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "power utility needs gamma > 0 and gamma != 1, got {gamma}"
            )));
        }
        Ok(Self {
            family: Family::Power { gamma },
        })
    }

    /// `U(x) = ln x`.
    pub fn log() -> Self {
        Self { family: Family::Log }
    }

    /// Wraps arbitrary `(U, U')` callables after sampling them for
    /// positivity, monotonicity and concavity.
    pub fn custom<U, D>(name: &str, u: U, du: D) -> Result<Self>
    where
        U: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        validate_pair(&u, &du)?;
        Ok(Self {
            family: Family::Custom(Arc::new(CustomUtility {
                name: name.to_string(),
                u: Arc::new(u),
                du: Arc::new(du),
            })),
        })
    }

    pub fn from_table(table: TabulatedUtility) -> Self {
        Self {
            family: Family::Table(Arc::new(table)),
        }
    }

    /// Parses `log`, `power:<gamma>` or `table:<path>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "log" {
            return Ok(Self::log());
        }
        if let Some(g) = spec.strip_prefix("power:") {
            let gamma: f64 = g
                .trim()
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("cannot parse gamma in {spec:?}")))?;
            return Self::power(gamma);
        }
        if let Some(path) = spec.strip_prefix("table:") {
            return Ok(Self::from_table(TabulatedUtility::from_csv_path(path)?));
        }
        Err(Error::InvalidSpec(format!(
            "unknown utility {spec:?}; expected log, power:<gamma> or table:<path>"
        )))
    }

    /// Family tag as accepted by [`Utility::parse`].
    pub fn tag(&self) -> String {
        match &self.family {
            Family::Power { gamma } => format!("power:{gamma}"),
            Family::Log => "log".to_string(),
            Family::Custom(c) => format!("custom:{}", c.name),
            Family::Table(t) => format!("table:{}", t.source),
        }
    }

    /// `Some(gamma)` for power utilities.
    pub fn power_gamma(&self) -> Option<f64> {
        match self.family {
            Family::Power { gamma } => Some(gamma),
            _ => None,
        }
    }

    pub fn is_log(&self) -> bool {
        matches!(self.family, Family::Log)
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.family {
            Family::Power { gamma } => x.powf(1.0 - gamma) / (1.0 - gamma),
            Family::Log => x.ln(),
            Family::Custom(c) => (c.u)(x),
            Family::Table(t) => t.value(x),
        }
    }

    pub fn marginal(&self, x: f64) -> f64 {
        match &self.family {
            Family::Power { gamma } => x.powf(-gamma),
            Family::Log => 1.0 / x,
            Family::Custom(c) => (c.du)(x),
            Family::Table(t) => t.marginal(x),
        }
    }

    /// `U''(x)`; central differences of `U'` for custom utilities.
    pub fn second_derivative(&self, x: f64) -> f64 {
        match &self.family {
            Family::Power { gamma } => -gamma * x.powf(-gamma - 1.0),
            Family::Log => -1.0 / (x * x),
            Family::Custom(c) => {
                let h = 1e-5 * x;
                ((c.du)(x + h) - (c.du)(x - h)) / (2.0 * h)
            }
            Family::Table(t) => t.second_derivative(x),
        }
    }

    /// `I(y) = (U')^{-1}(y)`.
    ///
    /// ```
    /// let u = binutil::Utility::power(0.5).unwrap();
    /// assert!((u.inverse_marginal(4.0).unwrap() - 0.0625).abs() < 1e-15);
    /// ```
    pub fn inverse_marginal(&self, y: f64) -> Result<f64> {
        check_y(y)?;
        match &self.family {
            Family::Power { gamma } => Ok(y.powf(-1.0 / gamma)),
            Family::Log => Ok(1.0 / y),
            Family::Custom(c) => c.solve_marginal(y),
            Family::Table(t) => Ok(t.inverse_marginal(y)),
        }
    }

    /// `V(y) = sup_{x>0} [U(x) - x y]`.
    ///
    /// ```
    /// let u = binutil::Utility::log();
    /// assert_eq!(u.conjugate(1.0).unwrap(), -1.0);
    /// ```
    pub fn conjugate(&self, y: f64) -> Result<f64> {
        check_y(y)?;
        self.conj_weighted(y.ln(), 0.0)
    }

    /// `V'(y) = -I(y)`.
    pub fn conjugate_derivative(&self, y: f64) -> Result<f64> {
        Ok(-self.inverse_marginal(y)?)
    }

    /// `V''(y) = -1/U''(I(y))`.
    pub fn conjugate_second_derivative(&self, y: f64) -> Result<f64> {
        check_y(y)?;
        self.conj_d2_weighted(y.ln(), 0.0)
    }

    /// `V(e^ln_y) e^ln_w`, combining exponents for the closed-form families.
    pub fn conj_weighted(&self, ln_y: f64, ln_w: f64) -> Result<f64> {
        match &self.family {
            Family::Power { gamma } => {
                let c = gamma / (1.0 - gamma);
                let r = (gamma - 1.0) / gamma;
                Ok(c.signum() * (c.abs().ln() + r * ln_y + ln_w).exp())
            }
            Family::Log => Ok((-ln_y - 1.0) * ln_w.exp()),
            _ => {
                let y = ln_y.exp();
                if !(y > 0.0 && y.is_finite()) {
                    return Err(Error::Numerical(format!("conjugate argument e^{ln_y} is out of range")));
                }
                let x = self.inverse_marginal(y)?;
                Ok((self.value(x) - x * y) * ln_w.exp())
            }
        }
    }

    /// `I(e^ln_y) e^ln_w`.
    pub fn inv_weighted(&self, ln_y: f64, ln_w: f64) -> Result<f64> {
        match &self.family {
            Family::Power { gamma } => Ok((-ln_y / gamma + ln_w).exp()),
            Family::Log => Ok((-ln_y + ln_w).exp()),
            _ => {
                let y = ln_y.exp();
                if !(y > 0.0 && y.is_finite()) {
                    return Err(Error::Numerical(format!("conjugate argument e^{ln_y} is out of range")));
                }
                Ok(self.inverse_marginal(y)? * ln_w.exp())
            }
        }
    }

    /// `V''(e^ln_y) e^ln_w`.
    pub fn conj_d2_weighted(&self, ln_y: f64, ln_w: f64) -> Result<f64> {
        match &self.family {
            Family::Power { gamma } => Ok((-gamma.ln() - (1.0 / gamma + 1.0) * ln_y + ln_w).exp()),
            Family::Log => Ok((-2.0 * ln_y + ln_w).exp()),
            _ => {
                let y = ln_y.exp();
                if !(y > 0.0 && y.is_finite()) {
                    return Err(Error::Numerical(format!("conjugate argument e^{ln_y} is out of range")));
                }
                let x = self.inverse_marginal(y)?;
                Ok(-ln_w.exp() / self.second_derivative(x))
            }
        }
    }
}

impl CustomUtility {
    /// Solves `U'(x) = y` in `ln x` with Brent's method after expanding a bracket.
    fn solve_marginal(&self, y: f64) -> Result<f64> {
        let g = |t: f64| (self.du)(t.exp()).ln() - y.ln();
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        while g(lo) < 0.0 {
            lo *= 2.0;
            if lo < -700.0 {
                return Err(Error::Numerical(format!("U'(x) = {y} has no root with x > e^-700")));
            }
        }
        while g(hi) > 0.0 {
            hi *= 2.0;
            if hi > 700.0 {
                return Err(Error::Numerical(format!("U'(x) = {y} has no root with x < e^700")));
            }
        }
        brent(g, lo, hi, 1e-15, 200)
            .map(f64::exp)
            .ok_or_else(|| Error::Numerical(format!("root finding for U'(x) = {y} failed")))
    }
}

/// Utility given by rows `(x, U(x), U'(x))` with strictly increasing `x`.
///
/// `U'` is interpolated linearly in `(ln x, ln U')`, i.e. as a power law on
/// each segment, and extrapolated with the end slopes. This keeps `U'`
/// positive and decreasing and preserves the Inada limits. `U` is the
/// integral of that interpolant anchored at the first row; the tabulated `U`
/// values are only used to check consistency. The result is `C^1`, not smooth.
#[derive(Debug, Clone)]
pub struct TabulatedUtility {
    source: String,
    x: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    /// Power-law exponent `s_i` with `U'(x) = du_i (x/x_i)^(-s_i)` on segment `i`.
    slope: Vec<f64>,
}

/// `(r^(1-s) - 1)/(1-s)`, continuous through `s = 1`.
fn power_integral(r: f64, s: f64) -> f64 {
    let lr = r.ln();
    let t = (1.0 - s) * lr;
    if t == 0.0 {
        lr
    } else {
        lr * t.exp_m1() / t
    }
}

impl TabulatedUtility {
    /// Builds and validates a table. `source` is only used for the tag.
    pub fn new(source: &str, rows: &[(f64, f64, f64)]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidSpec("a utility table needs at least two rows".into()));
        }
        for r in rows {
            if !(r.0 > 0.0) || !r.0.is_finite() || !r.1.is_finite() || !(r.2 > 0.0) || !r.2.is_finite() {
                return Err(Error::InvalidSpec(format!("invalid table row {r:?}")));
            }
        }
        if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidSpec("table x values must be strictly increasing".into()));
        }
        if rows.windows(2).any(|w| w[1].2 >= w[0].2) {
            return Err(Error::InvalidSpec("tabulated U' is not strictly decreasing".into()));
        }
        let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let du: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let slope: Vec<f64> = (0..rows.len() - 1)
            .map(|i| -(du[i + 1] / du[i]).ln() / (x[i + 1] / x[i]).ln())
            .collect();
        let mut u = vec![rows[0].1];
        for i in 0..rows.len() - 1 {
            let inc = du[i] * x[i] * power_integral(x[i + 1] / x[i], slope[i]);
            u.push(u[i] + inc);
        }
        for (i, r) in rows.iter().enumerate() {
            if (u[i] - r.1).abs() > 1e-3 * r.1.abs().max(1.0) {
                return Err(Error::InvalidSpec(format!(
                    "tabulated U({}) = {} disagrees with the integral of U' ({})",
                    r.0, r.1, u[i]
                )));
            }
        }
        Ok(Self {
            source: source.to_string(),
            x,
            u,
            du,
            slope,
        })
    }

    /// Reads CSV rows `x,U,U'`; a non-numeric first row is treated as a header.
    pub fn from_csv_reader<R: std::io::Read>(source: &str, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::InvalidSpec(format!("{source}: {e}")))?;
            if record.len() != 3 {
                return Err(Error::InvalidSpec(format!(
                    "{source}: row {} has {} fields, expected x,U,U'",
                    line + 1,
                    record.len()
                )));
            }
            let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => rows.push((v[0], v[1], v[2])),
                Err(_) if line == 0 => continue,
                Err(_) => return Err(Error::InvalidSpec(format!("{source}: row {} is not numeric", line + 1))),
            }
        }
        Self::new(source, &rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
        Self::from_csv_reader(&path.display().to_string(), file)
    }

    fn segment(&self, x: f64) -> usize {
        let i = self.x.partition_point(|&v| v <= x);
        i.saturating_sub(1).min(self.x.len() - 2)
    }

    pub fn marginal(&self, x: f64) -> f64 {
        let i = self.segment(x);
        self.du[i] * (x / self.x[i]).powf(-self.slope[i])
    }

    pub fn value(&self, x: f64) -> f64 {
        let i = self.segment(x);
        self.u[i] + self.du[i] * self.x[i] * power_integral(x / self.x[i], self.slope[i])
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        -self.slope[i] * self.marginal(x) / x
    }

    pub fn inverse_marginal(&self, y: f64) -> f64 {
        // du is decreasing: first segment whose right end drops below y.
        let m = self.du.len();
        let i = self.du.partition_point(|&d| d > y).saturating_sub(1).min(m - 2);
        self.x[i] * (y / self.du[i]).powf(-1.0 / self.slope[i])
    }
}
