//! Binomial approximation of the Black-Scholes-Merton utility maximization
//! problem.
//!
//! The crate builds the standardized binomial law of `n` Bernoulli(`p`) steps,
//! compares it with the standard normal law through local and global tail
//! dominance constants, computes the densities of the equivalent martingale
//! measures of both models, and evaluates the primal and dual value functions
//! `u_n, v_n` and `u, v` of the expected-utility problem so that their
//! convergence can be observed directly.
//!
//! ```
//! use binutil::{build_grid, coefficients, Utility, v_continuous, v_discrete};
//!
//! let spec = Utility::log();
//! let grid = build_grid(1024, 0.5).unwrap();
//! let coeffs = coefficients(1024, 0.5).unwrap();
//! let vn = v_discrete(&spec, &grid, &coeffs, 1.0).unwrap();
//! let v = v_continuous(&spec, 1.0).unwrap();
//! assert!((vn.value - v.value).abs() < 1e-4);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binomial;
pub mod error;
pub mod gaussian;
pub mod martingale;
pub mod quadrature;
pub(crate) mod roots;
pub mod stirling;
pub mod summation;
pub mod tail_bounds;
pub mod utility;
pub mod value_functions;

pub use binomial::{build_grid, log_pmf, BinomialGrid};
pub use error::{Error, Result};
pub use martingale::{
    coefficients, coefficients_probe, density_on_grid, one_step_risk_neutral_check, DensityEval, MartingaleCoefficients,
};
pub use stirling::stirling_theta;
pub use tail_bounds::{
    alpha_derivative_check, g_bound_check, global_tail_dominance, local_ratio, minimal_constant, BoundFunctions, Side,
    TailBoundReport,
};
pub use utility::Utility;
pub use value_functions::{
    convergence_sweep, u_from_v, uniform_integrability_probe, v_continuous, v_discrete, ConvergenceTable, Mode,
    ValuePoint,
};
