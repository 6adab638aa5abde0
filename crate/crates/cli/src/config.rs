//! Command-line parsing and the validated run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "binutil",
    version,
    about = "Tail bounds, martingale coefficients and value-function convergence for the binomial model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub args: RawArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Local and global Gaussian tail dominance constants per (n, p).
    Tailcheck,
    /// Martingale coefficients a_n, b_n and their two-term expansions.
    Coeffs,
    /// Convergence of v_n (dual, --y) or u_n (primal, --x) to the continuous value.
    Converge,
    /// Uniform-integrability tail sums of H over the grids.
    Uiprobe,
    /// All of the above with one summary file.
    Report,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Tailcheck => "tailcheck",
            Command::Coeffs => "coeffs",
            Command::Converge => "converge",
            Command::Uiprobe => "uiprobe",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

/// Flags as typed; every list is a comma-separated string.
#[derive(Debug, Args)]
pub struct RawArgs {
    /// Success probabilities, e.g. `0.5,0.6`.
    #[arg(long, global = true)]
    pub p: Option<String>,
    /// Step counts: `64`, `1,2,3`, `2^6..2^12` (doubling) or a mix.
    #[arg(long, global = true)]
    pub n: Option<String>,
    /// `log`, `power:<gamma>` or `table:<path>`.
    #[arg(long, global = true, default_value = "log")]
    pub utility: String,
    /// Dual arguments y.
    #[arg(long, global = true)]
    pub y: Option<String>,
    /// Primal arguments x.
    #[arg(long, global = true)]
    pub x: Option<String>,
    /// Tail thresholds M for the uniform-integrability probe.
    #[arg(long, global = true)]
    pub m: Option<String>,
    /// Gap tolerance for the convergence verdict.
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub tol: f64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Allow p < 1/2 and never fail the gate.
    #[arg(long, global = true)]
    pub probe: bool,
}

/// Validated configuration. Everything except `out` feeds the config hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub p: Vec<f64>,
    pub n: Vec<u64>,
    pub utility: String,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    pub tol: f64,
    pub format: Format,
    pub probe: bool,
    #[serde(skip)]
    pub out: PathBuf,
}

pub const DEFAULT_M: [f64; 7] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses `2^a..2^b` (doubling, inclusive), `2^a` and plain integers, comma separated.
pub fn parse_n_list(text: &str) -> CliResult<Vec<u64>> {
    let power = |s: &str| -> CliResult<u64> {
        let s = s.trim();
        if let Some(e) = s.strip_prefix("2^") {
            let e: u32 = e.parse().map_err(|_| config_err(format!("bad exponent in {s:?}")))?;
            if e > 62 {
                return Err(config_err(format!("2^{e} is too large")));
            }
            Ok(1u64 << e)
        } else {
            s.parse().map_err(|_| config_err(format!("bad step count {s:?}")))
        }
    };
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, hi)) = item.split_once("..") {
            let (lo, hi) = (lo.trim(), hi.trim());
            if !lo.starts_with("2^") || !hi.starts_with("2^") {
                return Err(config_err(format!(
                    "ranges must be doubling, like 2^4..2^10, got {item:?}"
                )));
            }
            let (mut a, b) = (power(lo)?, power(hi)?);
            if a > b {
                return Err(config_err(format!("empty range {item:?}")));
            }
            while a <= b {
                out.push(a);
                a *= 2;
            }
        } else {
            out.push(power(item)?);
        }
    }
    if out.is_empty() {
        return Err(config_err("--n is empty"));
    }
    if out.contains(&0) {
        return Err(config_err("n must be at least 1"));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn parse_real_list(flag: &str, text: &str) -> CliResult<Vec<f64>> {
    let out = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| config_err(format!("--{flag}: cannot parse {s:?}")))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    if out.is_empty() {
        return Err(config_err(format!("--{flag} is empty")));
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> CliResult<Self> {
        let a = cli.args;
        let command = cli.command;
        let p = parse_real_list("p", a.p.as_deref().unwrap_or("0.5"))?;
        for &pi in &p {
            if !(pi > 0.0 && pi < 1.0) {
                return Err(config_err(format!("p must lie in (0,1), got {pi}")));
            }
            if pi < 0.5 && !a.probe {
                return Err(config_err(format!("p = {pi} < 1/2 is only accepted with --probe")));
            }
            if pi < 0.5 && matches!(command, Command::Converge | Command::Report) {
                return Err(config_err(
                    "converge needs p in [1/2, 1); the convergence result does not cover p < 1/2",
                ));
            }
        }
        let n = match a.n.as_deref() {
            Some(s) => parse_n_list(s)?,
            None => return Err(config_err("--n is required")),
        };
        let positive = |flag: &str, v: Vec<f64>| -> CliResult<Vec<f64>> {
            match v.iter().find(|&&t| !(t > 0.0)) {
                Some(bad) => Err(config_err(format!("--{flag} values must be positive, got {bad}"))),
                None => Ok(v),
            }
        };
        let y = match a.y.as_deref() {
            Some(s) => positive("y", parse_real_list("y", s)?)?,
            None => Vec::new(),
        };
        let x = match a.x.as_deref() {
            Some(s) => positive("x", parse_real_list("x", s)?)?,
            None => Vec::new(),
        };
        let m = match a.m.as_deref() {
            Some(s) => positive("m", parse_real_list("m", s)?)?,
            None => DEFAULT_M.to_vec(),
        };
        if !(a.tol >= 0.0) || !a.tol.is_finite() {
            return Err(config_err(format!(
                "--tol must be a finite non-negative number, got {}",
                a.tol
            )));
        }
        Ok(Self {
            command,
            p,
            n,
            utility: a.utility.trim().to_string(),
            y,
            x,
            m,
            tol: a.tol,
            format: a.format,
            probe: a.probe,
            out: a.out,
        })
    }

    /// Dual arguments for `converge`/`uiprobe`; `y = 1` when neither `--y` nor `--x` is given.
    pub fn dual_arguments(&self) -> Vec<f64> {
        if self.y.is_empty() && self.x.is_empty() {
            vec![1.0]
        } else {
            self.y.clone()
        }
    }

    /// Hex SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}
