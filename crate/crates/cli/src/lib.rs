//! Front end for the `binutil` sweeps.
//!
//! [`run`] parses arguments, sets up the worker pool, runs one subcommand
//! and returns the process exit code: 0 pass, 1 configuration error,
//! 2 I/O error, 3 numerical failure (including a failed check).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use config::{Cli, Command, RunConfig};
use error::{CliError, CliResult};
use output::Emitter;

/// Environment variable holding the worker-pool size.
pub const THREADS_VAR: &str = "BINUTIL_THREADS";

fn init_pool() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    // A second call in the same process (tests) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn execute(cfg: &RunConfig, out: &mut impl Write) -> CliResult<i32> {
    let spec = binutil::Utility::parse(&cfg.utility)?;
    let mut emit = Emitter::new(&cfg.out, cfg.format, cfg.hash(), config::version())?;
    let verdicts = match cfg.command {
        Command::Tailcheck => vec![commands::tailcheck(cfg, &mut emit)?],
        Command::Coeffs => vec![commands::coeffs(cfg, &mut emit)?],
        Command::Converge => vec![commands::converge(cfg, &spec, &mut emit)?],
        Command::Uiprobe => vec![commands::uiprobe(cfg, &spec, &mut emit)?],
        Command::Report => commands::report(cfg, &spec, &mut emit)?,
    };
    for v in &verdicts {
        writeln!(out, "{} {} ({} cases)", v.command, v.label(), v.cases)?;
        for f in &v.failures {
            eprintln!("  {f}");
        }
    }
    writeln!(out, "config_hash {}", cfg.hash())?;
    for path in emit.written() {
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(commands::exit_code(&verdicts))
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = init_pool()
        .and_then(|()| RunConfig::from_cli(cli))
        .and_then(|cfg| execute(&cfg, &mut std::io::stdout().lock()));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("binutil: {e}");
            e.exit_code()
        }
    }
}
