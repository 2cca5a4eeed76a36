//! The `bernstein` command-line tool.
//!
//! Every command reads an optional `key = value` config file, applies
//! `--set key=value` overrides, writes its outputs atomically into the output
//! directory together with `manifest.txt`, and exits with 0 on success, 2 on a
//! config error, 3 for an infeasible problem, 4 on non-convergence and 5 when
//! a check fails.

mod commands;
mod config;

pub use config::{parse_config_text, RunConfig};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "bernstein",
    version,
    about = "Bernstein processes from heat-kernel spectra"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides a config value; repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (config key `out`).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues and normalizers of the basis, to spectrum.csv.
    Spectrum(Common),
    /// Samples trajectories and compares their marginals with the analytic law.
    Simulate(Common),
    /// Maximal-entropy Gibbs weights for a prescribed spectral average.
    Entropy(Common),
    /// Runs the cross-module invariant checks.
    Verify(Common),
    /// Solves the Schrödinger system for two marginal densities.
    Bridge(Common),
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, common, keys, command): (&str, Common, &[&str], commands::CommandFn) =
        match cli.command {
            Command::Spectrum(c) => ("spectrum", c, commands::SPECTRUM_KEYS, commands::spectrum),
            Command::Simulate(c) => ("simulate", c, commands::SIMULATE_KEYS, commands::simulate),
            Command::Entropy(c) => ("entropy", c, commands::ENTROPY_KEYS, commands::entropy),
            Command::Verify(c) => ("verify", c, commands::VERIFY_KEYS, commands::verify),
            Command::Bridge(c) => ("bridge", c, commands::BRIDGE_KEYS, commands::bridge),
        };
    let mut overrides = common.set;
    if let Some(out) = common.out {
        overrides.push(format!("out={}", out.display()));
    }
    let result = RunConfig::new(common.config.as_deref(), &overrides, keys)
        .and_then(|config| commands::execute(name, &config, command));
    match result {
        Ok(true) => 0,
        Ok(false) => 5,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
