//! Argument parsing and command dispatch behind the `stns` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::commands;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "stns", version, about = "Stochastic tamed Navier–Stokes solver")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed, overriding `mc.base_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of replicates, overriding `mc.paths`.
    #[arg(long, global = true)]
    paths: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate one trajectory.
    Simulate,
    /// Independent replicates with mean and standard error per summary field.
    Mc,
    /// Linear stochastic heat equation with additive forcing.
    Heat,
    /// Picard contraction study, halving the horizon until it contracts.
    Picard,
    /// Differences between truncation levels driven by the same noise.
    Cauchy,
    /// Operator and kernel self-checks.
    OpsTest,
}

/// Runs a parsed command line. `Ok(false)` means the command's own checks
/// failed.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = cli.out {
        cfg.output.directory = dir;
    }
    if let Some(seed) = cli.seed {
        cfg.mc.base_seed = seed;
    }
    if let Some(paths) = cli.paths {
        cfg.mc.paths = paths;
    }
    cfg.validate()?;
    let dir = cfg.output.directory.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    writeln!(out, "{}", serde_json::to_string(&cfg)?)?;
    let run = match cli.command {
        Command::Simulate => commands::simulate,
        Command::Mc => commands::mc,
        Command::Heat => commands::heat,
        Command::Picard => commands::picard,
        Command::Cauchy => commands::cauchy,
        Command::OpsTest => commands::ops_test,
    };
    run(&cfg, &dir, out)
}

/// Full entry point: parses `args` (program name first), runs the command and
/// returns the process exit status: 0 on success, 1 when checks fail, 2 on
/// errors. Usage errors are printed by clap with its own status.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli, out) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            2
        }
    }
}
