//! `rispower`: solve, sweep and compare RIS power-minimization instances.
//!
//! Exit codes: 0 converged (or command completed), 1 configuration or
//! argument error, 2 infeasible instance, 3 outer iteration cap reached,
//! 4 oversized exhaustive comparison, 5 other failure.

mod commands;
mod config;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{cmd_compare, cmd_solve, cmd_sweep, Outcome, EXIT_PARSE};
use config::{RunConfig, Sweep};

#[derive(Parser)]
#[command(
    name = "rispower",
    version,
    about = "RIS power minimization for cooperative backscatter links"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key=value configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base channel seed (overrides the file).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output path (a prefix for `solve`).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Replay channels from a file instead of drawing them.
        #[arg(long, value_name = "PATH")]
        channels: Option<PathBuf>,
        /// Also report the all-reflecting baseline and, for I_R <= 3, the
        /// exhaustive optimum.
        #[arg(long)]
        oracle: bool,
    },
    /// Solve a grid of instances along one axis and write CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Axis and values, e.g. gamma_A_db=5,10,15.
        #[arg(long, value_name = "AXIS=V1,V2,...")]
        sweep: Option<String>,
        /// Seeds per axis value.
        #[arg(long, value_name = "N")]
        seeds: Option<u64>,
    },
    /// Compare against exhaustive search (I_R <= 3).
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "N")]
        seeds: Option<u64>,
        /// Accepted for symmetry with `solve`; the comparison always runs the oracle.
        #[arg(long)]
        oracle: bool,
    },
}

fn load(common: &Common) -> Result<RunConfig, Outcome> {
    let parse_err = |msg: String| Outcome {
        stderr: format!("error: {msg}\n"),
        code: EXIT_PARSE,
        ..Outcome::default()
    };
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| parse_err(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text).map_err(|e| parse_err(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| parse_err(format!("--set expects KEY=VALUE, found `{kv}`")))?;
        cfg.set(k.trim(), v.trim())
            .map_err(|m| parse_err(format!("--set: {m}")))?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Outcome {
    let (common, seeds) = match &cli.command {
        Command::Solve { common, .. } => (common, None),
        Command::Sweep { common, seeds, .. } | Command::Compare { common, seeds, .. } => {
            (common, *seeds)
        }
    };
    let mut cfg = match load(common) {
        Ok(cfg) => cfg,
        Err(o) => return o,
    };
    if let Some(n) = seeds {
        cfg.seeds = n;
    }
    if let Command::Sweep {
        sweep: Some(spec), ..
    } = &cli.command
    {
        match Sweep::parse(spec) {
            Ok(s) => cfg.sweep = Some(s),
            Err(m) => {
                return Outcome {
                    stderr: format!("error: --sweep: {m}\n"),
                    code: EXIT_PARSE,
                    ..Outcome::default()
                }
            }
        }
    }
    // The I_R guard of `compare` takes precedence over parameter validation.
    if !matches!(cli.command, Command::Compare { .. }) || cfg.params.i_r <= 3 {
        if let Err(e) = cfg.validate() {
            return Outcome {
                stderr: format!("error: {e}\n"),
                code: EXIT_PARSE,
                ..Outcome::default()
            };
        }
    }
    let out = common.out.as_deref();
    match &cli.command {
        Command::Solve {
            channels, oracle, ..
        } => cmd_solve(&cfg, channels.as_deref(), out, *oracle),
        Command::Sweep { .. } => cmd_sweep(&cfg, out),
        Command::Compare { .. } => cmd_compare(&cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_PARSE } else { 0 });
        }
    };
    let o = run(cli);
    let _ = std::io::stdout().write_all(o.stdout.as_bytes());
    let _ = std::io::stderr().write_all(o.stderr.as_bytes());
    ExitCode::from(o.code)
}
