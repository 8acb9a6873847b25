//! Command-line entry point: flag parsing, config resolution, dispatch.
//!
//! Every subcommand resolves its settings in three layers — built-in
//! defaults, then an optional `--config` file, then explicit flags — and
//! echoes the result into its output directory. Flags shared across
//! commands are only accepted where the command actually has that setting;
//! anything else is a configuration error.
//!
//! Exit codes: 0 on success, 2 on any configuration or I/O error, 3 when
//! `verify-theorem` completes but the check fails.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;
use config::Config;

#[derive(Parser)]
#[command(
    name = "qprior",
    version,
    about = "Learns action preferences shared by solved tasks and uses them to bias exploration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one value table per goal and save them as prior sources
    TrainSources(CommonArgs),
    /// Distil a prior table from saved sources via consensus selection
    LearnPrior(CommonArgs),
    /// Train the target task with and without prior-biased exploration
    TrainTarget(CommonArgs),
    /// Compare the closed-form unsafe-exploration ratio with simulation
    VerifyTheorem(CommonArgs),
    /// Re-learn the prior on variant maps, warm-started versus scratch
    Transfer(CommonArgs),
    /// Full seek-mode pipeline on a map with a common-reward cell
    CommonReward(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// key=value file applied over the command's defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in map name or path to a map file
    #[arg(long)]
    map: Option<String>,
    /// `n` for seeds 0..n, or an explicit comma-separated list
    #[arg(long)]
    seeds: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core)
    #[arg(long)]
    jobs: Option<usize>,
    /// Probability of biasing an exploratory action, in [0, 1]
    #[arg(long)]
    rho: Option<f64>,
    /// Consensus selection threshold
    #[arg(long)]
    threshold_t: Option<f64>,
    /// What the prior encodes: `avoid` or `seek`
    #[arg(long)]
    mode: Option<String>,
}

fn resolve(defaults: &[(&str, &str)], args: &CommonArgs) -> Result<Config> {
    let mut cfg = Config::from_defaults(defaults);
    if let Some(path) = &args.config {
        cfg.merge_file(path)?;
    }
    if let Some(v) = &args.map {
        cfg.set("map", v)?;
    }
    if let Some(v) = &args.seeds {
        cfg.set("seeds", v)?;
    }
    if let Some(v) = &args.out {
        cfg.set("out", &v.display().to_string())?;
    }
    if let Some(v) = args.jobs {
        cfg.set("jobs", &v.to_string())?;
    }
    if let Some(v) = args.rho {
        cfg.set("rho", &v.to_string())?;
    }
    if let Some(v) = args.threshold_t {
        cfg.set("threshold_t", &v.to_string())?;
    }
    if let Some(v) = &args.mode {
        cfg.set("mode", v)?;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::TrainSources(a) => {
            commands::cmd_train_sources(&resolve(commands::TRAIN_SOURCES_DEFAULTS, &a)?)?;
            Ok(0)
        }
        Command::LearnPrior(a) => {
            commands::cmd_learn_prior(&resolve(commands::LEARN_PRIOR_DEFAULTS, &a)?)?;
            Ok(0)
        }
        Command::TrainTarget(a) => {
            commands::cmd_train_target(&resolve(commands::TRAIN_TARGET_DEFAULTS, &a)?)?;
            Ok(0)
        }
        Command::VerifyTheorem(a) => {
            let ok =
                commands::cmd_verify_theorem(&resolve(commands::VERIFY_THEOREM_DEFAULTS, &a)?)?;
            Ok(if ok { 0 } else { 3 })
        }
        Command::Transfer(a) => {
            commands::cmd_transfer(&resolve(commands::TRANSFER_DEFAULTS, &a)?)?;
            Ok(0)
        }
        Command::CommonReward(a) => {
            commands::cmd_common_reward(&resolve(commands::COMMON_REWARD_DEFAULTS, &a)?)?;
            Ok(0)
        }
    }
}

/// Parses `args` (the first element names the binary) and runs the
/// selected command, returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
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
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Runs the CLI on the process arguments.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}
