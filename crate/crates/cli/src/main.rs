//! `kancim`: KAN-on-CIM experiments from the command line.

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::TuneOptions;
use config::{ExperimentConfig, LogLevel};
use error::CliError;
use report::OutDir;

#[derive(Debug, Parser)]
#[command(name = "kancim", version, about = "KAN spline quantization and analog CIM experiments")]
struct Cli {
    /// Experiment config (TOML). Built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Global seed; replaces every seed in the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", env = "KANCIM_OUT_DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, env = "KANCIM_LOG")]
    log_level: Option<LevelArg>,
    /// Override a config key, e.g. `--set crossbar.rows=256`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LevelArg {
    Error,
    Warn,
    Info,
    Debug,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a KAN on `paths.dataset`; writes a checkpoint and the loss curve.
    Train,
    /// LUT/MUX/decoder inventory across a grid sweep, plus SH-LUT dumps of a checkpoint.
    Quantize,
    /// Monte Carlo comparison of the word-line input encoders.
    CompareEncoders,
    /// SAM / uniform / reversed row mappings across array sizes.
    MapSimulate,
    /// Budget-constrained grid extension.
    Tune {
        /// Continue from `tune_state.json` in the output directory.
        #[arg(long)]
        resume: bool,
        /// Stop after this many extension windows.
        #[arg(long, value_name = "N")]
        stop_after: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Quantize => "quantize",
            Command::CompareEncoders => "compare-encoders",
            Command::MapSimulate => "map-simulate",
            Command::Tune { .. } => "tune",
        }
    }
}

fn init_logging(level: &str) {
    let filter = tracing_subscriber::EnvFilter::new(format!("kancim={level},kan_cim={level}"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .without_time()
        .init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref(), &cli.set)?;
    let level = match cli.log_level {
        Some(LevelArg::Error) => "error",
        Some(LevelArg::Warn) => "warn",
        Some(LevelArg::Info) => "info",
        Some(LevelArg::Debug) => "debug",
        None => cfg.log_level.as_ref().map_or("warn", LogLevel::as_str),
    };
    init_logging(level);
    let seed = cli.seed.unwrap_or(cfg.seed);
    cfg.apply_seed(seed);
    cfg.validate()?;

    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }

    let dir = cli.out.or_else(|| cfg.paths.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let mut out = OutDir::create(&dir)?;
    let results = match &cli.command {
        Command::Train => commands::train_cmd(&cfg, &mut out)?,
        Command::Quantize => commands::quantize_cmd(&cfg, &mut out)?,
        Command::CompareEncoders => commands::compare_cmd(&cfg, &mut out)?,
        Command::MapSimulate => commands::map_cmd(&cfg, &mut out)?,
        Command::Tune { resume, stop_after } => {
            commands::tune_cmd(&cfg, &mut out, &TuneOptions { resume: *resume, stop_after: *stop_after })?
        }
    };
    let infeasible = results.get("status").and_then(|s| s.as_str()) == Some("infeasible")
        && results.get("finished").and_then(|f| f.as_bool()) == Some(true);
    out.finish(cli.command.name(), seed, results)?;
    if infeasible {
        return Err(CliError::Infeasible(format!(
            "budget cannot be met even at the minimum grid; see {}",
            dir.join("tune_summary.json").display()
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kancim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
