//! Command-line front end.
//!
//! Subcommands `bounds-table`, `verify`, `lowerbound` and `gap` (plus `run`,
//! which takes the command from the config file) write CSV to `--out` or
//! standard output. Exit codes: 0 pass, 1 fail or bad config file,
//! 2 inconclusive, 64 usage error.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand};

pub use config::{ExperimentConfig, ParseError};
pub use output::CsvTable;

use crate::verify::CheckStatus;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "MBL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "mbl", version, about = "Margin generalization bound laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every bound over a parameter sweep.
    BoundsTable(Common),
    /// Run a Monte Carlo or exact check.
    Verify {
        /// Check name; overrides `check` from the config file.
        check: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Gap experiment on the lower-bound distribution.
    Lowerbound(Common),
    /// Margin perceptron gaps against the bounds.
    Gap(Common),
    /// Run the command named in the config file.
    Run(Common),
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Experiment configuration file.
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path (standard output when absent).
    #[arg(long)]
    pub out: Option<String>,
    /// Trial or sample count.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Worker threads; never changes the output.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Parameter override `key=value`, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Bound constant `name=value`, repeatable.
    #[arg(long = "c", value_name = "NAME=VALUE")]
    pub constants: Vec<String>,
}

/// Failure modes of a command invocation.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config { path: String, error: ParseError },
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config { .. } | CliError::Io(_) => EXIT_FAIL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Config { path, error } => write!(f, "{path}:{}: {}", error.line, error.message),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn split_pair(s: &str, flag: &str) -> Result<(String, String), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("{flag} expects KEY=VALUE, got `{s}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Loads the config file (if any) and applies command-line overrides.
pub fn effective_config(command: Option<&str>, common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
            ExperimentConfig::parse(&text).map_err(|error| CliError::Config {
                path: path.clone(),
                error,
            })?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(cmd) = command {
        match &cfg.command {
            Some(existing) if existing != cmd => {
                return Err(CliError::Usage(format!(
                    "config file is for `{existing}`, not `{cmd}`"
                )));
            }
            _ => cfg.command = Some(cmd.to_string()),
        }
    }
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.trials.is_some() {
        cfg.trials = common.trials;
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    for s in &common.set {
        let (k, v) = split_pair(s, "--set")?;
        cfg.params.insert(k, v);
    }
    for s in &common.constants {
        let (k, v) = split_pair(s, "--c")?;
        cfg.constants.insert(k, v);
    }
    Ok(cfg)
}

fn thread_count(common: &Common) -> Result<Option<usize>, CliError> {
    if let Some(t) = common.threads {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV}=`{v}` is not a thread count"))),
        _ => Ok(None),
    }
}

/// Result of a completed command.
#[derive(Debug)]
pub struct Outcome {
    pub csv: String,
    pub status: CheckStatus,
    /// The CSV went to `--out` rather than standard output.
    pub written: bool,
}

/// Runs a parsed command, writing the CSV to `--out` when given.
pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    let (name, common, check) = match command {
        Command::BoundsTable(c) => (Some("bounds-table"), c, None),
        Command::Verify { check, common } => (Some("verify"), common, check.clone()),
        Command::Lowerbound(c) => (Some("lowerbound"), c, None),
        Command::Gap(c) => (Some("gap"), c, None),
        Command::Run(c) => (None, c, None),
    };
    let mut cfg = effective_config(name, common)?;
    if let Some(check) = check {
        cfg.params.insert("check".into(), check);
    }
    let threads = thread_count(common)?;
    let run = || commands::dispatch(&cfg);
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
    .map(|(table, status)| Outcome {
        csv: table.render(),
        status,
        written: false,
    })
    .and_then(|o| {
        if let Some(path) = &cfg.out {
            std::fs::write(path, &o.csv).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
        }
        Ok(Outcome {
            written: cfg.out.is_some(),
            ..o
        })
    })
}

/// Full entry point: parses arguments, runs, and maps to an exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(o) => {
            if !o.written {
                let _ = std::io::stdout().write_all(o.csv.as_bytes());
            }
            match o.status {
            CheckStatus::Pass => EXIT_PASS,
            CheckStatus::Fail => EXIT_FAIL,
                CheckStatus::Inconclusive => EXIT_INCONCLUSIVE,
            }
        }
        Err(e) => {
            eprintln!("mbl: {e}");
            e.exit_code()
        }
    }
}
