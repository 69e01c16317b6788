//! `neurotraj` command-line driver.
//!
//! Every command that produces files writes them into
//! `<out>/<command>-<hash>/`, where the hash covers the resolved
//! configuration and the contents of the inputs, and prints that directory
//! on stdout. Exit codes: 0 success, 1 usage or configuration error, 2 data
//! error.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Overrides, RunConfig, Selection};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<neurotraj::Error> for CliError {
    fn from(e: neurotraj::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "neurotraj", version, about = "Neuroevolutionary trajectory learning workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Parent directory of the run directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate episodes and write a dataset.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Evolve a population of networks on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        population: Option<usize>,
    },
    /// Score one archived network on a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        /// Training run directory, its `checkpoints/` directory or one checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        select: Option<Selection>,
    },
    /// Score the dynamic-window baseline on a dataset.
    Dwa {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Merge error reports into one comparison table.
    Compare {
        #[arg(long)]
        out: PathBuf,
        /// `report.json` files written by `eval` or `dwa`.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Print archive objective points and the hypervolume series.
    InspectFront {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn configure_threads() {
    if let Some(n) = std::env::var("NTRJ_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // Fails if a pool already exists (repeated in-process calls); the
        // first setting stays in effect.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    configure_threads();
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(common: &Common, ov: Overrides) -> Result<RunConfig, CliError> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    RunConfig::resolve(&text, &Overrides { seed: common.seed, ..ov })
}

fn dispatch(cmd: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    let run_dir = match cmd {
        Command::GenData { common, episodes } => {
            let cfg = load_config(&common, Overrides { episodes, ..Default::default() })?;
            commands::gen_data(&cfg, &common.out)?
        }
        Command::Train {
            common,
            dataset,
            generations,
            population,
        } => {
            let ov = Overrides {
                generations,
                population,
                ..Default::default()
            };
            let cfg = load_config(&common, ov)?;
            commands::train(&cfg, &dataset, &common.out)?
        }
        Command::Eval {
            common,
            dataset,
            checkpoint,
            select,
        } => {
            let cfg = load_config(&common, Overrides { select, ..Default::default() })?;
            commands::eval(&cfg, &dataset, &checkpoint, &common.out)?
        }
        Command::Dwa { common, dataset } => {
            let cfg = load_config(&common, Overrides::default())?;
            commands::dwa(&cfg, &dataset, &common.out)?
        }
        Command::Compare { out, reports } => commands::compare(&reports, &out)?,
        Command::InspectFront { checkpoint } => {
            commands::inspect_front(&checkpoint, stdout)?;
            return Ok(());
        }
    };
    writeln!(stdout, "{}", run_dir.display())?;
    Ok(())
}
