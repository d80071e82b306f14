//! Command-line driver: configured optimization runs and comparisons of
//! repeated runs.

pub mod compare;
pub mod config;
pub mod run;

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::{CboSettings, Manifest, Method, RunConfig, ScenarioId, CSV_SCHEMA};
pub use run::{execute, execute_repeats, run_dir, Summary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("runs are not comparable: {0}")]
    Mismatch(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] contactopt::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Exit status for a finished run.
pub const EXIT_OK: i32 = 0;
/// Usage, configuration or I/O error.
pub const EXIT_USAGE: i32 = 1;
/// The optimizer stopped without convergence or without a feasible sample.
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "contactopt", version, about = "Pressure-constrained contact design optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the optimization described by a TOML or JSON config (or manifest).
    Run {
        config: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Runs this many copies with consecutive seeds.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Run directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Root for run directories.
        #[arg(long, env = "CONTACTOPT_OUT", hide_env_values = true)]
        out_root: Option<PathBuf>,
    },
    /// Mean and spread of final designs across runs.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Run whose design is the reference for relative errors.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Writes the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run_command(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Run { config, seed, repeats, out, out_root } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if repeats == 0 {
                return Err(CliError::Usage("--repeats must be at least 1".into()));
            }
            let dir = run_dir(&cfg, out.as_deref(), out_root.as_deref());
            let sums = execute_repeats(&cfg, &dir, repeats)?;
            for s in &sums {
                println!(
                    "{} {} seed {}: {} objective {:.6e} rho {:?}",
                    s.scenario, s.method, s.seed, s.status, s.objective, s.rho
                );
            }
            println!("outputs in {}", dir.display());
            Ok(if sums.iter().all(|s| s.success) { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Compare { dirs, reference, out } => {
            let mut runs = Vec::new();
            for d in &dirs {
                for r in compare::collect_runs(d)? {
                    runs.push(Summary::load(&r)?);
                }
            }
            let rf = reference.as_deref().map(Summary::load).transpose()?;
            let c = compare::compare(&runs, rf.as_ref())?;
            match out {
                Some(p) => c.write_csv(BufWriter::new(
                    File::create(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
                ))?,
                None => c.write_csv(std::io::stdout().lock())?,
            }
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run_command(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Core(
                    contactopt::Error::Invalid(_) | contactopt::Error::Domain { .. } | contactopt::Error::Dimension(_),
                ) => EXIT_USAGE,
                CliError::Core(_) => EXIT_NOT_CONVERGED,
                _ => EXIT_USAGE,
            }
        }
    }
}
