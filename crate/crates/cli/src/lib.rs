//! Command-line front end: argument parsing, configuration merging and the
//! subcommand adapters.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub mod commands;
pub mod config;

pub use config::{CommandKind, Format, OperatorKind, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    /// Malformed or invalid input.
    #[error("{0}")]
    Input(String),
    /// Valid input the requested operation does not apply to.
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Domain(_) => "domain",
            CliError::Internal(_) => "internal",
        }
    }

    /// Machine-readable body written to stderr.
    pub fn to_json(&self) -> String {
        json!({"error": {"code": self.exit_code(), "kind": self.kind(), "message": self.to_string()}}).to_string()
    }
}

impl From<corrwitness::Error> for CliError {
    fn from(e: corrwitness::Error) -> Self {
        use corrwitness::Error as E;
        let message = e.to_string();
        match e {
            E::Uncorrelated
            | E::IdenticalStates
            | E::NotSaturable { .. }
            | E::SystemNotFactorized { .. }
            | E::MarginalMismatch { .. } => CliError::Domain(message),
            E::NoConvergence { .. } | E::Internal(_) | E::IllConditioned { .. } | E::PreparationMismatch { .. } => {
                CliError::Internal(message)
            }
            _ => CliError::Input(message),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "corrwitness", version, about = "Detect initial system-environment correlations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Build the witness unitary for a state and report the detection.
    Witness,
    /// Transfer the distinguishability of a pair onto the system when possible.
    Saturate,
    /// Evolve a pair under a time-independent Hamiltonian.
    Sweep,
    /// Undetectable correlations in the ZZ spin chain.
    ChainDemo,
    /// Correlations inside a bipartite environment.
    EnvCorr,
    /// Linear process tomography with correlated inputs.
    TomographyDemo,
    /// Check an operator file against its invariants.
    Validate,
}

impl From<Command> for CommandKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Witness => CommandKind::Witness,
            Command::Saturate => CommandKind::Saturate,
            Command::Sweep => CommandKind::Sweep,
            Command::ChainDemo => CommandKind::ChainDemo,
            Command::EnvCorr => CommandKind::EnvCorr,
            Command::TomographyDemo => CommandKind::TomographyDemo,
            Command::Validate => CommandKind::Validate,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// State (or operator) file.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Second state of a pair.
    #[arg(long, global = true)]
    pub sigma: Option<PathBuf>,
    #[arg(long, global = true)]
    pub hamiltonian: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long = "t-max", global = true, allow_negative_numbers = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long = "tol-det", global = true)]
    pub tol_det: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Factor dimensions for seeded random inputs, e.g. `2,3`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub spins: Option<usize>,
    /// First environment spin of the chain.
    #[arg(long = "env-start", global = true)]
    pub env_start: Option<usize>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub couplings: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub queries: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub kind: Option<OperatorKind>,
}

impl Options {
    fn into_config(self, command: Option<Command>) -> RunConfig {
        RunConfig {
            command: command.map(Into::into),
            input: self.input,
            sigma: self.sigma,
            hamiltonian: self.hamiltonian,
            seed: self.seed,
            t_max: self.t_max,
            steps: self.steps,
            out: self.out,
            tol_det: self.tol_det,
            format: self.format,
            dims: self.dims,
            spins: self.spins,
            env_start: self.env_start,
            trials: self.trials,
            couplings: self.couplings,
            queries: self.queries,
            kind: self.kind,
            tolerances: None,
        }
    }
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let file = match &cli.options.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    Ok(file.overridden_by(cli.options.into_config(cli.command)))
}

/// Parse arguments, run the command and collect its output.
pub fn execute<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Outcome {
                    code: EXIT_OK,
                    stdout: e.to_string(),
                    stderr: String::new(),
                };
            }
            let err = CliError::Input(e.to_string().trim().to_string());
            return Outcome {
                code: err.exit_code(),
                stdout: String::new(),
                stderr: err.to_json(),
            };
        }
    };
    match resolve(cli).and_then(|config| commands::run(&config)) {
        Ok(stdout) => Outcome {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        },
        Err(err) => Outcome {
            code: err.exit_code(),
            stdout: String::new(),
            stderr: err.to_json(),
        },
    }
}

/// Size the global thread pool from `CORRWITNESS_THREADS`.
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(value) = value else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("CORRWITNESS_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}
