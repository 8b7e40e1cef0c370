//! Command-line front end for dpwkit: forward and backward DPW pipelines,
//! base-point transports, compact dual frames and the verification suite.

pub mod commands;
pub mod config;
pub mod dump;
pub mod error;
pub mod moves;
pub mod suite;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::{CliError, EXIT_INPUT, EXIT_OK, EXIT_VERIFICATION};

#[derive(Debug, Parser)]
#[command(name = "dpwkit", version, about = "Loop-group numerics for harmonic maps")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed of the random instances (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated angles t of λ = e^{iπt}.
    #[arg(long = "lambda-samples", global = true)]
    pub lambda_samples: Option<String>,
    /// Grid as x_min,x_max,y_min,y_max,nx,ny.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Potential file → extended frames, associated family, flatness report.
    Forward { potential: PathBuf },
    /// Frame dump manifest → normalized potential.
    Backward { frames: PathBuf },
    /// Frame dump manifest + move file → transported frames and audit.
    Transport { frames: PathBuf, r#move: PathBuf },
    /// Frame dump manifest + dressing move → compact dual frames and W₊.
    Dual { frames: PathBuf, r#move: PathBuf },
    /// Runs the invariant suite.
    Verify,
}

pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_json_str(&dump::read_text(path)?).map_err(|e| e.in_file(path))?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(s) = &cli.lambda_samples {
        cfg.lambda_samples = config::parse_lambda_samples(s)?;
    }
    if let Some(g) = &cli.grid {
        cfg.grid = config::parse_grid(g)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<commands::Outcome, CliError> {
    let cfg = load_config(cli)?;
    let dir = cfg.output_dir.clone();
    match &cli.command {
        Command::Forward { potential } => commands::forward(&cfg, potential, &dir),
        Command::Backward { frames } => commands::backward(&cfg, frames, &dir),
        Command::Transport { frames, r#move } => commands::transport(&cfg, frames, r#move, &dir),
        Command::Dual { frames, r#move } => commands::dual(&cfg, frames, r#move, &dir),
        Command::Verify => commands::verify(&cfg, &dir),
    }
}

/// Parses arguments, runs the command and returns the exit code. The
/// outcome JSON goes to stdout, error JSON to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                print!("{e}");
                return EXIT_OK;
            }
            let err = CliError {
                kind: "usage".into(),
                message: e.to_string().trim().to_string(),
                location: None,
                residual: None,
                exit_code: EXIT_INPUT,
            };
            eprintln!("{}", err.to_json());
            return EXIT_INPUT;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            if let Some(t) = &outcome.table {
                print!("{t}");
            }
            println!("{}", serde_json::to_string(&outcome).expect("serializable outcome"));
            if outcome.passed() {
                EXIT_OK
            } else {
                EXIT_VERIFICATION
            }
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code
        }
    }
}
