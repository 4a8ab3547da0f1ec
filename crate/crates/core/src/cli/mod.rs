//! Command-line front end.
//!
//! Exit codes: 0 success, 1 hypothesis or audit failure, 2 configuration
//! error, 3 solver non-convergence.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
use crate::io::{json_document, write_file};
pub use commands::Outcome;
pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "yamabe", version, about = "Radial Yamabe-problem laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the environment and the configuration).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for the solver's initial perturbation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress the report on standard output.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Minimize the weighted quotient once.
    Q,
    /// Bottom of its spectrum with an r_max sweep.
    Mu,
    /// Existence verdict and continuation trace.
    Continue,
    /// Yamabe constant at infinity from exterior domains.
    Qinf,
    /// Run the audit matrix.
    Audit,
    /// Aubin-Talenti bubble quotient over a scale sweep.
    Bubble,
    /// List model labels.
    Models,
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NONCONVERGENCE: u8 = 3;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        Error::Precondition(_) | Error::NotPositiveDefinite { .. } => EXIT_FAILED,
        Error::Argument(_)
        | Error::Domain(_)
        | Error::Config(_)
        | Error::Assembly { .. }
        | Error::Dimension { .. }
        | Error::Io(_) => EXIT_CONFIG,
    }
}

fn execute(cli: &Cli) -> Result<(Outcome, Option<PathBuf>), Error> {
    if cli.command == Command::Models {
        return Ok((commands::cmd_models(), None));
    }
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None if cli.command == Command::Audit => RunConfig::default(),
        None => return Err(Error::Config("--config is required for this command".into())),
    }
    .with_seed(cli.seed);
    let outcome = match cli.command {
        Command::Q => commands::cmd_q(&cfg)?,
        Command::Mu => commands::cmd_mu(&cfg)?,
        Command::Continue => commands::cmd_continue(&cfg)?,
        Command::Qinf => commands::cmd_qinf(&cfg)?,
        Command::Audit => commands::cmd_audit(&cfg)?,
        Command::Bubble => commands::cmd_bubble(&cfg)?,
        Command::Models => unreachable!(),
    };
    let dir = cfg.out_dir(cli.out.as_deref());
    if let Some(s) = &outcome.summary {
        write_file(&dir.join("summary.json"), &json_document(s)?)?;
    }
    if let Some(t) = &outcome.trace_csv {
        write_file(&dir.join("trace.csv"), t)?;
    }
    if let (Some(f), true) = (&outcome.field_csv, cfg.output.field_csv) {
        write_file(&dir.join("field.csv"), f)?;
    }
    Ok((outcome, Some(dir)))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, S>(args: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok((outcome, _)) => {
            if !cli.quiet {
                print!("{}", outcome.report);
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
