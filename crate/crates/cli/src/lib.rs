//! Command-line front end: simulations, ablations, warm starts, the session
//! server and reports over run directories.

mod ablate;
mod error;
mod output;
mod report;
mod scenario;
mod serve;
mod simulate;
mod warmstart;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::CliError;
pub use report::{summarize_csv, wilson_interval, ContextSummary, RunSummary};
pub use scenario::ScenarioArg;

#[derive(Debug, Parser)]
#[command(name = "ardent", version, about = "Adaptive explanation ordering for human decision support")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one arm against a synthetic human and write per-episode metrics.
    Simulate(simulate::SimulateArgs),
    /// Sweep α or the particle count, or compare convergence against random.
    Ablate(ablate::AblateArgs),
    /// Fit an initial particle set to logged interactions by MCMC.
    Warmstart(warmstart::WarmstartArgs),
    /// Serve a task bundle over HTTP.
    Serve(serve::ServeArgs),
    /// Summarize run directories or metric CSVs.
    Report(report::ReportArgs),
}

/// Options shared by every command that builds a particle filter.
#[derive(Clone, Debug, Args)]
pub struct FilterArgs {
    /// Number of particles.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub particles: u64,
    /// Shrinkage factor, strictly between 0 and 1.
    #[arg(long, default_value_t = 0.98, value_parser = parse_alpha)]
    pub alpha: f64,
}

impl FilterArgs {
    pub fn config(&self) -> ardent_core::FilterConfig {
        ardent_core::FilterConfig {
            n_particles: self.particles as usize,
            alpha: self.alpha,
            ..Default::default()
        }
    }
}

/// Where runs are written.
#[derive(Clone, Debug, Args)]
pub struct OutArgs {
    /// Parent directory for run directories.
    #[arg(long, env = "ARDENT_OUT", default_value = "runs")]
    pub out: PathBuf,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(format!("alpha must lie strictly between 0 and 1, got {a}"))
    }
}

/// Runs a parsed command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Ablate(a) => ablate::run(a),
        Command::Warmstart(a) => warmstart::run(a),
        Command::Serve(a) => serve::run(a),
        Command::Report(a) => report::run(a),
    }
}
