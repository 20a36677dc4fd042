//! `sierpinski`: build gaskets, verify invariants, compute λ*, solve,
//! sweep and compute spectra.
//!
//! Exit codes: 0 success, 1 failed checks or non-convergence, 2 invalid
//! configuration, 3 resource cap.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Settings;

#[derive(Parser)]
#[command(name = "sierpinski", version, about = "Variational toolkit for the Sierpinski gasket")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build V_m and print its counts
    Build(Settings),
    /// Run the seeded invariant suites
    Verify(Settings),
    /// Compute the solvability threshold λ*
    LambdaStar(Settings),
    /// Solve the Dirichlet problem at one λ
    Solve(Settings),
    /// Solve along an ascending λ grid
    Sweep(Settings),
    /// Weighted Dirichlet eigenvalues
    Eigen(Settings),
}

#[derive(Debug)]
pub enum Failure {
    Checks(String),
    Config(String),
    Resource(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Checks(_) | Failure::Numeric(_) => 1,
            Failure::Config(_) => 2,
            Failure::Resource(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Checks(m) | Failure::Config(m) | Failure::Resource(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<sierpinski::Error> for Failure {
    fn from(e: sierpinski::Error) -> Self {
        use sierpinski::Error as E;
        let text = e.to_string();
        match e {
            E::ResourceLimit { .. } => Failure::Resource(text),
            E::Linalg(_) | E::NoConvergence(_) => Failure::Numeric(text),
            E::InvalidParameter(_)
            | E::DimensionMismatch { .. }
            | E::UnknownCell(_)
            | E::Hypothesis(..)
            | E::Expr(_) => Failure::Config(text),
        }
    }
}

impl From<sierpinski::exprs::ExprError> for Failure {
    fn from(e: sierpinski::exprs::ExprError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let (settings, action): (Settings, fn(&Settings) -> Result<(), Failure>) = match command {
        Command::Build(s) => (s, commands::build),
        Command::Verify(s) => (s, commands::verify),
        Command::LambdaStar(s) => (s, commands::lambda_star_cmd),
        Command::Solve(s) => (s, commands::solve_cmd),
        Command::Sweep(s) => (s, commands::sweep_cmd),
        Command::Eigen(s) => (s, commands::eigen),
    };
    let settings = match settings.config.clone() {
        Some(path) => settings.merge_under(Settings::load(&path).map_err(Failure::Config)?),
        None => settings,
    };
    action(&settings.resolved())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
