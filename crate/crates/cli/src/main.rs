mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ctraj", version, about = "Complex trajectories and extended densities of oscillator eigenstates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Orbits as CSV blocks (t, X_r, X_i, invariant level).
    Trace(TraceArgs),
    /// A density on a rectangular grid of the complex plane.
    Density(DensityArgs),
    /// Line-integral Born density against the closed form on the real axis.
    Born(BornArgs),
    /// Share of the combined density's mass inside the separatrix.
    Fraction(Common),
    /// Largest X_i on the separatrix.
    Width(Common),
    /// Separatrix width, optionally in metres.
    Classical(ClassicalArgs),
    /// Runs the property suite and judges it from the written report file.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Oscillator level.
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Relative integrator tolerance; the absolute tolerance is 1% of it.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomly sampled test points.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated invariant values, or `separatrix`.
    #[arg(long, allow_hyphen_values = true)]
    levels: Option<String>,
    /// Start point `X_r,X_i`; may be repeated.
    #[arg(long, allow_hyphen_values = true)]
    start: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridMethod {
    Conserved,
    Wyatt,
    Combined,
    Source,
}

#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "combined")]
    method: GridMethod,
    /// `xr0:xr1:count,xi0:xi1:count`, end points included.
    #[arg(long, allow_hyphen_values = true, default_value = "-2:2:81,-1:1:41")]
    grid: String,
}

#[derive(Debug, Clone, Args)]
pub struct BornArgs {
    #[command(flatten)]
    common: Common,
    /// `x0:x1:count` along the real axis.
    #[arg(long, allow_hyphen_values = true, default_value = "-4:4:801")]
    grid: String,
}

#[derive(Debug, Clone, Args)]
pub struct ClassicalArgs {
    #[command(flatten)]
    common: Common,
    /// Report the width in metres.
    #[arg(long)]
    si: bool,
    /// Mass in kg.
    #[arg(long, requires = "si", default_value_t = 1.0)]
    mass: f64,
    /// Angular frequency in rad/s.
    #[arg(long, requires = "si", default_value_t = 1.0)]
    omega: f64,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Fewer sample points.
    #[arg(long)]
    quick: bool,
}

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Verification(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("i/o: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Trace(a) => commands::trace(&a),
        Command::Density(a) => commands::density(&a),
        Command::Born(a) => commands::born(&a),
        Command::Fraction(a) => commands::fraction(&a),
        Command::Width(a) => commands::width(&a),
        Command::Classical(a) => commands::classical(&a),
        Command::Verify(a) => commands::verify(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code())
        }
    }
}
