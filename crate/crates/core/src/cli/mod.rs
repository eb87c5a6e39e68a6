//! Command-line front end.
//!
//! Exit codes: 0 when every check passes, 2 for configuration and usage
//! errors, 3 for numerical failures and failed checks.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
pub use commands::{Envelope, Outcome, SolveOutput, VERSION};
pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "emden-glue", version = VERSION, about = "Singular Lane-Emden solutions by gluing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Singular radial profile: profile.csv, u1.csv, profile_report.json.
    Radial(ProblemArgs),
    /// Indicial roots of the first spherical modes.
    Indicial {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 4)]
        j_max: usize,
    },
    /// Leading singular coefficient a0 over a (p, E) grid.
    A0map(A0Args),
    /// Glued approximate solution and residual scaling in epsilon.
    Approx(ProblemArgs),
    /// Fixed-point solve: solution.csv, trace.csv, report.json.
    Solve(ProblemArgs),
    /// Re-check a solve from report.json and solution.csv.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Space dimension; overrides the config.
    #[arg(long = "N", required_unless_present = "config")]
    pub n: Option<usize>,
    /// Exponent; overrides the config.
    #[arg(long, required_unless_present = "config")]
    pub p: Option<f64>,
    /// Output directory; overrides the config and $EMDEN_GLUE_OUT.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct A0Args {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "N", required_unless_present = "config")]
    pub n: Option<usize>,
    /// `lo:hi:count`, endpoints included; defaults to five interior values.
    #[arg(long = "p-grid")]
    pub p_grid: Option<String>,
    /// Comma-separated E values.
    #[arg(long = "E-grid", default_value = "0,0.5,1,2,5,10,100")]
    pub e_grid: String,
    /// Spherical eigenvalue; defaults to N - 1.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// report.json written by `solve`.
    #[arg(long)]
    pub report: PathBuf,
    /// Field file; defaults to solution.csv next to the report.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load(config: &Option<PathBuf>, n: Option<usize>, p: Option<f64>, out: &Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::for_problem(n.unwrap_or(0), p.unwrap_or(f64::NAN)),
    };
    if let Some(n) = n {
        cfg.problem.n = n;
    }
    if let Some(p) = p {
        cfg.problem.p = p;
    }
    if let Some(o) = out {
        cfg.output.directory = Some(o.clone());
    }
    Ok(cfg)
}

fn problem(args: &ProblemArgs) -> Result<RunConfig> {
    load(&args.config, args.n, args.p, &args.out)
}

/// Parses `lo:hi:count` into `count` evenly spaced values.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Config(format!("cannot parse range {text:?}, expected lo:hi:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    match count {
        0 => Err(bad()),
        1 => Ok(vec![lo]),
        _ => Ok((0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()),
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("cannot parse {s:?} as a number"))))
        .collect()
}

/// Runs one parsed command.
pub fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Radial(a) => commands::radial(&problem(&a)?),
        Command::Indicial { problem: a, j_max } => commands::indicial(&problem(&a)?, j_max),
        Command::A0map(a) => {
            let cfg = load(&a.config, a.n, None, &a.out)?;
            let n = cfg.problem.n;
            if n < 3 {
                return Err(Error::DimensionTooSmall(n));
            }
            let p_grid = match &a.p_grid {
                Some(g) => parse_range(g)?,
                None => {
                    let (lo, hi) = crate::params::ProblemParams::p_range(n);
                    (1..=5).map(|k| lo + (hi - lo) * k as f64 / 6.0).collect()
                }
            };
            let e_grid = parse_list(&a.e_grid)?;
            commands::a0map(&cfg, a.lambda.unwrap_or(n as f64 - 1.0), &p_grid, &e_grid)
        }
        Command::Approx(a) => commands::approx(&problem(&a)?),
        Command::Solve(a) => commands::solve(&problem(&a)?),
        Command::Verify(a) => commands::verify(&a.report, a.solution.as_deref(), a.out.as_deref()),
    }
}

/// Parses arguments, runs, prints a summary and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(outcome) => {
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            if outcome.passed {
                EXIT_OK
            } else {
                eprintln!("failed checks: {}", outcome.failed_checks.join(", "));
                EXIT_NUMERICAL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}
