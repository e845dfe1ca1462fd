//! `toric`: validation, balancing, refinement, field export and geodesics.
//!
//! Exit codes: 0 success, 1 runtime error, 2 validation failure, 3 configuration error, 4 divergence.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use toric_core::Error;

use commands::{GeodesicArgs, Status};
use config::RunArgs;

#[derive(Parser)]
#[command(name = "toric", version, about = "Numerical extremal metrics on toric surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quadrature and exact-model checks.
    Validate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Iterate to the balanced metric.
    Balance {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Balance, then refine towards the extremal metric.
    Refine {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Curvature fields on a uniform grid over the polygon.
    Report {
        #[command(flatten)]
        run: RunArgs,
        /// Coefficient CSV; defaults to <out>/coefficients.csv.
        #[arg(long)]
        coeffs: Option<PathBuf>,
        /// Grid spacing; defaults to k/40.
        #[arg(long)]
        spacing: Option<f64>,
        #[arg(long)]
        no_bach: bool,
    },
    /// Refine at several k and tabulate the L² error.
    Convergence {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required = true)]
        ks: Vec<i64>,
    },
    /// Integrate a geodesic with fixed angular momenta.
    Geodesic {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        coeffs: Option<PathBuf>,
        /// Starting point in the polygon.
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required = true)]
        x0: Vec<f64>,
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',', default_value = "1,0")]
        p0: Vec<f64>,
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',', default_value = "0,0")]
        j: Vec<f64>,
        #[arg(long, default_value_t = toric_core::geodesics::DEFAULT_DT)]
        dt: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 10)]
        every: usize,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        // a correction pushed past 1 + ε > 0 is the same runaway caught one step earlier
        Error::Diverged { .. } | Error::InvalidCorrection { .. } => 4,
        Error::Config(_)
        | Error::UnknownPreset(_)
        | Error::TooFewVertices(_)
        | Error::NotConvex { .. }
        | Error::NotCounterclockwise
        | Error::NotDelzant { .. }
        | Error::ExceedsBoundingSquare { .. }
        | Error::CoefficientMismatch(_)
        | Error::Io(_)
        | Error::Json(_) => 3,
        _ => 1,
    }
}

fn pair(name: &str, v: &[f64]) -> Result<[f64; 2], Error> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(Error::Config(format!("--{name} takes two comma-separated values"))),
    }
}

fn run(cmd: Command) -> Result<Status, Error> {
    let run_args = match &cmd {
        Command::Validate { run }
        | Command::Balance { run }
        | Command::Refine { run }
        | Command::Report { run, .. }
        | Command::Convergence { run, .. }
        | Command::Geodesic { run, .. } => run,
    };
    let cfg = run_args.resolve()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cmd {
        Command::Validate { .. } => commands::validate(&cfg),
        Command::Balance { .. } => commands::cmd_balance(&cfg),
        Command::Refine { .. } => commands::cmd_refine(&cfg),
        Command::Report { coeffs, spacing, no_bach, .. } => {
            let path = commands::default_coeffs_path(&cfg, coeffs.as_deref());
            commands::cmd_report(&cfg, &path, *spacing, !no_bach)
        }
        Command::Convergence { ks, .. } => {
            let (status, err) = commands::cmd_convergence(&cfg, ks)?;
            match err {
                Some(e) => Err(e),
                None => Ok(status),
            }
        }
        Command::Geodesic { coeffs, x0, p0, j, dt, steps, every, .. } => {
            let g = GeodesicArgs {
                x0: pair("x0", x0)?,
                p0: pair("p0", p0)?,
                j: pair("j", j)?,
                dt: *dt,
                steps: *steps,
                every: *every,
            };
            commands::cmd_geodesic(&cfg, coeffs.as_deref(), &g)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::ValidationFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
