//! Command-line driver for the convergence studies.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use femfct::study::{execute, ExperimentConfig};

/// Runs a space or time convergence study with the built-in manufactured
/// solution and writes the errors as CSV.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Plain-text `key=value` file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// fk, shifted or unstructured[:<path>]
    #[arg(long)]
    grid: Option<String>,
    /// Level-0 mesh for the unstructured grid.
    #[arg(long)]
    mesh_file: Option<String>,
    /// Level range `A..B`.
    #[arg(long)]
    levels: Option<String>,
    /// galerkin, low_order, linear_fct or nonlinear_fct
    #[arg(long)]
    scheme: Option<String>,
    /// zalesak, constant:<v> (interior pairs) or uniform:<v>
    #[arg(long)]
    limiter: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    t_end: Option<String>,
    /// space or time
    #[arg(long)]
    study: Option<String>,
    /// Output CSV; standard output if omitted.
    #[arg(long)]
    out: Option<String>,
    /// Number of halvings of tau in a time study.
    #[arg(long)]
    time_runs: Option<String>,
}

fn configure(args: Args) -> Result<ExperimentConfig, femfct::study::ConfigError> {
    let mut config = ExperimentConfig::default();
    if let Some(path) = &args.config {
        config.apply_file(path)?;
    }
    let flags = [
        ("grid", args.grid),
        ("mesh-file", args.mesh_file),
        ("levels", args.levels),
        ("scheme", args.scheme),
        ("limiter", args.limiter),
        ("eps", args.eps),
        ("tau", args.tau),
        ("t-end", args.t_end),
        ("study", args.study),
        ("out", args.out),
        ("time-runs", args.time_runs),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            config.set(key, &v)?;
        }
    }
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let config = match configure(Args::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match execute(&config) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
