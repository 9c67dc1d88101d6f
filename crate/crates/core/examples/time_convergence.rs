//! Halves the time step on a fixed mesh and prints the temporal orders of
//! the L2(L2) error for an oscillating solution.
//!
//! ```sh
//! cargo run --release --example time_convergence -- [scheme] [level]
//! ```

use femfct::study::{run_time_study, ExperimentConfig, StudyKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut config = ExperimentConfig {
        study: StudyKind::Time,
        tau: 0.05,
        time_runs: 4,
        ..ExperimentConfig::default()
    };
    config.set("scheme", &args.next().unwrap_or_else(|| "galerkin".into()))?;
    config.set("levels", &args.next().unwrap_or_else(|| "5".into()))?;

    let outcome = run_time_study(&config)?;
    println!("{:>4} {:>10} {:>12} {:>6} {:>9}", "run", "tau", "L2(L2)", "eoc", "time [s]");
    for row in &outcome.rows {
        println!(
            "{:>4} {:>10.3e} {:>12.4e} {:>6} {:>9.2}",
            row.run,
            row.tau,
            row.err_l2l2,
            row.eoc_l2l2.map_or(String::new(), |o| format!("{o:.2}")),
            row.wall_time_s
        );
    }
    for (run, reason) in &outcome.failures {
        eprintln!("{run} failed: {reason}");
    }
    Ok(())
}
