//! Runs a space convergence study and prints the error table with orders.
//!
//! ```sh
//! cargo run --release --example space_convergence -- [grid] [scheme] [levels]
//! cargo run --release --example space_convergence -- shifted nonlinear_fct 1..5
//! ```

use femfct::study::{run_space_study, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ExperimentConfig::default();
    let args: Vec<String> = std::env::args().skip(1).collect();
    for (key, value) in ["grid", "scheme", "levels"].iter().zip(&args) {
        config.set(key, value)?;
    }
    if args.is_empty() {
        config.set("levels", "1..4")?;
    }

    let outcome = run_space_study(&config)?;
    println!("{:>5} {:>9} {:>11} {:>6} {:>11} {:>6} {:>11} {:>6} {:>11} {:>6}", "level", "h", "L2(L2)", "eoc", "L2(H1)", "eoc", "L2(fct)", "eoc", "L2(dh)", "eoc");
    for row in &outcome.rows {
        print!("{:>5} {:>9.3e}", row.level, row.h);
        for (err, order) in row.errors().iter().zip(row.eoc) {
            print!(" {err:>11.4e} {:>6}", order.map_or(String::new(), |o| format!("{o:.2}")));
        }
        println!();
    }
    for (run, reason) in &outcome.failures {
        eprintln!("{run} failed: {reason}");
    }
    if let Some(k) = outcome.max_iterations {
        println!("at most {k} fixed-point solves per step");
    }
    Ok(())
}
