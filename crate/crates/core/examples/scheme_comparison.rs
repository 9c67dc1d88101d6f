//! Transports a discontinuous cylinder with all four schemes and reports
//! undershoots, overshoots and fixed-point statistics. A small reaction
//! keeps the problem coercive.
//!
//! ```sh
//! cargo run --release --example scheme_comparison -- [level]
//! ```

use femfct::{Limiter, ProblemSpec, SchemeKind, Stepper, StepperOptions, TriMesh};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let level = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4);
    let mesh = TriMesh::friedrichs_keller(level);
    let tau = 1e-3;
    let steps = 200;
    let spec = ProblemSpec::constant(1e-8, [1.0, 1.0], 1e-2, steps as f64 * tau, tau)
        .with_initial(|x, y| if (x - 0.3).hypot(y - 0.3) < 0.15 { 1.0 } else { 0.0 });

    println!("level {level}, h = {:.4}, {steps} steps of {tau}", mesh.h());
    println!("{:<22} {:>11} {:>11} {:>12} {:>8}", "scheme", "min u", "max u - 1", "sum m_i u_i", "solves");
    for (name, kind) in [
        ("galerkin", SchemeKind::galerkin()),
        ("low order", SchemeKind::low_order()),
        ("linear fct", SchemeKind::linear_fct(Limiter::Zalesak)),
        ("nonlinear fct", SchemeKind::nonlinear_fct(Limiter::Zalesak)),
        ("nonlinear fct a=0.5", SchemeKind::nonlinear_fct(Limiter::InteriorConstant(0.5))),
    ] {
        let mut stepper = Stepper::new(&mesh, &spec, kind, StepperOptions::default())?;
        let (mut lo, mut hi, mut solves) = (f64::INFINITY, f64::NEG_INFINITY, 0);
        let last = stepper.run_with(steps, |r| {
            lo = r.u.iter().copied().fold(lo, f64::min);
            hi = r.u.iter().copied().fold(hi, f64::max);
            solves += r.fixed_point_iters.unwrap_or(0);
        })?;
        let mass: f64 = last.u.iter().zip(stepper.operators().lumped.as_slice()).map(|(u, m)| u * m).sum();
        println!("{name:<22} {lo:>11.3e} {:>11.3e} {mass:>12.5} {solves:>8}", hi - 1.0);
    }
    Ok(())
}
