//! Checks the M-matrix conditions of the low-order system on all grids for a
//! range of diffusion coefficients and prints the Galerkin matrix's positive
//! off-diagonal count for contrast.

use std::path::PathBuf;

use femfct::assembly::{assemble_mass, assemble_stiffness};
use femfct::fct::{artificial_diffusion, lump, m_matrix_check};
use femfct::study::GridKind;
use femfct::ProblemSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundled = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/grid2_level0.mesh");
    let tau = 1e-3;
    println!("{:<14} {:>5} {:>8} {:>12} {:>10} {:>8}", "grid", "level", "eps", "galerkin a>0", "low-order", "strict");
    for (name, grid) in [("fk", GridKind::FriedrichsKeller), ("shifted", GridKind::Shifted), ("unstructured", GridKind::Unstructured(bundled))] {
        for level in [1, 3] {
            let mesh = grid.mesh(level)?;
            let ml = lump(&assemble_mass(&mesh))?;
            for eps in [1.0, 1e-3, 1e-8] {
                let spec = ProblemSpec::constant(eps, [2.0, 3.0], 1.0, 1.0, tau);
                let a = assemble_stiffness(&mesh, &spec, 0.0);
                let positive = (0..a.n()).flat_map(|i| a.row(i).filter(move |&(j, v)| j != i && v > 0.0)).count();
                let report = m_matrix_check(&ml, &a.add_scaled(1.0, &artificial_diffusion(&a)), tau);
                println!(
                    "{name:<14} {level:>5} {eps:>8.0e} {positive:>12} {:>10} {:>8}",
                    if report.passed() { "ok" } else { "violated" },
                    report.strictly_dominant_rows
                );
            }
        }
    }
    Ok(())
}
