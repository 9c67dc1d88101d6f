//! Applies the Zalesak limiter to the fluxes of one nonlinear step for a
//! step profile and prints the nodal factors along the middle row.

use femfct::assembly::{assemble_mass, assemble_stiffness};
use femfct::fct::{artificial_diffusion, correction_vector, lump, prelimit, raw_fluxes, zalesak_factors};
use femfct::{ProblemSpec, TriMesh};

fn main() {
    let mesh = TriMesh::friedrichs_keller(2);
    let spec = ProblemSpec::constant(1e-8, [1.0, 0.0], 0.0, 1.0, 0.01);
    let mass = assemble_mass(&mesh);
    let ml = lump(&mass).expect("positive lumped mass");
    let d = artificial_diffusion(&assemble_stiffness(&mesh, &spec, 0.0));

    // a ramp of width 2h moved half a cell to the right
    let ramp = |x: f64, x0: f64| ((x0 - x) / 0.25 + 0.5).clamp(0.0, 1.0);
    let u_prev: Vec<f64> = mesh.nodes().iter().map(|p| ramp(p.x, 0.4)).collect();
    let u_new: Vec<f64> = mesh.nodes().iter().map(|p| ramp(p.x, 0.4625)).collect();

    let raw = raw_fluxes(&mass, &d, &u_new, &u_prev, spec.tau);
    let fluxes = prelimit(&raw, &u_new);
    let z = zalesak_factors(&fluxes, &u_new, &ml);
    let alpha = z.limiter(&fluxes);
    let fstar = correction_vector(&alpha, &fluxes);

    println!("{:>6} {:>6} {:>10} {:>10} {:>10} {:>10} {:>6} {:>6} {:>10}", "x", "u", "P+", "P-", "Q+", "Q-", "R+", "R-", "f*");
    for (i, p) in mesh.nodes().iter().enumerate().filter(|(_, p)| (p.y - 0.5).abs() < 1e-12) {
        println!(
            "{:>6.3} {:>6.2} {:>10.2e} {:>10.2e} {:>10.2e} {:>10.2e} {:>6.3} {:>6.3} {:>10.2e}",
            p.x, u_new[i], z.p_plus[i], z.p_minus[i], z.q_plus[i], z.q_minus[i], z.r_plus[i] + 0.0, z.r_minus[i] + 0.0, fstar[i]
        );
    }
    let cancelled = raw.values().iter().zip(fluxes.values()).filter(|(r, f)| **r != 0.0 && **f == 0.0).count() / 2;
    println!("prelimiting cancelled {cancelled} of {} pairs", mesh.edges().len());
    println!("sum of corrections: {:.2e}", fstar.iter().sum::<f64>());
}
