//! Builds the three mesh families and prints size, mesh width and the worst
//! Delaunay angle sum per level.
//!
//! ```sh
//! cargo run --example mesh_families -- [out.mesh]
//! ```

use std::f64::consts::PI;
use std::path::PathBuf;

use femfct::study::GridKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundled = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/grid2_level0.mesh");
    let grids = [
        ("friedrichs-keller", GridKind::FriedrichsKeller),
        ("shifted", GridKind::Shifted),
        ("unstructured", GridKind::Unstructured(bundled)),
    ];
    println!("{:<18} {:>5} {:>7} {:>9} {:>10} {:>14}", "grid", "level", "nodes", "triangles", "h", "max angle sum");
    for (name, grid) in &grids {
        for level in 0..=4 {
            let mesh = grid.mesh(level)?;
            let worst = mesh.opposite_angle_sums().into_iter().map(|(_, s)| s).fold(0.0, f64::max);
            println!(
                "{name:<18} {level:>5} {:>7} {:>9} {:>10.4e} {:>11.4} pi{}",
                mesh.num_nodes(),
                mesh.num_triangles(),
                mesh.h(),
                worst / PI,
                if worst > PI + 1e-12 { "  (not Delaunay)" } else { "" }
            );
        }
    }

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, grids[1].1.mesh(1)?.to_text())?;
        println!("wrote shifted level 1 to {path}");
    }
    Ok(())
}
