//! Mesh families used by the convergence studies.

use std::f64::consts::PI;
use std::path::PathBuf;

use femfct::assembly::{assemble_mass, assemble_stiffness};
use femfct::fct::{artificial_diffusion, lump, m_matrix_check};
use femfct::study::{GridKind, Manufactured, TimeProfile};
use femfct::TriMesh;

fn unstructured() -> GridKind {
    GridKind::Unstructured(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/grid2_level0.mesh"))
}

#[test]
fn bundled_mesh_loads_and_refines() {
    let grid = unstructured();
    let coarse = grid.mesh(0).unwrap();
    assert_eq!((coarse.num_nodes(), coarse.num_triangles()), (27, 36));
    let mut prev = coarse;
    for level in 1..=3 {
        let fine = grid.mesh(level).unwrap();
        assert_eq!(fine.num_triangles(), 4 * prev.num_triangles());
        assert!((fine.total_area() - 1.0).abs() < 1e-12);
        assert!((prev.h() / fine.h() - 2.0).abs() < 1e-12);
        prev = fine;
    }
}

/// Only the coarse mesh is Delaunay: refining a triangle with an obtuse
/// angle `A` creates an interior edge whose opposite angles sum to `2A`.
#[test]
fn bundled_coarse_mesh_is_delaunay() {
    let mesh = unstructured().mesh(0).unwrap();
    for (edge, sum) in mesh.opposite_angle_sums() {
        assert!(sum <= PI + 1e-12, "{edge:?}: {sum}");
    }
}

#[test]
fn round_trip_through_text() {
    let mesh = TriMesh::shifted(2);
    let back = TriMesh::parse(&mesh.to_text()).unwrap();
    assert_eq!(back.triangles(), mesh.triangles());
    for (p, q) in back.nodes().iter().zip(mesh.nodes()) {
        assert!((p.x - q.x).abs() < 1e-15 && (p.y - q.y).abs() < 1e-15);
    }
}

#[test]
fn shifted_grid_breaks_delaunay() {
    let mesh = TriMesh::shifted(3);
    assert!(mesh.opposite_angle_sums().iter().any(|(_, s)| *s > PI + 1e-9));
}

#[test]
fn low_order_matrix_is_monotone_on_every_family() {
    let problem = Manufactured::new(1e-8, TimeProfile::Linear).spec(1.0, 1e-3);
    for grid in [GridKind::FriedrichsKeller, GridKind::Shifted, unstructured()] {
        for level in 0..=3 {
            let mesh = grid.mesh(level).unwrap();
            let ml = lump(&assemble_mass(&mesh)).unwrap();
            let a = assemble_stiffness(&mesh, &problem, 0.0);
            let abar = a.add_scaled(1.0, &artificial_diffusion(&a));
            let report = m_matrix_check(&ml, &abar, problem.tau);
            assert!(report.passed(), "{grid:?} level {level}: {:?}", report.violations);
        }
    }
}
