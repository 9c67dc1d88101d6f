//! Properties of the FCT norm and the `d_h` seminorm on random vectors.

use femfct::assembly::assemble_stiffness;
use femfct::error_norms::{dh_edge_formulation, dh_form, dh_seminorm, fct_norm, fct_norm_parts};
use femfct::fct::{artificial_diffusion, LimiterMatrix};
use femfct::{ProblemSpec, SparseMatrix, TriMesh};
use proptest::prelude::*;

fn mesh(level: u32, shifted: bool) -> TriMesh {
    if shifted {
        TriMesh::shifted(level)
    } else {
        TriMesh::friedrichs_keller(level)
    }
}

fn diffusion(mesh: &TriMesh, b: [f64; 2]) -> SparseMatrix {
    artificial_diffusion(&assemble_stiffness(mesh, &ProblemSpec::constant(1e-8, b, 1.0, 1.0, 1e-3), 0.0))
}

prop_compose! {
    fn instance()(level in 0u32..=2, shifted in any::<bool>(), bx in -4.0..4.0f64, by in -4.0..4.0f64)
        (e in prop::collection::vec(-1.0..1.0f64, mesh(level, shifted).num_nodes()),
         a in prop::collection::vec(0.0..=1.0f64, 200),
         level in Just(level), shifted in Just(shifted), b in Just([bx, by]))
        -> (TriMesh, SparseMatrix, LimiterMatrix, Vec<f64>)
    {
        let m = mesh(level, shifted);
        let d = diffusion(&m, b);
        let mut idx = 0;
        let alpha = LimiterMatrix::from_pairs(d.pattern().clone(), |_, _, _| {
            idx += 1;
            a[idx % a.len()]
        });
        (m, d, alpha, e)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_identity((m, d, alpha, e) in instance(), eps in 0.0..1.0f64, c0 in 0.01..2.0f64) {
        let p = fct_norm_parts(&m, &e, &alpha, &d);
        let norm = fct_norm(&m, &e, &alpha, &d, eps, c0);
        prop_assert!(close(norm * norm, eps * p.h1 * p.h1 + c0 * p.l2 * p.l2 + p.dh * p.dh));
    }

    #[test]
    fn homogeneity((m, d, alpha, e) in instance(), s in prop::sample::select(vec![-2.0, 0.5])) {
        let scaled: Vec<f64> = e.iter().map(|v| s * v).collect();
        prop_assert!(close(dh_seminorm(&alpha, &d, &scaled), s.abs() * dh_seminorm(&alpha, &d, &e)));
        let (n1, n2) = (fct_norm(&m, &scaled, &alpha, &d, 0.3, 1.0), fct_norm(&m, &e, &alpha, &d, 0.3, 1.0));
        prop_assert!(close(n1, s.abs() * n2));
    }

    #[test]
    fn dh_is_monotone_in_alpha((m, d, alpha, e) in instance(), raise in 0.0..1.0f64) {
        let _ = m;
        let raised = LimiterMatrix::from_pairs(alpha.pattern().clone(), |_, _, k| {
            let a = alpha.values()[k];
            a + raise * (1.0 - a)
        });
        prop_assert!(dh_seminorm(&raised, &d, &e) <= dh_seminorm(&alpha, &d, &e) * (1.0 + 1e-14));
    }

    #[test]
    fn nodal_and_edge_forms_agree((m, d, alpha, e) in instance()) {
        prop_assert!(close(dh_form(&alpha, &d, &e), dh_edge_formulation(&m, &alpha, &d, &e)));
    }
}

#[test]
fn constant_vectors_have_no_dh() {
    let m = mesh(2, true);
    let d = diffusion(&m, [2.0, 3.0]);
    let zero = LimiterMatrix::constant(d.pattern().clone(), 0.0);
    assert_eq!(dh_seminorm(&zero, &d, &vec![3.5; m.num_nodes()]), 0.0);
}
