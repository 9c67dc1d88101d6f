//! Scheme-level properties on random data: equivalences between the FCT
//! variants and the Galerkin and low-order methods, positivity of the
//! low-order method and behaviour of the nonlinear iteration.

use femfct::stepper::{Operators, StepRecord};
use femfct::study::{Manufactured, TimeProfile};
use femfct::{
    FixedPointOptions, Limiter, LinearSolveOptions, ProblemSpec, SchemeKind, StepError, Stepper, StepperOptions,
    TriMesh,
};
use proptest::prelude::*;

fn gap(a: &StepRecord, b: &StepRecord) -> f64 {
    let norm = b.u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    a.u.iter().zip(&b.u).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt() / norm
}

fn bump(cx: f64, cy: f64, height: f64) -> impl Fn(f64, f64) -> f64 + Send + Sync + 'static {
    move |x, y| height * (-40.0 * ((x - cx).powi(2) + (y - cy).powi(2))).exp()
}

fn run(mesh: &TriMesh, spec: &ProblemSpec, kind: SchemeKind, opts: StepperOptions, steps: usize) -> Vec<StepRecord> {
    Stepper::new(mesh, spec, kind, opts).unwrap().run(steps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn zero_limiter_reproduces_low_order(cx in 0.2..0.8f64, cy in 0.2..0.8f64, bx in -3.0..3.0f64, by in -3.0..3.0f64) {
        let mesh = TriMesh::friedrichs_keller(2);
        let spec = ProblemSpec::constant(1e-4, [bx, by], 1.0, 1.0, 1e-3).with_initial(bump(cx, cy, 1.0));
        let low = run(&mesh, &spec, SchemeKind::low_order(), StepperOptions::default(), 5);
        for kind in [SchemeKind::linear_fct(Limiter::Uniform(0.0)), SchemeKind::nonlinear_fct(Limiter::Uniform(0.0))] {
            let fct = run(&mesh, &spec, kind, StepperOptions::default(), 5);
            for (a, b) in fct.iter().zip(&low) {
                prop_assert!(gap(a, b) <= 1e-12, "{:?}", kind);
            }
        }
    }

    #[test]
    fn unit_limiter_reproduces_galerkin(cx in 0.2..0.8f64, cy in 0.2..0.8f64, bx in -3.0..3.0f64, by in -3.0..3.0f64) {
        let mesh = TriMesh::friedrichs_keller(1);
        let spec = ProblemSpec::constant(1e-4, [bx, by], 1.0, 1.0, 1e-3).with_initial(bump(cx, cy, 1.0));
        let opts = StepperOptions {
            fixed_point: FixedPointOptions { tol: 1e-15, max_iter: 2000, damping: 1.0 },
            ..StepperOptions::default()
        };
        let galerkin = run(&mesh, &spec, SchemeKind::galerkin(), opts, 5);
        let fct = run(&mesh, &spec, SchemeKind::nonlinear_fct(Limiter::Uniform(1.0)), opts, 5);
        for (a, b) in fct.iter().zip(&galerkin) {
            prop_assert!(gap(a, b) <= 1e-10);
        }
    }

    #[test]
    fn low_order_preserves_positivity(
        cx in 0.1..0.9f64, cy in 0.1..0.9f64, height in 0.0..5.0f64, source in 0.0..3.0f64, shifted in any::<bool>(),
    ) {
        let mesh = if shifted { TriMesh::shifted(2) } else { TriMesh::friedrichs_keller(2) };
        let spec = ProblemSpec::constant(1e-8, [2.0, 3.0], 1.0, 1.0, 1e-3)
            .with_initial(bump(cx, cy, height))
            .with_source(move |_, x, y| source * x * y);
        for r in run(&mesh, &spec, SchemeKind::low_order(), StepperOptions::default(), 3) {
            prop_assert!(r.u.iter().all(|&v| v >= -1e-13));
        }
    }

    /// FCT with the Zalesak limiter keeps a nonnegative bump nonnegative for
    /// pure transport.
    #[test]
    fn zalesak_fct_keeps_bump_nonnegative(cx in 0.3..0.7f64, cy in 0.3..0.7f64) {
        let mesh = TriMesh::friedrichs_keller(3);
        let spec = ProblemSpec::constant(1e-8, [1.0, 0.5], 1e-8, 1.0, 1e-3).with_initial(bump(cx, cy, 1.0));
        for kind in [SchemeKind::linear_fct(Limiter::Zalesak), SchemeKind::nonlinear_fct(Limiter::Zalesak)] {
            for r in run(&mesh, &spec, kind, StepperOptions::default(), 20) {
                let min = r.u.iter().copied().fold(f64::INFINITY, f64::min);
                prop_assert!(min >= -1e-3, "{:?} step {}: {}", kind, r.step, min);
            }
        }
    }
}

#[test]
fn nonlinear_iteration_converges_on_reference_problem() {
    let mesh = TriMesh::friedrichs_keller(3);
    let spec = Manufactured::new(1e-8, TimeProfile::Linear).spec(1.0, 1e-3);
    let mut stepper =
        Stepper::new(&mesh, &spec, SchemeKind::nonlinear_fct(Limiter::Zalesak), StepperOptions::default()).unwrap();
    let mut max_iters = 0;
    stepper
        .run_with(20, |r| {
            if r.step > 0 {
                assert!(r.residual.unwrap() < 1e-9);
                max_iters = max_iters.max(r.fixed_point_iters.unwrap());
            }
        })
        .unwrap();
    assert!(max_iters <= 50, "{max_iters}");
}

#[test]
fn iteration_cap_reports_failure() {
    let mesh = TriMesh::friedrichs_keller(2);
    let spec = Manufactured::new(1e-8, TimeProfile::Linear).spec(1.0, 1e-3);
    let opts = StepperOptions {
        fixed_point: FixedPointOptions {
            tol: 1e-30,
            max_iter: 3,
            damping: 1.0,
        },
        ..StepperOptions::default()
    };
    let err = Stepper::new(&mesh, &spec, SchemeKind::nonlinear_fct(Limiter::Zalesak), opts)
        .unwrap()
        .run(2)
        .unwrap_err();
    assert!(matches!(err, StepError::FixedPoint { step: 1, iterations: 3, .. }), "{err}");
}

#[test]
fn damping_reaches_the_same_solution() {
    let mesh = TriMesh::friedrichs_keller(2);
    let spec = Manufactured::new(1e-8, TimeProfile::Linear).spec(1.0, 1e-3);
    let kind = SchemeKind::nonlinear_fct(Limiter::Zalesak);
    let tight = FixedPointOptions {
        tol: 1e-14,
        max_iter: 500,
        damping: 1.0,
    };
    let plain_opts = StepperOptions {
        fixed_point: tight,
        ..StepperOptions::default()
    };
    let plain = run(&mesh, &spec, kind, plain_opts, 5);
    let damped_opts = StepperOptions {
        fixed_point: FixedPointOptions { damping: 0.7, ..tight },
        ..StepperOptions::default()
    };
    let damped = run(&mesh, &spec, kind, damped_opts, 5);
    for (a, b) in plain.iter().zip(&damped) {
        assert!(gap(a, b) < 1e-8, "{}", gap(a, b));
    }
}

#[test]
fn iterative_solver_matches_direct() {
    let mesh = TriMesh::shifted(3);
    let spec = Manufactured::new(1e-8, TimeProfile::Linear).spec(1.0, 1e-3);
    let kind = SchemeKind::linear_fct(Limiter::Zalesak);
    let direct = run(&mesh, &spec, kind, StepperOptions::default(), 5);
    let krylov = StepperOptions {
        linear: LinearSolveOptions {
            method: femfct::SolveMethod::Bicgstab,
            tol: 1e-13,
            max_iter: 2000,
        },
        ..StepperOptions::default()
    };
    let iterative = run(&mesh, &spec, kind, krylov, 5);
    for (a, b) in direct.iter().zip(&iterative) {
        assert!(gap(a, b) < 1e-9);
    }
}

#[test]
fn boundary_values_are_imposed() {
    let mesh = TriMesh::friedrichs_keller(2);
    let spec = ProblemSpec::constant(1e-3, [1.0, 1.0], 1.0, 1.0, 1e-2).with_boundary(|t, x, y| 1.0 + t * (x + y));
    for kind in [
        SchemeKind::galerkin(),
        SchemeKind::low_order(),
        SchemeKind::linear_fct(Limiter::Zalesak),
        SchemeKind::nonlinear_fct(Limiter::Zalesak),
    ] {
        let records = run(&mesh, &spec, kind, StepperOptions::default(), 4);
        let last = records.last().unwrap();
        for i in mesh.boundary_nodes() {
            let p = mesh.nodes()[i];
            assert_eq!(last.u[i], 1.0 + last.t * (p.x + p.y), "{kind:?}");
        }
    }
}

#[test]
fn operators_expose_monotone_system() {
    let mesh = TriMesh::shifted(2);
    let spec = Manufactured::new(1e-8, TimeProfile::Linear).spec(1.0, 1e-3);
    let pattern = std::sync::Arc::new(femfct::Pattern::from_mesh(&mesh));
    let ops = Operators::assemble(&mesh, &pattern, &spec, 0.0, false, &LinearSolveOptions::default()).unwrap();
    let report = femfct::fct::m_matrix_check(&ops.lumped, &ops.low_order, spec.tau);
    assert!(report.passed(), "{:?}", report.violations);
}
