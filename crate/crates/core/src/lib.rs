//! P1 finite elements with flux-corrected transport (FEM-FCT) for the
//! time-dependent convection-diffusion-reaction equation
//!
//! ```text
//! u' - ε Δu + b·∇u + c u = f   in (0, T] × (0, 1)²,   u = g on the boundary
//! ```
//!
//! discretized with backward Euler. Four schemes share one set of operators:
//! the Galerkin method, the monotone low-order method obtained by mass lumping
//! and artificial diffusion, and the linearized and nonlinear FCT methods that
//! add back limited antidiffusive fluxes (Zalesak limiter by default).
//!
//! ```no_run
//! use femfct::{ProblemSpec, SchemeKind, Limiter, Stepper, StepperOptions, TriMesh};
//!
//! let mesh = TriMesh::friedrichs_keller(3);
//! let spec = ProblemSpec::constant(1e-8, [2.0, 3.0], 1.0, 0.1, 1e-3)
//!     .with_initial(|x, y| if (x - 0.3).hypot(y - 0.3) < 0.15 { 1.0 } else { 0.0 });
//! let mut stepper = Stepper::new(&mesh, &spec, SchemeKind::linear_fct(Limiter::Zalesak), StepperOptions::default())?;
//! let last = stepper.run_with(100, |_| {})?;
//! assert!(last.u.iter().all(|&v| v >= -1e-12));
//! # Ok::<(), femfct::StepError>(())
//! ```

pub mod assembly;
pub mod error_norms;
pub mod fct;
pub mod mesh;
pub mod solver;
pub mod sparse;
pub mod stepper;
pub mod study;

pub use assembly::{ProblemSpec, SpecError};
pub use error_norms::{eoc, fct_norm, dh_seminorm, l2_error, h1_seminorm_error, time_integrate, NormSeries};
pub use fct::{FluxMatrix, LimiterMatrix, LumpedMass, MMatrixReport};
pub use mesh::{MeshError, Point2, TriMesh};
pub use solver::{LinearSolveOptions, SolveMethod, SolverError};
pub use sparse::{Pattern, SparseMatrix};
pub use stepper::{FixedPointOptions, Limiter, Scheme, SchemeKind, StepError, StepRecord, Stepper, StepperOptions};
pub use study::{ExperimentConfig, GridKind, Manufactured, StudyKind};
