//! Backward-Euler time stepping for the Galerkin, low-order, linearized FCT
//! and nonlinear FCT schemes.
//!
//! All schemes share the same operators: consistent mass `M_C`, lumped mass
//! `M_L`, stiffness `A`, artificial diffusion `D` and `𝔸 = A + D`. The FCT
//! schemes solve the low-order system `(M_L + τ𝔸) u^n = τ f^n + M_L u^{n-1} + f*`
//! with a limited antidiffusive correction `f*`. Boundary rows are replaced
//! by `u_i = g(t_n, x_i)` after the correction is added.

use std::sync::Arc;

use log::{debug, warn};
use thiserror::Error;

use crate::assembly::{
    apply_dirichlet_rhs, apply_dirichlet_rows, assemble_load, assemble_mass_on, assemble_stiffness_on,
    dirichlet_values, ProblemSpec, SpecError,
};
use crate::fct::{
    artificial_diffusion, correction_vector, explicit_rate, linear_fluxes_from_rate, lump, prelimit,
    raw_fluxes, zalesak_factors, FctError, FluxMatrix, LimiterMatrix, LumpedMass,
};
use crate::mesh::TriMesh;
use crate::solver::{LinearSolveOptions, LinearSolver, SolverError};
use crate::sparse::{Pattern, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Galerkin,
    LowOrder,
    LinearFct,
    NonlinearFct,
}

impl Scheme {
    pub fn is_fct(self) -> bool {
        matches!(self, Scheme::LinearFct | Scheme::NonlinearFct)
    }
}

/// How the limiters `α_ij` are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limiter {
    Zalesak,
    /// The same value on every pair.
    Uniform(f64),
    /// The given value on pairs of interior nodes; pairs with a boundary
    /// endpoint use the Zalesak value.
    InteriorConstant(f64),
}

impl Limiter {
    fn validate(self) -> Result<(), StepError> {
        match self {
            Limiter::Zalesak => Ok(()),
            Limiter::Uniform(v) | Limiter::InteriorConstant(v) => {
                if (0.0..=1.0).contains(&v) {
                    Ok(())
                } else {
                    Err(StepError::InvalidLimiter(v))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeKind {
    pub scheme: Scheme,
    pub limiter: Limiter,
}

impl SchemeKind {
    pub const fn new(scheme: Scheme, limiter: Limiter) -> Self {
        Self { scheme, limiter }
    }

    pub const fn galerkin() -> Self {
        Self::new(Scheme::Galerkin, Limiter::Zalesak)
    }

    pub const fn low_order() -> Self {
        Self::new(Scheme::LowOrder, Limiter::Zalesak)
    }

    pub const fn linear_fct(limiter: Limiter) -> Self {
        Self::new(Scheme::LinearFct, limiter)
    }

    pub const fn nonlinear_fct(limiter: Limiter) -> Self {
        Self::new(Scheme::NonlinearFct, limiter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Stop once the Euclidean norm of the nonlinear residual is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation `u ← u + ω (u_solve - u)`, `ω ∈ (0, 1]`.
    pub damping: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100,
            damping: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepperOptions {
    pub linear: LinearSolveOptions,
    pub fixed_point: FixedPointOptions,
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Fct(#[from] FctError),
    #[error("limiter value {0} outside [0, 1]")]
    InvalidLimiter(f64),
    #[error("damping factor {0} outside (0, 1]")]
    InvalidDamping(f64),
    #[error("{steps} steps of length {tau} overrun the end time {t_end}")]
    BeyondEndTime { steps: usize, tau: f64, t_end: f64 },
    #[error("step {step}: linear solve failed: {source}")]
    Solver { step: usize, source: SolverError },
    #[error("step {step}: fixed-point iteration stopped after {iterations} iterations with residual {residual:e}")]
    FixedPoint {
        step: usize,
        iterations: usize,
        residual: f64,
    },
}

/// Result of one time step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub u: Vec<f64>,
    /// Final limiter of the step (FCT schemes only).
    pub alpha: Option<LimiterMatrix>,
    /// Number of linear solves of the fixed-point loop (nonlinear scheme only).
    pub fixed_point_iters: Option<usize>,
    /// Final nonlinear residual (nonlinear scheme only).
    pub residual: Option<f64>,
    /// `|Σ_i f*_i|` of the applied correction (FCT schemes only).
    pub correction_imbalance: Option<f64>,
    /// `Σ_{i<j} |f_ij|` of the fluxes the correction was built from.
    pub flux_magnitude: Option<f64>,
}

impl StepRecord {
    fn plain(step: usize, t: f64, u: Vec<f64>) -> Self {
        Self {
            step,
            t,
            u,
            alpha: None,
            fixed_point_iters: None,
            residual: None,
            correction_imbalance: None,
            flux_magnitude: None,
        }
    }
}

/// Matrices of the discrete problem at one time level.
#[derive(Debug, Clone)]
pub struct Operators {
    pub t: f64,
    pub mass: SparseMatrix,
    pub lumped: LumpedMass,
    pub stiffness: SparseMatrix,
    pub diffusion: SparseMatrix,
    /// `𝔸 = A + D`
    pub low_order: SparseMatrix,
    /// `M_L + τ𝔸` without boundary rows replaced.
    pub low_order_system: SparseMatrix,
    low_solver: LinearSolver,
    galerkin_solver: Option<LinearSolver>,
}

impl Operators {
    pub fn assemble(
        mesh: &TriMesh,
        pattern: &Arc<Pattern>,
        spec: &ProblemSpec,
        t: f64,
        with_galerkin: bool,
        opts: &LinearSolveOptions,
    ) -> Result<Self, StepError> {
        let mass = assemble_mass_on(mesh, pattern.clone());
        let lumped = lump(&mass)?;
        let stiffness = assemble_stiffness_on(mesh, spec, t, pattern.clone());
        let diffusion = artificial_diffusion(&stiffness);
        let low_order = stiffness.add_scaled(1.0, &diffusion);
        let mut low_order_system = low_order.scaled(spec.tau);
        low_order_system.add_diagonal(lumped.as_slice());

        let bc = dirichlet_values(mesh, spec, t);
        let mut low = low_order_system.clone();
        apply_dirichlet_rows(&mut low, &bc);
        let low_solver = LinearSolver::new(low, *opts).map_err(|source| StepError::Solver { step: 0, source })?;
        let galerkin_solver = if with_galerkin {
            let mut g = mass.add_scaled(spec.tau, &stiffness);
            apply_dirichlet_rows(&mut g, &bc);
            Some(LinearSolver::new(g, *opts).map_err(|source| StepError::Solver { step: 0, source })?)
        } else {
            None
        };
        Ok(Self {
            t,
            mass,
            lumped,
            stiffness,
            diffusion,
            low_order,
            low_order_system,
            low_solver,
            galerkin_solver,
        })
    }
}

/// Whether `τ` exceeds the `τ ≤ h²` stability threshold (constant one).
pub fn cfl_exceeded(tau: f64, h: f64) -> bool {
    tau > h * h
}

/// Time stepper for one problem, mesh and scheme.
pub struct Stepper<'a> {
    mesh: &'a TriMesh,
    spec: &'a ProblemSpec,
    kind: SchemeKind,
    opts: StepperOptions,
    pattern: Arc<Pattern>,
    current: Arc<Operators>,
    previous: Arc<Operators>,
    load_cache: Option<(f64, Vec<f64>)>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        mesh: &'a TriMesh,
        spec: &'a ProblemSpec,
        kind: SchemeKind,
        opts: StepperOptions,
    ) -> Result<Self, StepError> {
        spec.validate()?;
        kind.limiter.validate()?;
        if !(opts.fixed_point.damping > 0.0 && opts.fixed_point.damping <= 1.0) {
            return Err(StepError::InvalidDamping(opts.fixed_point.damping));
        }
        let pattern = Arc::new(Pattern::from_mesh(mesh));
        let with_galerkin = kind.scheme == Scheme::Galerkin;
        let current = Arc::new(Operators::assemble(mesh, &pattern, spec, 0.0, with_galerkin, &opts.linear)?);
        Ok(Self {
            mesh,
            spec,
            kind,
            opts,
            pattern,
            previous: current.clone(),
            current,
            load_cache: None,
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn mesh(&self) -> &TriMesh {
        self.mesh
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    /// Operators of the most recent time level.
    pub fn operators(&self) -> &Operators {
        &self.current
    }

    /// Step 0: the nodal interpolant of the initial datum.
    pub fn initial_record(&self) -> StepRecord {
        let u = self
            .mesh
            .nodes()
            .iter()
            .map(|p| (self.spec.initial)(p.x, p.y))
            .collect();
        StepRecord::plain(0, 0.0, u)
    }

    fn load(&mut self, t: f64) -> Vec<f64> {
        if let Some((tc, f)) = &self.load_cache {
            if *tc == t {
                return f.clone();
            }
        }
        let f = assemble_load(self.mesh, self.spec, t);
        self.load_cache = Some((t, f.clone()));
        f
    }

    fn advance_operators(&mut self, t: f64, step: usize) -> Result<(), StepError> {
        self.previous = self.current.clone();
        if !self.spec.constant_coefficients {
            let with_galerkin = self.kind.scheme == Scheme::Galerkin;
            let ops = Operators::assemble(self.mesh, &self.pattern, self.spec, t, with_galerkin, &self.opts.linear)
                .map_err(|e| match e {
                    StepError::Solver { source, .. } => StepError::Solver { step, source },
                    other => other,
                })?;
            self.current = Arc::new(ops);
        }
        Ok(())
    }

    /// Advances `prev` by one step with the configured scheme.
    pub fn step(&mut self, prev: &StepRecord) -> Result<StepRecord, StepError> {
        match self.kind.scheme {
            Scheme::Galerkin => self.step_galerkin(prev),
            Scheme::LowOrder => self.step_low_order(prev),
            Scheme::LinearFct => self.step_linear_fct(prev),
            Scheme::NonlinearFct => self.step_nonlinear_fct(prev),
        }
    }

    fn next_time(&self, prev: &StepRecord) -> (usize, f64) {
        let step = prev.step + 1;
        (step, step as f64 * self.spec.tau)
    }

    fn solve_low(&self, rhs: &[f64], step: usize) -> Result<Vec<f64>, StepError> {
        self.current
            .low_solver
            .solve(rhs)
            .map_err(|source| StepError::Solver { step, source })
    }

    /// `τ f^n + M_L u^{n-1}`
    fn low_order_rhs(&self, f: &[f64], u_prev: &[f64]) -> Vec<f64> {
        let m = self.current.lumped.as_slice();
        f.iter()
            .zip(u_prev)
            .zip(m)
            .map(|((f, u), m)| self.spec.tau * f + m * u)
            .collect()
    }

    /// `M_C u^n + τ A u^n = τ f^n + M_C u^{n-1}`
    pub fn step_galerkin(&mut self, prev: &StepRecord) -> Result<StepRecord, StepError> {
        let (step, t) = self.next_time(prev);
        self.advance_operators(t, step)?;
        if self.current.galerkin_solver.is_none() {
            // stepper was built for another scheme
            let ops = Operators::assemble(self.mesh, &self.pattern, self.spec, t, true, &self.opts.linear)?;
            self.current = Arc::new(ops);
        }
        let f = self.load(t);
        let mu = self.current.mass.mul_vec(&prev.u);
        let mut rhs: Vec<f64> = f.iter().zip(&mu).map(|(f, m)| self.spec.tau * f + m).collect();
        apply_dirichlet_rhs(&mut rhs, &dirichlet_values(self.mesh, self.spec, t));
        let u = self
            .current
            .galerkin_solver
            .as_ref()
            .expect("galerkin system assembled")
            .solve(&rhs)
            .map_err(|source| StepError::Solver { step, source })?;
        Ok(StepRecord::plain(step, t, u))
    }

    /// `(M_L + τ𝔸) u^n = τ f^n + M_L u^{n-1}`
    pub fn step_low_order(&mut self, prev: &StepRecord) -> Result<StepRecord, StepError> {
        let (step, t) = self.next_time(prev);
        self.advance_operators(t, step)?;
        let f = self.load(t);
        let mut rhs = self.low_order_rhs(&f, &prev.u);
        apply_dirichlet_rhs(&mut rhs, &dirichlet_values(self.mesh, self.spec, t));
        let u = self.solve_low(&rhs, step)?;
        Ok(StepRecord::plain(step, t, u))
    }

    /// Explicit rate `ν` at `t_{n-1}` and the predictor `ū = u^{n-1} + τ/2 ν`.
    /// On boundary nodes `ν` is the difference quotient of the boundary data
    /// and `ū` equals `g(t_n)`.
    fn predictor(&mut self, prev: &StepRecord, bc: &[(usize, f64)]) -> (Vec<f64>, Vec<f64>) {
        let f_prev = self.load(prev.t);
        let ops = self.previous.clone();
        let mut nu = explicit_rate(&ops.lumped, &ops.low_order, &prev.u, &f_prev);
        let tau = self.spec.tau;
        for &(i, g) in bc {
            nu[i] = (g - prev.u[i]) / tau;
        }
        let mut ubar: Vec<f64> = prev.u.iter().zip(&nu).map(|(u, nu)| u + 0.5 * tau * nu).collect();
        apply_dirichlet_rhs(&mut ubar, bc);
        (nu, ubar)
    }

    /// Limiter for `fluxes`. With `prelimited` the Zalesak values are
    /// computed from the prelimited fluxes and pairs whose flux was cancelled
    /// get `α_ij = 0`, so the returned limiter always applies to the raw
    /// fluxes. Prescribed constant values are used as given.
    fn limit(&self, fluxes: &FluxMatrix, ubar: &[f64], prelimited: bool) -> LimiterMatrix {
        let pattern = fluxes.pattern().clone();
        let zalesak = || {
            let cancelled = prelimited.then(|| prelimit(fluxes, ubar));
            let basis = cancelled.as_ref().unwrap_or(fluxes);
            let mut z = zalesak_factors(basis, ubar, &self.current.lumped);
            z.release(self.mesh.boundary_mask());
            let alpha = z.limiter(basis);
            match &cancelled {
                Some(p) => alpha.merge(&LimiterMatrix::constant(pattern.clone(), 0.0), |i, j| {
                    p.get(i, j) != 0.0 || fluxes.get(i, j) == 0.0
                }),
                None => alpha,
            }
        };
        match self.kind.limiter {
            Limiter::Zalesak => zalesak(),
            Limiter::Uniform(v) => LimiterMatrix::constant(pattern, v),
            Limiter::InteriorConstant(v) => {
                let z = zalesak();
                let interior = LimiterMatrix::constant(pattern, v);
                let boundary = self.mesh.boundary_mask();
                interior.merge(&z, |i, j| !boundary[i] && !boundary[j])
            }
        }
    }

    /// Linearized FCT: fluxes from the explicit rate at `t_{n-1}`, limited
    /// once, then a single low-order solve.
    pub fn step_linear_fct(&mut self, prev: &StepRecord) -> Result<StepRecord, StepError> {
        let (step, t) = self.next_time(prev);
        let bc = dirichlet_values(self.mesh, self.spec, t);
        let (nu, ubar) = self.predictor(prev, &bc);
        self.advance_operators(t, step)?;
        let ops = self.current.clone();
        let fluxes = linear_fluxes_from_rate(&ops.mass, &ops.diffusion, &nu, &prev.u, self.spec.tau);
        let alpha = self.limit(&fluxes, &ubar, false);
        let fstar = correction_vector(&alpha, &fluxes);

        let f = self.load(t);
        let mut rhs = self.low_order_rhs(&f, &prev.u);
        for (r, c) in rhs.iter_mut().zip(&fstar) {
            *r += c;
        }
        apply_dirichlet_rhs(&mut rhs, &bc);
        let u = self.solve_low(&rhs, step)?;
        Ok(StepRecord {
            correction_imbalance: Some(fstar.iter().sum::<f64>().abs()),
            flux_magnitude: Some(fluxes.magnitude()),
            alpha: Some(alpha),
            ..StepRecord::plain(step, t, u)
        })
    }

    /// Nonlinear FCT solved by fixed-point iteration.
    ///
    /// Each iterate recomputes the fluxes at the current `u`, applies the
    /// limiter (Zalesak values after prelimiting with `ū`) and solves the low-order system with the
    /// correction on the right-hand side. The loop stops when the residual of
    /// the nonlinear equations, with the limiter evaluated at the current
    /// iterate, drops below the tolerance.
    pub fn step_nonlinear_fct(&mut self, prev: &StepRecord) -> Result<StepRecord, StepError> {
        let (step, t) = self.next_time(prev);
        let bc = dirichlet_values(self.mesh, self.spec, t);
        let (_, ubar) = self.predictor(prev, &bc);
        self.advance_operators(t, step)?;
        let ops = self.current.clone();
        let tau = self.spec.tau;
        let f = self.load(t);
        let rhs0 = self.low_order_rhs(&f, &prev.u);
        let FixedPointOptions { tol, max_iter, damping } = self.opts.fixed_point;
        let boundary = self.mesh.boundary_mask();

        let mut u = prev.u.clone();
        let mut iterations = 0;
        loop {
            let fluxes = raw_fluxes(&ops.mass, &ops.diffusion, &u, &prev.u, tau);
            let alpha = self.limit(&fluxes, &ubar, true);
            let fstar = correction_vector(&alpha, &fluxes);

            let lhs = ops.low_order_system.mul_vec(&u);
            let mut rhs = rhs0.clone();
            for (r, c) in rhs.iter_mut().zip(&fstar) {
                *r += c;
            }
            apply_dirichlet_rhs(&mut rhs, &bc);
            let residual = (0..u.len())
                .map(|i| {
                    let r = if boundary[i] { u[i] - rhs[i] } else { lhs[i] - rhs[i] };
                    r * r
                })
                .sum::<f64>()
                .sqrt();
            if residual < tol {
                debug!("step {step}: fixed point converged after {iterations} solves, residual {residual:e}");
                return Ok(StepRecord {
                    alpha: Some(alpha),
                    fixed_point_iters: Some(iterations),
                    residual: Some(residual),
                    correction_imbalance: Some(fstar.iter().sum::<f64>().abs()),
                    flux_magnitude: Some(fluxes.magnitude()),
                    ..StepRecord::plain(step, t, u)
                });
            }
            if iterations == max_iter {
                return Err(StepError::FixedPoint { step, iterations, residual });
            }
            let solved = self.solve_low(&rhs, step)?;
            if damping == 1.0 {
                u = solved;
            } else {
                for (ui, si) in u.iter_mut().zip(&solved) {
                    *ui += damping * (si - *ui);
                }
            }
            iterations += 1;
        }
    }

    /// Runs `n_steps` steps from the initial datum, calling `observe` on every
    /// record including step 0. Records are not retained.
    pub fn run_with(
        &mut self,
        n_steps: usize,
        mut observe: impl FnMut(&StepRecord),
    ) -> Result<StepRecord, StepError> {
        let tau = self.spec.tau;
        if n_steps as f64 * tau > self.spec.t_end * (1.0 + 1e-12) {
            return Err(StepError::BeyondEndTime {
                steps: n_steps,
                tau,
                t_end: self.spec.t_end,
            });
        }
        if n_steps > 0 && cfl_exceeded(tau, self.mesh.h()) && self.kind.scheme.is_fct() {
            warn!(
                "time step {tau} exceeds h^2 = {} (level {}); the explicit predictor may be inaccurate",
                self.mesh.h() * self.mesh.h(),
                self.mesh.level()
            );
        }
        let mut record = self.initial_record();
        observe(&record);
        for _ in 0..n_steps {
            record = self.step(&record)?;
            observe(&record);
        }
        Ok(record)
    }

    /// Runs `n_steps` steps and returns all records, the initial one first.
    pub fn run(&mut self, n_steps: usize) -> Result<Vec<StepRecord>, StepError> {
        let mut records = Vec::with_capacity(n_steps + 1);
        self.run_with(n_steps, |r| records.push(r.clone()))?;
        Ok(records)
    }
}

/// Convenience wrapper: builds a stepper and runs it.
pub fn run(
    spec: &ProblemSpec,
    mesh: &TriMesh,
    kind: SchemeKind,
    n_steps: usize,
    opts: StepperOptions,
) -> Result<Vec<StepRecord>, StepError> {
    Stepper::new(mesh, spec, kind, opts)?.run(n_steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ProblemSpec {
        ProblemSpec::constant(1e-8, [2.0, 3.0], 1.0, 1.0, 1e-3)
    }

    #[test]
    fn zero_data_stays_zero() {
        let mesh = TriMesh::friedrichs_keller(1);
        let spec = spec();
        for kind in [
            SchemeKind::galerkin(),
            SchemeKind::low_order(),
            SchemeKind::linear_fct(Limiter::Zalesak),
            SchemeKind::nonlinear_fct(Limiter::Zalesak),
        ] {
            let records = run(&spec, &mesh, kind, 3, StepperOptions::default()).unwrap();
            assert_eq!(records.len(), 4);
            assert!(records.iter().all(|r| r.u.iter().all(|&v| v == 0.0)), "{kind:?}");
        }
    }

    #[test]
    fn zero_steps_gives_initial_record() {
        let mesh = TriMesh::friedrichs_keller(0);
        let spec = spec().with_initial(|x, _| x);
        let records = run(&spec, &mesh, SchemeKind::low_order(), 0, StepperOptions::default()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].u[1], 0.5);
    }

    #[test]
    fn constant_state_preserved_by_low_order() {
        // c = 0, f = 0, g = 1: constants are steady
        let mesh = TriMesh::shifted(1);
        let spec = ProblemSpec::constant(1e-3, [2.0, 3.0], 0.0, 1.0, 1e-2)
            .with_c0(1.0)
            .with_initial(|_, _| 1.0)
            .with_boundary(|_, _, _| 1.0);
        let mut stepper = Stepper::new(&mesh, &spec, SchemeKind::low_order(), StepperOptions::default()).unwrap();
        let r0 = stepper.initial_record();
        let r1 = stepper.step_low_order(&r0).unwrap();
        for v in &r1.u {
            assert!((v - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn too_many_steps_rejected() {
        let mesh = TriMesh::friedrichs_keller(0);
        let spec = ProblemSpec { t_end: 0.01, ..spec() };
        let err = run(&spec, &mesh, SchemeKind::low_order(), 11, StepperOptions::default()).unwrap_err();
        assert!(matches!(err, StepError::BeyondEndTime { .. }));
    }

    #[test]
    fn invalid_limiter_rejected() {
        let mesh = TriMesh::friedrichs_keller(0);
        let spec = spec();
        let kind = SchemeKind::linear_fct(Limiter::Uniform(1.5));
        assert!(matches!(
            Stepper::new(&mesh, &spec, kind, StepperOptions::default()),
            Err(StepError::InvalidLimiter(_))
        ));
    }

    #[test]
    fn cfl_threshold() {
        assert!(cfl_exceeded(1e-2, 1.0 / 16.0));
        assert!(!cfl_exceeded(1e-3, 1.0 / 16.0));
    }
}
