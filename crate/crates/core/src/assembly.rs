//! P1 assembly of the mass matrix, the convection-diffusion-reaction
//! stiffness matrix and the load vector, plus Dirichlet row replacement.
//!
//! Variable coefficients are integrated with the three-point edge-midpoint
//! rule, which is exact for quadratic integrands on a triangle.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::mesh::TriMesh;
pub use crate::sparse::{Pattern, SparseMatrix};

/// Scalar coefficient `(t, x, y) -> value`.
pub type ScalarField = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// Vector coefficient `(t, x, y) -> (b_x, b_y)`.
pub type VectorField = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;
/// Initial datum `(x, y) -> value`.
pub type InitialField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("diffusivity must be positive, got {0}")]
    Diffusivity(f64),
    #[error("time step must be positive, got {0}")]
    TimeStep(f64),
    #[error("reaction lower bound c0 must be positive, got {0}")]
    ReactionBound(f64),
    #[error("end time must be nonnegative, got {0}")]
    EndTime(f64),
}

/// Data of the evolutionary problem
/// `u' - eps Δu + b·∇u + c u = f` in the unit square, `u = g` on the boundary,
/// `u(0) = u0`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub eps: f64,
    pub velocity: VectorField,
    pub reaction: ScalarField,
    pub source: ScalarField,
    pub initial: InitialField,
    pub boundary: ScalarField,
    /// Lower bound of `c - ½ div b`.
    pub c0: f64,
    pub t_end: f64,
    pub tau: f64,
    /// `eps`, `b` and `c` do not depend on time; operators are assembled once.
    pub constant_coefficients: bool,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("eps", &self.eps)
            .field("c0", &self.c0)
            .field("t_end", &self.t_end)
            .field("tau", &self.tau)
            .field("constant_coefficients", &self.constant_coefficients)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Constant-coefficient problem with zero boundary values; source and
    /// initial datum default to zero.
    pub fn constant(eps: f64, velocity: [f64; 2], reaction: f64, t_end: f64, tau: f64) -> Self {
        Self {
            eps,
            velocity: Arc::new(move |_, _, _| velocity),
            reaction: Arc::new(move |_, _, _| reaction),
            source: Arc::new(|_, _, _| 0.0),
            initial: Arc::new(|_, _| 0.0),
            boundary: Arc::new(|_, _, _| 0.0),
            c0: reaction,
            t_end,
            tau,
            constant_coefficients: true,
        }
    }

    pub fn with_source(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.source = Arc::new(f);
        self
    }

    pub fn with_initial(mut self, u0: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.initial = Arc::new(u0);
        self
    }

    pub fn with_boundary(mut self, g: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.boundary = Arc::new(g);
        self
    }

    pub fn with_c0(mut self, c0: f64) -> Self {
        self.c0 = c0;
        self
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if !(self.eps > 0.0) {
            return Err(SpecError::Diffusivity(self.eps));
        }
        if !(self.tau > 0.0) {
            return Err(SpecError::TimeStep(self.tau));
        }
        if !(self.c0 > 0.0) {
            return Err(SpecError::ReactionBound(self.c0));
        }
        if !(self.t_end >= 0.0) {
            return Err(SpecError::EndTime(self.t_end));
        }
        Ok(())
    }
}

/// Edge midpoints in barycentric coordinates, each with weight 1/3.
const MIDPOINTS: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];

fn quadrature_points(mesh: &TriMesh, t: usize) -> [([f64; 3], f64, f64); 3] {
    let v = mesh.vertices(t);
    MIDPOINTS.map(|l| {
        let x = l[0] * v[0].x + l[1] * v[1].x + l[2] * v[2].x;
        let y = l[0] * v[0].y + l[1] * v[1].y + l[2] * v[2].y;
        (l, x, y)
    })
}

fn scatter(m: &mut SparseMatrix, nodes: [usize; 3], local: &[[f64; 3]; 3]) {
    for a in 0..3 {
        for b in 0..3 {
            m.add(nodes[a], nodes[b], local[a][b]);
        }
    }
}

/// Consistent P1 mass matrix, integrated exactly.
pub fn assemble_mass(mesh: &TriMesh) -> SparseMatrix {
    assemble_mass_on(mesh, Arc::new(Pattern::from_mesh(mesh)))
}

pub fn assemble_mass_on(mesh: &TriMesh, pattern: Arc<Pattern>) -> SparseMatrix {
    let mut m = SparseMatrix::zeros(pattern);
    for t in 0..mesh.num_triangles() {
        let s = mesh.area(t) / 12.0;
        let local = [[2.0 * s, s, s], [s, 2.0 * s, s], [s, s, 2.0 * s]];
        scatter(&mut m, mesh.triangles()[t], &local);
    }
    m
}

/// Stiffness matrix `a_ij = eps (∇φ_j, ∇φ_i) + (b·∇φ_j, φ_i) + (c φ_j, φ_i)` at time `t`.
pub fn assemble_stiffness(mesh: &TriMesh, spec: &ProblemSpec, t: f64) -> SparseMatrix {
    assemble_stiffness_on(mesh, spec, t, Arc::new(Pattern::from_mesh(mesh)))
}

pub fn assemble_stiffness_on(
    mesh: &TriMesh,
    spec: &ProblemSpec,
    t: f64,
    pattern: Arc<Pattern>,
) -> SparseMatrix {
    let mut m = SparseMatrix::zeros(pattern);
    for tri in 0..mesh.num_triangles() {
        let area = mesh.area(tri);
        let grad = mesh.basis_gradients(tri);
        let mut local = [[0.0; 3]; 3];
        for (a, row) in local.iter_mut().enumerate() {
            for (b, entry) in row.iter_mut().enumerate() {
                *entry = spec.eps * area * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]);
            }
        }
        let w = area / 3.0;
        for (lambda, x, y) in quadrature_points(mesh, tri) {
            let vel = (spec.velocity)(t, x, y);
            let c = (spec.reaction)(t, x, y);
            for (a, row) in local.iter_mut().enumerate() {
                for (b, entry) in row.iter_mut().enumerate() {
                    let conv = vel[0] * grad[b][0] + vel[1] * grad[b][1];
                    *entry += w * (conv * lambda[a] + c * lambda[b] * lambda[a]);
                }
            }
        }
        scatter(&mut m, mesh.triangles()[tri], &local);
    }
    m
}

/// Load vector `f_i = (f(t, ·), φ_i)`.
pub fn assemble_load(mesh: &TriMesh, spec: &ProblemSpec, t: f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_nodes()];
    for tri in 0..mesh.num_triangles() {
        let w = mesh.area(tri) / 3.0;
        let nodes = mesh.triangles()[tri];
        for (lambda, x, y) in quadrature_points(mesh, tri) {
            let f = (spec.source)(t, x, y);
            for a in 0..3 {
                load[nodes[a]] += w * f * lambda[a];
            }
        }
    }
    load
}

/// Boundary values `g(t, x_i)` for every boundary node, in node order.
pub fn dirichlet_values(mesh: &TriMesh, spec: &ProblemSpec, t: f64) -> Vec<(usize, f64)> {
    mesh.boundary_nodes()
        .into_iter()
        .map(|i| {
            let p = mesh.nodes()[i];
            (i, (spec.boundary)(t, p.x, p.y))
        })
        .collect()
}

/// Replaces every boundary row by the identity row and sets the right-hand
/// side to the boundary value. Interior rows are left untouched.
pub fn apply_dirichlet(
    matrix: &mut SparseMatrix,
    rhs: &mut [f64],
    mesh: &TriMesh,
    spec: &ProblemSpec,
    t: f64,
) {
    let values = dirichlet_values(mesh, spec, t);
    apply_dirichlet_rows(matrix, &values);
    apply_dirichlet_rhs(rhs, &values);
}

pub fn apply_dirichlet_rows(matrix: &mut SparseMatrix, values: &[(usize, f64)]) {
    let pattern = matrix.pattern().clone();
    let vals = matrix.values_mut();
    for &(i, _) in values {
        for k in pattern.row_range(i) {
            vals[k] = if pattern.col(k) == i { 1.0 } else { 0.0 };
        }
    }
}

pub fn apply_dirichlet_rhs(rhs: &mut [f64], values: &[(usize, f64)]) {
    for &(i, g) in values {
        rhs[i] = g;
    }
}
