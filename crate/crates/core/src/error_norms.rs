//! Error measures for P1 solutions: L² and H¹ errors against an exact
//! solution, the FCT norm and the `d_h` seminorm of a nodal error, time
//! integration of per-step values and experimental orders of convergence.

use crate::fct::LimiterMatrix;
use crate::mesh::TriMesh;
use crate::sparse::SparseMatrix;

/// Symmetric six-point rule of degree 4: barycentric points and weights
/// (weights sum to one and are scaled by the triangle area).
const DEGREE4: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445_948_490_915_964_9;
    const B1: f64 = 1.0 - 2.0 * A1;
    const W1: f64 = 0.223_381_589_678_011_5;
    const A2: f64 = 0.091_576_213_509_770_74;
    const B2: f64 = 1.0 - 2.0 * A2;
    const W2: f64 = 0.109_951_743_655_321_9;
    [
        ([A1, A1, B1], W1),
        ([A1, B1, A1], W1),
        ([B1, A1, A1], W1),
        ([A2, A2, B2], W2),
        ([A2, B2, A2], W2),
        ([B2, A2, A2], W2),
    ]
};

/// `‖u(t) - u_h‖_{L²(Ω)}` with `u_h` the P1 field of the nodal values.
pub fn l2_error(mesh: &TriMesh, u_h: &[f64], exact: impl Fn(f64, f64) -> f64) -> f64 {
    let mut sum = 0.0;
    for t in 0..mesh.num_triangles() {
        let v = mesh.vertices(t);
        let idx = mesh.triangles()[t];
        let area = mesh.area(t);
        for (l, w) in DEGREE4 {
            let x = l[0] * v[0].x + l[1] * v[1].x + l[2] * v[2].x;
            let y = l[0] * v[0].y + l[1] * v[1].y + l[2] * v[2].y;
            let uh = l[0] * u_h[idx[0]] + l[1] * u_h[idx[1]] + l[2] * u_h[idx[2]];
            let e = exact(x, y) - uh;
            sum += w * area * e * e;
        }
    }
    sum.sqrt()
}

/// `|u(t) - u_h|_{H¹(Ω)}` given the exact gradient.
pub fn h1_seminorm_error(mesh: &TriMesh, u_h: &[f64], exact_gradient: impl Fn(f64, f64) -> [f64; 2]) -> f64 {
    let mut sum = 0.0;
    for t in 0..mesh.num_triangles() {
        let v = mesh.vertices(t);
        let idx = mesh.triangles()[t];
        let area = mesh.area(t);
        let g = mesh.basis_gradients(t);
        let gh = [
            g[0][0] * u_h[idx[0]] + g[1][0] * u_h[idx[1]] + g[2][0] * u_h[idx[2]],
            g[0][1] * u_h[idx[0]] + g[1][1] * u_h[idx[1]] + g[2][1] * u_h[idx[2]],
        ];
        for (l, w) in DEGREE4 {
            let x = l[0] * v[0].x + l[1] * v[1].x + l[2] * v[2].x;
            let y = l[0] * v[0].y + l[1] * v[1].y + l[2] * v[2].y;
            let ge = exact_gradient(x, y);
            let (ex, ey) = (ge[0] - gh[0], ge[1] - gh[1]);
            sum += w * area * (ex * ex + ey * ey);
        }
    }
    sum.sqrt()
}

/// Exact `(‖e_h‖₀, |e_h|₁)` of the P1 field with nodal values `e`.
pub fn p1_norms(mesh: &TriMesh, e: &[f64]) -> (f64, f64) {
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for t in 0..mesh.num_triangles() {
        let idx = mesh.triangles()[t];
        let area = mesh.area(t);
        let ev = idx.map(|i| e[i]);
        let sum: f64 = ev.iter().sum();
        let sq: f64 = ev.iter().map(|v| v * v).sum();
        // ∫ e² = area/12 (Σ e_i² + (Σ e_i)²)
        l2 += area / 12.0 * (sq + sum * sum);
        let g = mesh.basis_gradients(t);
        let gx = g[0][0] * ev[0] + g[1][0] * ev[1] + g[2][0] * ev[2];
        let gy = g[0][1] * ev[0] + g[1][1] * ev[1] + g[2][1] * ev[2];
        h1 += area * (gx * gx + gy * gy);
    }
    (l2.sqrt(), h1.sqrt())
}

/// `d_h(e; e, e) = Σ_{i,j} (1 - α_ij) d_ij (e_j - e_i) e_i`, evaluated pairwise
/// as `Σ_{i<j} (1 - α_ij) |d_ij| (e_j - e_i)²`.
pub fn dh_form(alpha: &LimiterMatrix, diffusion: &SparseMatrix, e: &[f64]) -> f64 {
    let pattern = diffusion.pattern();
    let (av, dv) = (alpha.values(), diffusion.values());
    pattern
        .upper_pairs()
        .map(|(i, j, k)| {
            let de = e[j] - e[i];
            (1.0 - av[k]) * dv[k].abs() * de * de
        })
        .sum()
}

/// Square root of [`dh_form`].
pub fn dh_seminorm(alpha: &LimiterMatrix, diffusion: &SparseMatrix, e: &[f64]) -> f64 {
    dh_form(alpha, diffusion, e).sqrt()
}

/// `d_h` through the edge formulation
/// `Σ_E (1 - α_E) |d_E| h_E (∇e·t_E, ∇e·t_E)_E`, with the tangential
/// derivative taken from the gradient of an adjacent triangle.
pub fn dh_edge_formulation(mesh: &TriMesh, alpha: &LimiterMatrix, diffusion: &SparseMatrix, e: &[f64]) -> f64 {
    let mut gradient_on_edge = std::collections::HashMap::new();
    for t in 0..mesh.num_triangles() {
        let idx = mesh.triangles()[t];
        let g = mesh.basis_gradients(t);
        let grad = [
            g[0][0] * e[idx[0]] + g[1][0] * e[idx[1]] + g[2][0] * e[idx[2]],
            g[0][1] * e[idx[0]] + g[1][1] * e[idx[1]] + g[2][1] * e[idx[2]],
        ];
        for k in 0..3 {
            let (a, b) = (idx[k], idx[(k + 1) % 3]);
            gradient_on_edge.entry((a.min(b), a.max(b))).or_insert(grad);
        }
    }
    mesh.edges()
        .iter()
        .map(|edge| {
            let (i, j) = edge.endpoints;
            let grad = gradient_on_edge[&(i, j)];
            let tangential = grad[0] * edge.tangent[0] + grad[1] * edge.tangent[1];
            // constant along the edge: (·,·)_E = h_E · tangential²
            let d = diffusion.get(i, j).abs();
            (1.0 - alpha.get(i, j)) * d * edge.length * edge.length * tangential * tangential
        })
        .sum()
}

/// Components of the FCT norm of a nodal error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FctNormParts {
    pub l2: f64,
    pub h1: f64,
    pub dh: f64,
}

impl FctNormParts {
    /// `(ε |e|₁² + c₀ ‖e‖₀² + d_h)^{1/2}`
    pub fn combine(&self, eps: f64, c0: f64) -> f64 {
        (eps * self.h1 * self.h1 + c0 * self.l2 * self.l2 + self.dh * self.dh).sqrt()
    }
}

pub fn fct_norm_parts(mesh: &TriMesh, e: &[f64], alpha: &LimiterMatrix, diffusion: &SparseMatrix) -> FctNormParts {
    let (l2, h1) = p1_norms(mesh, e);
    FctNormParts {
        l2,
        h1,
        dh: dh_seminorm(alpha, diffusion, e),
    }
}

/// `‖e‖_FCT = (ε |e|₁² + c₀ ‖e‖₀² + d_h(e; e, e))^{1/2}` for the nodal vector `e`.
pub fn fct_norm(
    mesh: &TriMesh,
    e: &[f64],
    alpha: &LimiterMatrix,
    diffusion: &SparseMatrix,
    eps: f64,
    c0: f64,
) -> f64 {
    fct_norm_parts(mesh, e, alpha, diffusion).combine(eps, c0)
}

/// Per-step values `v_1, …, v_N` of a spatial norm, with the step length.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSeries {
    pub tau: f64,
    pub values: Vec<f64>,
}

impl NormSeries {
    pub fn new(tau: f64) -> Self {
        Self { tau, values: Vec::new() }
    }

    pub fn push(&mut self, v: f64) {
        debug_assert!(v >= 0.0);
        self.values.push(v);
    }

    /// Time-integrated norm `(τ Σ_n v_n²)^{1/2}`.
    pub fn integrate(&self) -> f64 {
        time_integrate(self)
    }
}

pub fn time_integrate(series: &NormSeries) -> f64 {
    (series.tau * series.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Experimental orders `log(e_k / e_{k+1}) / log(h_k / h_{k+1})`. Entries
/// with a nonpositive or non-finite error are `None`.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(errors.len(), hs.len(), "errors and mesh widths differ in length");
    errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| {
            let valid = e.iter().chain(h).all(|v| v.is_finite() && *v > 0.0);
            (valid && h[0] != h[1]).then(|| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        })
        .collect()
}

/// Mean of the defined entries, `None` if there are none.
pub fn mean_eoc(orders: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = orders.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}
