//! Linear solvers for the low- and high-order systems.
//!
//! The default is a banded LU factorization with partial pivoting after a
//! reverse Cuthill–McKee reordering. For P1 matrices on lattices of a few
//! thousand to tens of thousands of nodes the band stays narrow, and the
//! factorization is reused for every right-hand side of a run. A
//! Jacobi-preconditioned BiCGStab is available for larger systems.

use std::collections::VecDeque;

use thiserror::Error;

use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    DirectLu,
    Bicgstab,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveOptions {
    pub method: SolveMethod,
    /// Relative residual tolerance for the Krylov method; the direct solver
    /// reports failure if its relative residual exceeds `max(tol, 1e-8)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LinearSolveOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::DirectLu,
            tol: 1e-12,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("matrix is singular: zero pivot in column {column}")]
    Singular { column: usize },
    #[error("solution is inaccurate: relative residual {residual:e}")]
    IllConditioned { residual: f64 },
    #[error("BiCGStab did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("BiCGStab breakdown after {iterations} iterations (relative residual {residual:e})")]
    Breakdown { iterations: usize, residual: f64 },
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("dimension mismatch: matrix {matrix}, right-hand side {rhs}")]
    Dimension { matrix: usize, rhs: usize },
}

/// Reverse Cuthill–McKee ordering of the matrix graph.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(matrix: &SparseMatrix) -> Vec<usize> {
    let n = matrix.n();
    let pattern = matrix.pattern();
    let degree: Vec<usize> = (0..n).map(|i| pattern.row_range(i).len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut neighbors = Vec::new();
    while order.len() < n {
        // start each component from an unvisited node of minimum degree
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        let start = pseudo_peripheral(matrix, start, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            neighbors.clear();
            neighbors.extend(
                pattern
                    .row_range(v)
                    .map(|k| pattern.col(k))
                    .filter(|&w| !visited[w]),
            );
            neighbors.sort_by_key(|&w| (degree[w], w));
            for &w in &neighbors {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// BFS level structure used to pick a starting node far from the rest.
fn pseudo_peripheral(matrix: &SparseMatrix, start: usize, degree: &[usize]) -> usize {
    let pattern = matrix.pattern();
    let n = matrix.n();
    let mut node = start;
    let mut eccentricity = 0;
    for _ in 0..8 {
        let mut dist = vec![usize::MAX; n];
        dist[node] = 0;
        let mut queue = VecDeque::from([node]);
        let mut last = node;
        while let Some(v) = queue.pop_front() {
            last = v;
            for k in pattern.row_range(v) {
                let w = pattern.col(k);
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let far = dist[last];
        // among the farthest level pick the node of least degree
        let candidate = (0..n)
            .filter(|&i| dist[i] == far)
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        if far <= eccentricity {
            break;
        }
        eccentricity = far;
        node = candidate;
    }
    node
}

/// Lower and upper bandwidth of the matrix under the ordering `inverse[old] = new`.
fn band_extent(matrix: &SparseMatrix, inverse: &[usize]) -> (usize, usize) {
    let (mut lower, mut upper) = (0, 0);
    for i in 0..matrix.n() {
        for (j, _) in matrix.row(i) {
            let (r, c) = (inverse[i], inverse[j]);
            if r > c {
                lower = lower.max(r - c);
            } else {
                upper = upper.max(c - r);
            }
        }
    }
    (lower, upper)
}

/// Banded LU factorization `P A = L U` of a permuted matrix.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    lower: usize,
    upper: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// Row `r` holds columns `r - lower ..= r + lower + upper` of `U`.
    band: Vec<f64>,
    width: usize,
    /// Multipliers of column `k`, rows `k+1 ..= k+lower`.
    multipliers: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(matrix: &SparseMatrix) -> Result<Self, SolverError> {
        let n = matrix.n();
        // RCM rarely loses to the input order, but on lattices numbered row by
        // row the natural order can be narrower; keep whichever is better.
        let rcm = reverse_cuthill_mckee(matrix);
        let natural: Vec<usize> = (0..n).collect();
        let (perm, inverse, lower, upper) = [rcm, natural]
            .into_iter()
            .map(|perm| {
                let mut inverse = vec![0; n];
                for (new, &old) in perm.iter().enumerate() {
                    inverse[old] = new;
                }
                let (lower, upper) = band_extent(matrix, &inverse);
                (perm, inverse, lower, upper)
            })
            .min_by_key(|&(_, _, lower, upper)| 2 * lower + upper)
            .expect("two candidate orderings");
        let width = 2 * lower + upper + 1;
        let mut band = vec![0.0; n * width];
        for i in 0..n {
            let r = inverse[i];
            for (j, v) in matrix.row(i) {
                let c = inverse[j];
                band[r * width + (c + lower - r)] = v;
            }
        }
        let mut lu = Self {
            n,
            lower,
            upper,
            perm,
            band,
            width,
            multipliers: vec![0.0; n * lower.max(1)],
            pivots: vec![0; n],
        };
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, row: usize, col: usize) -> usize {
        row * self.width + (col + self.lower - row)
    }

    fn eliminate(&mut self) -> Result<(), SolverError> {
        let (n, kl, ku) = (self.n, self.lower, self.upper);
        let scale = self.band.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.band[self.at(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.band[self.at(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > scale * f64::EPSILON * 1e-3) {
                return Err(SolverError::Singular { column: self.perm[k] });
            }
            self.pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let (a, b) = (self.at(k, c), self.at(p, c));
                    self.band.swap(a, b);
                }
            }
            let pivot = self.band[self.at(k, k)];
            for r in k + 1..=last_row {
                let idx = self.at(r, k);
                let m = self.band[idx] / pivot;
                self.band[idx] = 0.0;
                self.multipliers[k * kl + (r - k - 1)] = m;
                if m != 0.0 {
                    let (src, dst) = (self.at(k, k + 1), self.at(r, k + 1));
                    let len = last_col - k;
                    for off in 0..len {
                        self.band[dst + off] -= m * self.band[src + off];
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidth after reordering.
    pub fn bandwidth(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, kl, ku) = (self.n, self.lower, self.upper);
        assert_eq!(rhs.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            if yk != 0.0 {
                let last_row = (k + kl).min(n - 1);
                for r in k + 1..=last_row {
                    y[r] -= self.multipliers[k * kl + (r - k - 1)] * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + kl + ku).min(n - 1);
            let base = self.at(k, k);
            let mut s = y[k];
            for (off, c) in (k + 1..=last_col).enumerate() {
                s -= self.band[base + 1 + off] * y[c];
            }
            y[k] = s / self.band[base];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `‖A x - b‖₂ / ‖b‖₂` (absolute when `b = 0`).
pub fn relative_residual(matrix: &SparseMatrix, x: &[f64], rhs: &[f64]) -> f64 {
    let ax = matrix.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(rhs).map(|(a, b)| a - b).collect();
    let nb = norm2(rhs);
    if nb > 0.0 {
        norm2(&r) / nb
    } else {
        norm2(&r)
    }
}

/// Jacobi-preconditioned BiCGStab.
pub fn bicgstab(
    matrix: &SparseMatrix,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, SolverError> {
    let n = matrix.n();
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = matrix.diag(i);
            if d != 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let precondition = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(a, b)| a * b).collect() };
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let nb = norm2(rhs);
    if nb == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let ax = matrix.mul_vec(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut residual = norm2(&r) / nb;
    for it in 0..max_iter {
        if residual <= tol {
            return Ok(x);
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(SolverError::Breakdown { iterations: it, residual });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precondition(&p);
        matrix.mul_vec_into(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            return Err(SolverError::Breakdown { iterations: it, residual });
        }
        alpha = rho / denom;
        let s: Vec<f64> = r.iter().zip(&v).map(|(r, v)| r - alpha * v).collect();
        if norm2(&s) / nb <= tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Ok(x);
        }
        let s_hat = precondition(&s);
        let t = matrix.mul_vec(&s_hat);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        residual = norm2(&r) / nb;
    }
    if residual <= tol {
        Ok(x)
    } else {
        Err(SolverError::NotConverged {
            iterations: max_iter,
            residual,
        })
    }
}

/// A matrix prepared for repeated solves: factorized for the direct method,
/// kept as-is for the Krylov method.
#[derive(Debug, Clone)]
pub struct LinearSolver {
    matrix: SparseMatrix,
    lu: Option<BandedLu>,
    opts: LinearSolveOptions,
}

impl LinearSolver {
    pub fn new(matrix: SparseMatrix, opts: LinearSolveOptions) -> Result<Self, SolverError> {
        if !(opts.tol > 0.0) || opts.max_iter == 0 {
            return Err(SolverError::InvalidOptions(format!(
                "tol = {}, max_iter = {}",
                opts.tol, opts.max_iter
            )));
        }
        let lu = match opts.method {
            SolveMethod::DirectLu => Some(BandedLu::factor(&matrix)?),
            SolveMethod::Bicgstab => None,
        };
        Ok(Self { matrix, lu, opts })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        if rhs.len() != self.matrix.n() {
            return Err(SolverError::Dimension {
                matrix: self.matrix.n(),
                rhs: rhs.len(),
            });
        }
        match &self.lu {
            Some(lu) => {
                let x = lu.solve(rhs);
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(SolverError::IllConditioned { residual: f64::INFINITY });
                }
                let residual = relative_residual(&self.matrix, &x, rhs);
                if !(residual <= self.opts.tol.max(1e-8)) {
                    return Err(SolverError::IllConditioned { residual });
                }
                Ok(x)
            }
            None => bicgstab(&self.matrix, rhs, None, self.opts.tol, self.opts.max_iter),
        }
    }
}

/// One-shot solve of `matrix · u = rhs`.
pub fn solve(matrix: &SparseMatrix, rhs: &[f64], opts: &LinearSolveOptions) -> Result<Vec<f64>, SolverError> {
    LinearSolver::new(matrix.clone(), *opts)?.solve(rhs)
}
