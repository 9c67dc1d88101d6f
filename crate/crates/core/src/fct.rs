//! Algebraic flux correction: artificial diffusion, mass lumping, raw and
//! linearized antidiffusive fluxes, prelimiting, the Zalesak limiter and the
//! resulting correction vector.
//!
//! Fluxes and limiters live on the off-diagonal part of the mass-matrix
//! pattern. Every unordered pair is computed once and mirrored, so fluxes are
//! exactly antisymmetric and limiters exactly symmetric.

use std::sync::Arc;

use thiserror::Error;

use crate::sparse::{Pattern, SparseMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum FctError {
    #[error("lumped mass m_{node} = {value:e} is not positive")]
    NonPositiveMass { node: usize, value: f64 },
}

/// Diagonal of the lumped mass matrix, `m_i = Σ_j m_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct LumpedMass(Vec<f64>);

impl LumpedMass {
    pub fn new(m: Vec<f64>) -> Result<Self, FctError> {
        if let Some((node, &value)) = m.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            return Err(FctError::NonPositiveMass { node, value });
        }
        Ok(Self(m))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl std::ops::Index<usize> for LumpedMass {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Antisymmetric fluxes `f_ij` on a pattern. Diagonal slots stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxMatrix(SparseMatrix);

/// Symmetric limiters `α_ij ∈ [0, 1]` on a pattern. Diagonal slots are one.
#[derive(Debug, Clone, PartialEq)]
pub struct LimiterMatrix(SparseMatrix);

impl FluxMatrix {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        Self(SparseMatrix::zeros(pattern))
    }

    /// Builds fluxes from a function evaluated once per pair `i < j`;
    /// `f_ji = -f_ij`.
    pub fn from_pairs(pattern: Arc<Pattern>, mut flux: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut m = SparseMatrix::zeros(pattern.clone());
        let vals = m.values_mut();
        for (i, j, k) in pattern.upper_pairs() {
            let f = flux(i, j, k);
            vals[k] = f;
            vals[pattern.mirror(k)] = -f;
        }
        Self(m)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        self.0.pattern()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn as_matrix(&self) -> &SparseMatrix {
        &self.0
    }

    /// `Σ_{i<j} |f_ij|`.
    pub fn magnitude(&self) -> f64 {
        self.pattern()
            .upper_pairs()
            .map(|(_, _, k)| self.values()[k].abs())
            .sum()
    }

    /// Row sums `Σ_j f_ij`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.0.n()).map(|i| self.0.row_sum(i)).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let values = self.values().iter().map(|v| v * s).collect();
        Self(SparseMatrix::from_values(self.pattern().clone(), values))
    }
}

impl LimiterMatrix {
    /// The same value on every pair.
    pub fn constant(pattern: Arc<Pattern>, value: f64) -> Self {
        assert!((0.0..=1.0).contains(&value), "limiter value {value} outside [0, 1]");
        let mut m = SparseMatrix::from_values(pattern.clone(), vec![value; pattern.nnz()]);
        for i in 0..pattern.n() {
            m.values_mut()[pattern.diag_index(i)] = 1.0;
        }
        Self(m)
    }

    /// Builds limiters from a function evaluated once per pair `i < j`.
    pub fn from_pairs(pattern: Arc<Pattern>, mut alpha: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut m = Self::constant(pattern.clone(), 1.0).0;
        let vals = m.values_mut();
        for (i, j, k) in pattern.upper_pairs() {
            let a = alpha(i, j, k);
            debug_assert!((0.0..=1.0).contains(&a));
            vals[k] = a;
            vals[pattern.mirror(k)] = a;
        }
        Self(m)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        self.0.pattern()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    /// Replaces the values on pairs for which `keep` returns false by
    /// `other`'s values.
    pub fn merge(&self, other: &LimiterMatrix, keep: impl Fn(usize, usize) -> bool) -> Self {
        let pattern = self.pattern().clone();
        Self::from_pairs(pattern, |i, j, k| {
            if keep(i, j) {
                self.values()[k]
            } else {
                other.values()[k]
            }
        })
    }
}

/// Artificial diffusion `d_ij = -max{a_ij, 0, a_ji}` (`i ≠ j`), `d_ii = -Σ_{j≠i} d_ij`.
pub fn artificial_diffusion(a: &SparseMatrix) -> SparseMatrix {
    let pattern = a.pattern().clone();
    let av = a.values();
    let mut d = SparseMatrix::zeros(pattern.clone());
    {
        let dv = d.values_mut();
        for (_, _, k) in pattern.upper_pairs() {
            let m = pattern.mirror(k);
            let v = -av[k].max(0.0).max(av[m]);
            dv[k] = v;
            dv[m] = v;
        }
    }
    let mut diag = vec![0.0; pattern.n()];
    for (i, di) in diag.iter_mut().enumerate() {
        let off: f64 = pattern
            .row_range(i)
            .filter(|&k| pattern.col(k) != i)
            .map(|k| d.values()[k])
            .sum();
        *di = -off;
    }
    for (i, di) in diag.into_iter().enumerate() {
        d.values_mut()[pattern.diag_index(i)] = di;
    }
    d
}

/// Row sums of the consistent mass matrix.
pub fn lump(mass: &SparseMatrix) -> Result<LumpedMass, FctError> {
    LumpedMass::new((0..mass.n()).map(|i| mass.row_sum(i)).collect())
}

/// `ν = M_L^{-1}(f - 𝔸u)`, the explicit rate of change of the low-order scheme.
pub fn explicit_rate(ml: &LumpedMass, abar: &SparseMatrix, u: &[f64], f: &[f64]) -> Vec<f64> {
    let au = abar.mul_vec(u);
    au.iter()
        .zip(f)
        .zip(ml.as_slice())
        .map(|((au, f), m)| (f - au) / m)
        .collect()
}

/// Forward-Euler half step `ū = u^{n-1} - τ/2 M_L^{-1}(𝔸u^{n-1} - f^{n-1})`.
///
/// Boundary entries are returned as computed; the stepper overwrites them
/// with the boundary data.
pub fn predictor_half_step(
    ml: &LumpedMass,
    abar: &SparseMatrix,
    u_prev: &[f64],
    f_prev: &[f64],
    tau: f64,
) -> Vec<f64> {
    let nu = explicit_rate(ml, abar, u_prev, f_prev);
    u_prev
        .iter()
        .zip(&nu)
        .map(|(u, nu)| u + 0.5 * tau * nu)
        .collect()
}

/// Fluxes of the nonlinear scheme:
/// `f_ij = m_ij[(u_i - u_i^{n-1}) - (u_j - u_j^{n-1})] + τ d_ij (u_j - u_i)`.
pub fn raw_fluxes(
    mc: &SparseMatrix,
    d: &SparseMatrix,
    u_new: &[f64],
    u_prev: &[f64],
    tau: f64,
) -> FluxMatrix {
    let (mv, dv) = (mc.values(), d.values());
    FluxMatrix::from_pairs(mc.pattern().clone(), |i, j, k| {
        let du_i = u_new[i] - u_prev[i];
        let du_j = u_new[j] - u_prev[j];
        mv[k] * (du_i - du_j) + tau * dv[k] * (u_new[j] - u_new[i])
    })
}

/// Fluxes of the linearized scheme given the explicit rate `ν`:
/// `f_ij = τ m_ij(ν_i - ν_j) + τ d_ij[u_j^{n-1} - u_i^{n-1} + τ(ν_j - ν_i)]`.
pub fn linear_fluxes_from_rate(
    mc: &SparseMatrix,
    d: &SparseMatrix,
    nu: &[f64],
    u_prev: &[f64],
    tau: f64,
) -> FluxMatrix {
    let (mv, dv) = (mc.values(), d.values());
    FluxMatrix::from_pairs(mc.pattern().clone(), |i, j, k| {
        tau * mv[k] * (nu[i] - nu[j]) + tau * dv[k] * (u_prev[j] - u_prev[i] + tau * (nu[j] - nu[i]))
    })
}

/// Linearized fluxes with `ν = M_L^{-1}(f^{n-1} - 𝔸u^{n-1})`.
pub fn linear_fluxes(
    mc: &SparseMatrix,
    d: &SparseMatrix,
    ml: &LumpedMass,
    abar: &SparseMatrix,
    u_prev: &[f64],
    f_prev: &[f64],
    tau: f64,
) -> FluxMatrix {
    let nu = explicit_rate(ml, abar, u_prev, f_prev);
    linear_fluxes_from_rate(mc, d, &nu, u_prev, tau)
}

/// Cancels fluxes that point down the gradient of `ū`: if
/// `f_ij (ū_i - ū_j) < 0` then `f_ij = f_ji = 0`.
pub fn prelimit(fluxes: &FluxMatrix, ubar: &[f64]) -> FluxMatrix {
    let pattern = fluxes.pattern().clone();
    let fv = fluxes.values();
    FluxMatrix::from_pairs(pattern, |i, j, k| {
        let f = fv[k];
        if f * (ubar[i] - ubar[j]) < 0.0 {
            0.0
        } else {
            f
        }
    })
}

/// Nodal correction factors of the Zalesak limiter.
#[derive(Debug, Clone, PartialEq)]
pub struct ZalesakFactors {
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
    pub q_plus: Vec<f64>,
    pub q_minus: Vec<f64>,
    pub r_plus: Vec<f64>,
    pub r_minus: Vec<f64>,
}

/// Sums of positive/negative fluxes, local bounds from `ū` over the pattern
/// neighbors, and the ratios `R_i^± = min{1, m_i Q_i^± / P_i^±}` (one when
/// `P_i^± = 0`).
pub fn zalesak_factors(fluxes: &FluxMatrix, ubar: &[f64], ml: &LumpedMass) -> ZalesakFactors {
    let pattern = fluxes.pattern();
    let n = pattern.n();
    let fv = fluxes.values();
    let mut z = ZalesakFactors {
        p_plus: vec![0.0; n],
        p_minus: vec![0.0; n],
        q_plus: vec![0.0; n],
        q_minus: vec![0.0; n],
        r_plus: vec![1.0; n],
        r_minus: vec![1.0; n],
    };
    for i in 0..n {
        for k in pattern.row_range(i) {
            let j = pattern.col(k);
            if j == i {
                continue;
            }
            let f = fv[k];
            z.p_plus[i] += f.max(0.0);
            z.p_minus[i] += f.min(0.0);
            let diff = ubar[j] - ubar[i];
            z.q_plus[i] = z.q_plus[i].max(diff);
            z.q_minus[i] = z.q_minus[i].min(diff);
        }
        if z.p_plus[i] != 0.0 {
            z.r_plus[i] = (ml[i] * z.q_plus[i] / z.p_plus[i]).min(1.0);
        }
        if z.p_minus[i] != 0.0 {
            z.r_minus[i] = (ml[i] * z.q_minus[i] / z.p_minus[i]).min(1.0);
        }
    }
    z
}

impl ZalesakFactors {
    /// Sets `R_i^± = 1` on the flagged nodes. Used for Dirichlet nodes, whose
    /// values are imposed and need no bound.
    pub fn release(&mut self, nodes: &[bool]) {
        for (i, _) in nodes.iter().enumerate().filter(|(_, &b)| b) {
            self.r_plus[i] = 1.0;
            self.r_minus[i] = 1.0;
        }
    }

    /// `α_ij = min{R_i^+, R_j^-}` if `f_ij > 0`, else `min{R_i^-, R_j^+}`.
    /// The value is computed for `i < j` and mirrored.
    pub fn limiter(&self, fluxes: &FluxMatrix) -> LimiterMatrix {
        let fv = fluxes.values();
        LimiterMatrix::from_pairs(fluxes.pattern().clone(), |i, j, k| {
            if fv[k] > 0.0 {
                self.r_plus[i].min(self.r_minus[j])
            } else {
                self.r_minus[i].min(self.r_plus[j])
            }
        })
    }
}

/// Zalesak limiter with the factors of [`zalesak_factors`].
pub fn zalesak(fluxes: &FluxMatrix, ubar: &[f64], ml: &LumpedMass) -> LimiterMatrix {
    zalesak_factors(fluxes, ubar, ml).limiter(fluxes)
}

/// `f*_i = Σ_j α_ij f_ij`, summed in pattern order.
pub fn correction_vector(alpha: &LimiterMatrix, fluxes: &FluxMatrix) -> Vec<f64> {
    let pattern = fluxes.pattern();
    let (av, fv) = (alpha.values(), fluxes.values());
    (0..pattern.n())
        .map(|i| pattern.row_range(i).map(|k| av[k] * fv[k]).sum())
        .collect()
}

/// One offending entry of an M-matrix check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MMatrixViolation {
    NonPositiveDiagonal { row: usize, value: f64 },
    PositiveOffDiagonal { row: usize, col: usize, value: f64 },
    NotDiagonallyDominant { row: usize, excess: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MMatrixReport {
    pub positive_diagonal: bool,
    pub nonpositive_off_diagonal: bool,
    pub weakly_diagonally_dominant: bool,
    pub strictly_dominant_rows: usize,
    pub violations: Vec<MMatrixViolation>,
}

impl MMatrixReport {
    pub fn passed(&self) -> bool {
        self.positive_diagonal
            && self.nonpositive_off_diagonal
            && self.weakly_diagonally_dominant
            && self.strictly_dominant_rows > 0
    }
}

/// Checks the sufficient M-matrix conditions for `M_L + τ𝔸`: positive
/// diagonal, nonpositive off-diagonal entries, weak diagonal dominance with
/// at least one strictly dominant row.
pub fn m_matrix_check(ml: &LumpedMass, abar: &SparseMatrix, tau: f64) -> MMatrixReport {
    let mut report = MMatrixReport {
        positive_diagonal: true,
        nonpositive_off_diagonal: true,
        weakly_diagonally_dominant: true,
        strictly_dominant_rows: 0,
        violations: Vec::new(),
    };
    let scale = abar.max_abs() * tau;
    let off_tol = 1e-14 * scale;
    for i in 0..abar.n() {
        let diag = ml[i] + tau * abar.diag(i);
        if !(diag > 0.0) {
            report.positive_diagonal = false;
            report
                .violations
                .push(MMatrixViolation::NonPositiveDiagonal { row: i, value: diag });
        }
        let mut off_sum = 0.0;
        for (j, v) in abar.row(i).filter(|&(j, _)| j != i) {
            let v = tau * v;
            if v > off_tol {
                report.nonpositive_off_diagonal = false;
                report
                    .violations
                    .push(MMatrixViolation::PositiveOffDiagonal { row: i, col: j, value: v });
            }
            off_sum += v.abs();
        }
        let excess = diag - off_sum;
        if excess > 0.0 {
            report.strictly_dominant_rows += 1;
        } else if excess < -1e-14 * (diag.abs() + off_sum) {
            report.weakly_diagonally_dominant = false;
            report
                .violations
                .push(MMatrixViolation::NotDiagonallyDominant { row: i, excess });
        }
    }
    report
}

/// Pairs whose limiter exceeds the stability bound
/// `min{τ, c0/2} / constant²`, where `constant` stands for the product of the
/// trace, inverse and mass-entry constants. The bound is never enforced.
pub fn limiter_bound_violations(
    alpha: &LimiterMatrix,
    tau: f64,
    c0: f64,
    constant: f64,
) -> Vec<(usize, usize, f64)> {
    let bound = tau.min(0.5 * c0) / (constant * constant);
    alpha
        .pattern()
        .upper_pairs()
        .map(|(i, j, k)| (i, j, alpha.values()[k]))
        .filter(|&(_, _, a)| a > bound)
        .collect()
}
