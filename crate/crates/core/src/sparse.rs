//! Compressed-row matrices over a structurally symmetric pattern.

use std::sync::Arc;

use crate::mesh::TriMesh;

/// Structurally symmetric CSR sparsity pattern with diagonal entries always
/// present.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    diag: Vec<usize>,
    /// `mirror[k]` is the storage index of the transposed entry of `k`.
    mirror: Vec<usize>,
}

impl Pattern {
    /// Builds a pattern from per-row column lists. The union with the
    /// transpose and the diagonal is taken, so the result is always symmetric.
    pub fn from_rows(n: usize, rows: &[Vec<usize>]) -> Self {
        assert_eq!(rows.len(), n);
        let mut sets: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for (i, cols) in rows.iter().enumerate() {
            for &j in cols {
                assert!(j < n, "column {j} out of range");
                sets[i].push(j);
                sets[j].push(i);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for set in &mut sets {
            set.sort_unstable();
            set.dedup();
            col_idx.extend_from_slice(set);
            row_ptr.push(col_idx.len());
        }
        let mut p = Self {
            n,
            row_ptr,
            col_idx,
            diag: Vec::new(),
            mirror: Vec::new(),
        };
        p.diag = (0..n).map(|i| p.find(i, i).unwrap()).collect();
        p.mirror = (0..n)
            .flat_map(|i| p.row_range(i).map(move |k| (i, k)))
            .map(|(i, k)| p.find(p.col_idx[k], i).unwrap())
            .collect();
        p
    }

    /// Node connectivity of a P1 mesh: `(i, j)` present iff `i` and `j` share
    /// a triangle.
    pub fn from_mesh(mesh: &TriMesh) -> Self {
        let mut rows = vec![Vec::new(); mesh.num_nodes()];
        for &[a, b, c] in mesh.triangles() {
            rows[a].extend_from_slice(&[b, c]);
            rows[b].extend_from_slice(&[a, c]);
            rows[c].extend_from_slice(&[a, b]);
        }
        Self::from_rows(mesh.num_nodes(), &rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn col(&self, k: usize) -> usize {
        self.col_idx[k]
    }

    pub fn diag_index(&self, i: usize) -> usize {
        self.diag[i]
    }

    pub fn mirror(&self, k: usize) -> usize {
        self.mirror[k]
    }

    /// Storage index of entry `(i, j)`, if it belongs to the pattern.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let range = self.row_range(i);
        self.col_idx[range.clone()]
            .binary_search(&j)
            .ok()
            .map(|off| range.start + off)
    }

    /// Iterates `(i, j, k)` over strictly upper entries `i < j`; `k` is the
    /// storage index of `(i, j)`.
    pub fn upper_pairs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.row_range(i)
                .filter(move |&k| self.col_idx[k] > i)
                .map(move |k| (i, self.col_idx[k], k))
        })
    }
}

/// Square CSR matrix. Several matrices may share one [`Pattern`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn from_values(pattern: Arc<Pattern>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), pattern.nnz());
        Self { pattern, values }
    }

    /// Dense row-major input; nonzeros and their transposed positions form
    /// the pattern.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let cols: Vec<Vec<usize>> = rows
            .iter()
            .map(|r| {
                assert_eq!(r.len(), n, "matrix must be square");
                (0..n).filter(|&j| r[j] != 0.0).collect()
            })
            .collect();
        let pattern = Arc::new(Pattern::from_rows(n, &cols));
        let mut m = Self::zeros(pattern);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    m.set(i, j, v);
                }
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let pattern = Arc::new(Pattern::from_rows(n, &vec![Vec::new(); n]));
        Self::from_values(pattern, vec![1.0; n])
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Sets an entry of the pattern.
    ///
    /// # Panics
    /// If `(i, j)` is not part of the pattern.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .pattern
            .find(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) not in pattern"));
        self.values[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .pattern
            .find(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) not in pattern"));
        self.values[k] += v;
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.values[self.pattern.diag[i]]
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.pattern
            .row_range(i)
            .map(move |k| (self.pattern.col_idx[k], self.values[k]))
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n());
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `self + s * other`; both must share the same pattern.
    pub fn add_scaled(&self, s: f64, other: &SparseMatrix) -> SparseMatrix {
        assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern,
            "patterns differ"
        );
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + s * b)
            .collect();
        Self::from_values(self.pattern.clone(), values)
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        Self::from_values(self.pattern.clone(), self.values.iter().map(|v| s * v).collect())
    }

    pub fn add_diagonal(&mut self, diag: &[f64]) {
        for (i, d) in diag.iter().enumerate() {
            let k = self.pattern.diag[i];
            self.values[k] += d;
        }
    }

    /// Max absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}
