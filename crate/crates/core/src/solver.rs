//! Compressed sparse row matrices and a direct sparse LU backed by `faer`.
//!
//! A CSR matrix read as compressed-column storage is its transpose, so the
//! factorization is computed for `Aᵀ` straight from the CSR arrays and
//! `A x = b` is solved as a transposed solve. No copy or conversion is made.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;

use crate::error::SolverError;

/// Sparsity structure: sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrPattern {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl CsrPattern {
    /// Builds a pattern from per-row column lists (duplicates allowed).
    pub fn from_rows(n_cols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            debug_assert!(row.last().map_or(true, |&c| c < n_cols));
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        CsrPattern {
            n_rows: rows.len(),
            n_cols,
            row_ptr,
            col_idx,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row(&self, r: usize) -> std::ops::Range<usize> {
        self.row_ptr[r]..self.row_ptr[r + 1]
    }

    /// Position of entry `(r, c)` in the value array.
    pub fn find(&self, r: usize, c: usize) -> Option<usize> {
        let range = self.row(r);
        self.col_idx[range.clone()].binary_search(&c).ok().map(|k| range.start + k)
    }
}

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pattern: Arc<CsrPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        CsrMatrix { pattern, values }
    }

    pub fn from_parts(pattern: Arc<CsrPattern>, values: Vec<f64>) -> Self {
        assert_eq!(pattern.nnz(), values.len());
        CsrMatrix { pattern, values }
    }

    /// Sums duplicate triplets.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); n_rows];
        for &(r, c, _) in triplets {
            rows[r].push(c);
        }
        let pattern = Arc::new(CsrPattern::from_rows(n_cols, rows));
        let mut m = CsrMatrix::zeros(pattern);
        for &(r, c, v) in triplets {
            m.add(r, c, v);
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        CsrMatrix::from_triplets(n, n, &t)
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn n_rows(&self) -> usize {
        self.pattern.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.pattern.n_cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pattern.find(r, c).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to an entry that must exist in the pattern.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let k = self.pattern.find(r, c).unwrap_or_else(|| panic!("entry ({r}, {c}) not in pattern"));
        self.values[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols());
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.pattern.row(r) {
                s += self.values[k] * x[self.pattern.col_idx[k]];
            }
            *yr = s;
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for (r, xr) in x.iter().enumerate() {
            let mut row = 0.0;
            for k in self.pattern.row(r) {
                row += self.values[k] * y[self.pattern.col_idx[k]];
            }
            s += xr * row;
        }
        s
    }

    /// `self += alpha · other`; both must share a pattern.
    pub fn axpy(&mut self, alpha: f64, other: &CsrMatrix) {
        assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern) || *self.pattern == *other.pattern,
            "patterns differ"
        );
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        CsrMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols()]; self.n_rows()];
        for r in 0..self.n_rows() {
            for k in self.pattern.row(r) {
                d[r][self.pattern.col_idx[k]] += self.values[k];
            }
        }
        d
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Vec::with_capacity(self.values.len());
        for r in 0..self.n_rows() {
            for k in self.pattern.row(r) {
                t.push((self.pattern.col_idx[k], r, self.values[k]));
            }
        }
        CsrMatrix::from_triplets(self.n_cols(), self.n_rows(), &t)
    }

    /// Largest `|a_ij − a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n_rows() {
            for k in self.pattern.row(r) {
                let c = self.pattern.col_idx[k];
                worst = worst.max((self.values[k] - self.get(c, r)).abs());
            }
        }
        worst
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `‖A x − b‖ / ‖b‖`, or `‖A x − b‖` when `b = 0`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let nb = norm(b);
    if nb > 0.0 {
        norm(&r) / nb
    } else {
        norm(&r)
    }
}

/// Symbolic analysis that can be reused across matrices sharing a pattern.
#[derive(Default, Clone)]
pub struct SymbolicCache {
    entry: Option<(Arc<CsrPattern>, SymbolicLu<usize>)>,
}

impl std::fmt::Debug for SymbolicCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymbolicCache").field("cached", &self.entry.is_some()).finish()
    }
}

impl SymbolicCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&mut self, pattern: &Arc<CsrPattern>) -> Result<SymbolicLu<usize>, SolverError> {
        if let Some((p, sym)) = &self.entry {
            if Arc::ptr_eq(p, pattern) {
                return Ok(sym.clone());
            }
        }
        let sym = SymbolicLu::try_new(transpose_view(pattern)).map_err(|e| SolverError::Backend(format!("{e:?}")))?;
        self.entry = Some((pattern.clone(), sym.clone()));
        Ok(sym)
    }
}

fn transpose_view(p: &CsrPattern) -> SymbolicSparseColMatRef<'_, usize> {
    SymbolicSparseColMatRef::new_checked(p.n_cols, p.n_rows, &p.row_ptr, None, &p.col_idx)
}

/// LU factors with partial pivoting.
pub struct SparseLu {
    n: usize,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    pub fn factorize(a: &CsrMatrix) -> Result<Self, SolverError> {
        Self::factorize_cached(a, &mut SymbolicCache::new())
    }

    /// Reuses the symbolic analysis in `cache` when `a` shares its pattern.
    pub fn factorize_cached(a: &CsrMatrix, cache: &mut SymbolicCache) -> Result<Self, SolverError> {
        let (rows, cols) = (a.n_rows(), a.n_cols());
        if rows != cols {
            return Err(SolverError::NotSquare { rows, cols });
        }
        if a.values.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite);
        }
        let sym = cache.get(&a.pattern)?;
        let view = SparseColMatRef::new(transpose_view(&a.pattern), &a.values);
        let lu = Lu::try_new_with_symbolic(sym, view).map_err(|e| match e {
            LuError::SymbolicSingular { index } => SolverError::Singular { index },
            LuError::Generic(g) => SolverError::Backend(format!("{g:?}")),
        })?;
        Ok(SparseLu { n: rows, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<(), SolverError> {
        if x.len() != self.n {
            return Err(SolverError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let n = self.n;
        let col = MatMut::from_column_major_slice_mut(x, n, 1);
        // factors belong to Aᵀ
        self.lu.solve_transpose_in_place(col);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite);
        }
        Ok(())
    }
}
