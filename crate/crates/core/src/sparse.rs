//! Compressed sparse row matrices and a direct LU solver.

use std::io::{self, Write};

use faer::prelude::*;
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Accumulates `(row, col, value)` contributions; duplicates are summed on
/// [`TripletBuilder::build`].
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Adds `scale · m` with the block's origin at `(row0, col0)`.
    pub fn add_block(&mut self, row0: usize, col0: usize, m: &SparseMatrix, scale: f64) {
        for (i, j, v) in m.iter() {
            self.add(row0 + i, col0 + j, scale * v);
        }
    }

    /// Adds `scale · mᵀ` with the block's origin at `(row0, col0)`.
    pub fn add_block_transposed(&mut self, row0: usize, col0: usize, m: &SparseMatrix, scale: f64) {
        for (i, j, v) in m.iter() {
            self.add(row0 + j, col0 + i, scale * v);
        }
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// CSR matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn matvec_transposed(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, j, v) in self.iter() {
            y[j] += v * x[i];
        }
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::new(self.ncols, self.nrows);
        for (i, j, v) in self.iter() {
            b.add(j, i, v);
        }
        b.build()
    }

    /// `a · self + b · other`.
    pub fn linear_combination(&self, a: f64, other: &SparseMatrix, b: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = TripletBuilder::new(self.nrows, self.ncols);
        t.add_block(0, 0, self, a);
        t.add_block(0, 0, other, b);
        t.build()
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= a);
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij − A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.iter()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Dense submatrix on the given (sorted) index set.
    pub fn dense_submatrix(&self, keep: &[usize]) -> Mat<f64> {
        let mut pos = vec![usize::MAX; self.nrows.max(self.ncols)];
        for (k, &i) in keep.iter().enumerate() {
            pos[i] = k;
        }
        let mut m = Mat::<f64>::zeros(keep.len(), keep.len());
        for (i, j, v) in self.iter() {
            let (a, b) = (pos[i], pos[j]);
            if a != usize::MAX && b != usize::MAX {
                m[(a, b)] += v;
            }
        }
        m
    }

    /// First row with no stored nonzero, if any.
    pub fn first_empty_row(&self) -> Option<usize> {
        (0..self.nrows).find(|&i| self.row(i).all(|(_, v)| v == 0.0))
    }

    pub fn first_empty_col(&self) -> Option<usize> {
        let mut seen = vec![false; self.ncols];
        for (_, j, v) in self.iter() {
            if v != 0.0 {
                seen[j] = true;
            }
        }
        seen.iter().position(|s| !s)
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let triplets: Vec<_> = self.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &triplets)
            .map_err(|e| Error::Factorization(format!("{e:?}")))
    }

    /// Writes the matrix in Matrix Market coordinate format (1-based).
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.iter() {
            writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Relative residual contract of [`SparseLu::solve`].
pub const RESIDUAL_TOLERANCE: f64 = 1e-11;

const MAX_REFINEMENT_STEPS: usize = 5;
const FLOOR_FACTOR: f64 = 8.0;

/// Sparse LU factorization with partial pivoting.
pub struct SparseLu {
    matrix: SparseMatrix,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu")
            .field("n", &self.matrix.nrows())
            .field("nnz", &self.matrix.nnz())
            .finish()
    }
}

impl SparseLu {
    pub fn factor(matrix: SparseMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        if let Some(row) = matrix.first_empty_row().or_else(|| matrix.first_empty_col()) {
            return Err(Error::SingularMatrix { row });
        }
        let lu = matrix.to_faer()?.sp_lu().map_err(|e| match e {
            LuError::SymbolicSingular { index } => Error::SingularMatrix { row: index },
            LuError::Generic(e) => Error::Factorization(format!("{e:?}")),
        })?;
        Ok(Self { matrix, lu })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_in_place(x.as_mut());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solves `A x = b` with iterative refinement and checks the relative
    /// residual against [`RESIDUAL_TOLERANCE`], or against a small multiple of
    /// [`SparseLu::rounding_floor`] when cancellation makes that unreachable.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.nrows();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let b_norm = norm2(b);
        if b_norm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = self.raw_solve(b);
        if let Some(row) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix { row });
        }
        let mut residual = self.relative_residual(&x, b);
        for _ in 0..MAX_REFINEMENT_STEPS {
            if residual <= 0.1 * RESIDUAL_TOLERANCE {
                break;
            }
            let r: Vec<f64> = b.iter().zip(self.matrix.matvec(&x)).map(|(b, ax)| b - ax).collect();
            let dx = self.raw_solve(&r);
            let candidate: Vec<f64> = x.iter().zip(dx).map(|(x, d)| x + d).collect();
            let next = self.relative_residual(&candidate, b);
            if !(next < residual) {
                break;
            }
            x = candidate;
            residual = next;
        }
        let tolerance = RESIDUAL_TOLERANCE.max(FLOOR_FACTOR * self.rounding_floor(&x, b));
        if !(residual <= tolerance) {
            return Err(Error::ResidualTooLarge { residual, tolerance });
        }
        Ok(x)
    }

    /// `ε ‖|A||x|‖₂ / ‖b‖₂`, the relative residual that rounding alone can
    /// produce when evaluating `A x` in double precision.
    pub fn rounding_floor(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.matrix.nrows()];
        for (i, j, v) in self.matrix.iter() {
            ax[i] += v.abs() * x[j].abs();
        }
        f64::EPSILON * norm2(&ax) / norm2(b)
    }

    /// `‖A x − b‖₂ / ‖b‖₂`.
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.matrix.matvec(x);
        let r: f64 = ax.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        r / norm2(b)
    }
}
