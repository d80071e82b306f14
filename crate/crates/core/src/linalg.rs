//! Small dense linear algebra: row-major matrices, packed symmetric matrices,
//! an envelope-aware Cholesky factorization and the saddle-point solve used by
//! the sensitivity system.
//!
//! Everything here is dense. The symmetric type tracks, per row, the first
//! column that has ever been written, and the factorization skips the zero
//! prefix of each row. Fill-in of a Cholesky factor never leaves that
//! envelope, so finite element matrices with a sensible node numbering factor
//! in time proportional to `n * bandwidth^2` while still being stored densely.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    /// Builds a matrix from its columns.
    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let c = cols.len();
        let r = cols.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), r, "ragged columns");
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows);
        for (i, x) in v.iter().enumerate() {
            self[(i, j)] = *x;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `self * x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self^T * y`.
    pub fn tr_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "tr_matvec dimension");
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            if *yi == 0.0 {
                continue;
            }
            axpy(*yi, self.row(i), &mut out);
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for (k, a) in self.row(i).iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                axpy(*a, src, out.row_mut(i));
            }
        }
        out
    }

    /// Selects a subset of rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.row(i));
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Symmetric matrix stored as packed lower-triangle rows.
///
/// Only `(i, j)` with `j <= i` is stored; accessors mirror the other half, so
/// the matrix is symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
    first: Vec<usize>,
}

#[inline]
fn packed_offset(i: usize) -> usize {
    i * (i + 1) / 2
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; packed_offset(n)], first: (0..n).collect() }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Takes the lower triangle of a square dense matrix.
    pub fn from_lower(a: &Matrix) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "square matrix required");
        let mut m = Self::zeros(a.nrows());
        for i in 0..a.nrows() {
            for j in 0..=i {
                if a[(i, j)] != 0.0 {
                    m.set(i, j, a[(i, j)]);
                }
            }
        }
        m
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        packed_offset(r) + c
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        if c < self.first[r] {
            return 0.0;
        }
        self.data[packed_offset(r) + c]
    }

    #[inline]
    fn touch(&mut self, i: usize, j: usize) {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        if c < self.first[r] {
            self.first[r] = c;
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.touch(i, j);
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    /// Adds `v` to entry `(i, j)` (and hence `(j, i)`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.touch(i, j);
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// First stored column of row `i`.
    #[inline]
    pub fn envelope_start(&self, i: usize) -> usize {
        self.first[i]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[packed_offset(i) + i]).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec dimension");
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let f = self.first[i];
            let row = &self.data[packed_offset(i) + f..packed_offset(i) + i + 1];
            let mut acc = 0.0;
            for (k, a) in row.iter().enumerate() {
                let j = f + k;
                acc += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
            y[i] += acc;
        }
        y
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Lower Cholesky factor `A = L L^T`, stored packed with the envelope of `A`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
    first: Vec<usize>,
}

impl Cholesky {
    /// Factors `a`; a pivot that is not strictly positive is an error.
    pub fn new(a: &SymMatrix) -> Result<Self> {
        Self::factor(a, 0.0).map_err(|pivot| Error::NotPositiveDefinite { pivot })
    }

    /// Factors `a`, rejecting pivots `d_i <= rel_tol * a_ii`.
    ///
    /// Used where near-singularity signals a structural defect, for instance
    /// linearly dependent constraint rows in a Schur complement.
    pub fn with_tolerance(a: &SymMatrix, rel_tol: f64) -> Result<Self> {
        Self::factor(a, rel_tol).map_err(|pivot| Error::NotPositiveDefinite { pivot })
    }

    fn factor(a: &SymMatrix, rel_tol: f64) -> std::result::Result<Self, usize> {
        let n = a.n;
        let first = a.first.clone();
        let mut l = a.data.clone();
        for i in 0..n {
            let oi = packed_offset(i);
            let fi = first[i];
            for j in fi..=i {
                let oj = packed_offset(j);
                let start = fi.max(first[j]);
                let s = {
                    let ri = &l[oi + start..oi + j];
                    let rj = &l[oj + start..oj + j];
                    l[oi + j] - dot(ri, rj)
                };
                if j < i {
                    l[oi + j] = s / l[oj + j];
                } else {
                    let aii = a.data[oi + i];
                    if !(s > rel_tol * aii.abs()) || !s.is_finite() || s <= 0.0 {
                        return Err(i);
                    }
                    l[oi + i] = s.sqrt();
                }
            }
        }
        Ok(Self { n, l, first })
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let oi = packed_offset(i);
            let f = self.first[i];
            let s = b[i] - dot(&self.l[oi + f..oi + i], &b[f..i]);
            b[i] = s / self.l[oi + i];
        }
    }

    /// Solves `L^T x = y` in place.
    pub fn solve_upper_in_place(&self, y: &mut [f64]) {
        assert_eq!(y.len(), self.n);
        for i in (0..self.n).rev() {
            let oi = packed_offset(i);
            let xi = y[i] / self.l[oi + i];
            y[i] = xi;
            let f = self.first[i];
            if xi != 0.0 {
                for (k, lik) in self.l[oi + f..oi + i].iter().enumerate() {
                    y[f + k] -= lik * xi;
                }
            }
        }
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.solve_lower_in_place(b);
        self.solve_upper_in_place(b);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `L^{-1} b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        x
    }

    /// `log det A = 2 sum log L_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| self.l[packed_offset(i) + i].ln()).sum::<f64>() * 2.0
    }

    /// Solves for every column of `b^T`, i.e. returns `A^{-1} R^T` for a
    /// row-major `R` (each row of `r` is one right-hand side).
    pub fn solve_rows_transposed(&self, r: &Matrix) -> Matrix {
        assert_eq!(r.ncols(), self.n);
        let mut out = Matrix::zeros(self.n, r.nrows());
        for k in 0..r.nrows() {
            let x = self.solve(r.row(k));
            out.set_column(k, &x);
        }
        out
    }
}

/// Solver for `[K  -G^T; G  0] [x; y] = [r1; r2]` with `K` positive definite
/// and `G` of full row rank, via the Schur complement `G K^{-1} G^T`.
///
/// The Schur factorization is built once so several right-hand sides (one
/// per design variable) share it.
#[derive(Debug, Clone)]
pub struct SaddleSystem<'a> {
    k: &'a Cholesky,
    g: Matrix,
    kinv_gt: Matrix,
    schur: Option<Cholesky>,
}

/// Relative pivot threshold below which the Schur complement is declared
/// rank deficient.
pub const SCHUR_RANK_TOL: f64 = 1e-10;

impl<'a> SaddleSystem<'a> {
    pub fn new(k: &'a Cholesky, g: Matrix) -> Result<Self> {
        if g.nrows() > 0 && g.ncols() != k.order() {
            return Err(Error::Dimension(format!(
                "constraint block has {} columns, stiffness has order {}",
                g.ncols(),
                k.order()
            )));
        }
        if g.nrows() == 0 {
            return Ok(Self { k, g, kinv_gt: Matrix::zeros(k.order(), 0), schur: None });
        }
        let kinv_gt = k.solve_rows_transposed(&g);
        let s = SymMatrix::from_lower(&g.matmul(&kinv_gt));
        let schur = Cholesky::with_tolerance(&s, SCHUR_RANK_TOL).map_err(|e| match e {
            Error::NotPositiveDefinite { pivot } => Error::RankDeficient { pivot },
            other => other,
        })?;
        Ok(Self { k, g, kinv_gt, schur: Some(schur) })
    }

    pub fn n_constraints(&self) -> usize {
        self.g.nrows()
    }

    pub fn solve(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(r2.len(), self.g.nrows());
        let k_r1 = self.k.solve(r1);
        let Some(schur) = &self.schur else {
            return (k_r1, Vec::new());
        };
        let g_kr1 = self.g.matvec(&k_r1);
        let rhs: Vec<f64> = r2.iter().zip(&g_kr1).map(|(a, b)| a - b).collect();
        let y = schur.solve(&rhs);
        let mut x = k_r1;
        axpy_mat(&self.kinv_gt, &y, &mut x);
        (x, y)
    }
}

/// One-shot saddle solve; see [`SaddleSystem`].
pub fn saddle_solve(k: &Cholesky, g: &Matrix, r1: &[f64], r2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let sys = SaddleSystem::new(k, g.clone())?;
    Ok(sys.solve(r1, r2))
}

/// `out += M y` for `M` stored row-major.
fn axpy_mat(m: &Matrix, y: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o += dot(m.row(i), y);
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// `y += alpha x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}
