//! Dense linear-algebra kernel.
//!
//! [`Matrix`] is a row-major `f64` matrix. Factorizations (SVD, symmetric
//! eigendecomposition, QR) are delegated to `nalgebra`; everything the rest of
//! the crate needs on top of them (norms, pseudo-inverse, projectors,
//! principal angles, PSD projection) lives here.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used when none is given.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Asymmetry accepted (and removed) by [`psd_project`].
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// Column vector.
    pub fn column_vector(v: &[f64]) -> Self {
        Self::from_vec(v.len(), 1, v.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows);
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    /// First `k` columns.
    pub fn leading_columns(&self, k: usize) -> Matrix {
        assert!(k <= self.cols);
        Matrix::from_fn(self.rows, k, |i, j| self[(i, j)])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Matrix product. Panics on inner-dimension mismatch.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul: {}x{} times {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let n = other.cols;
        let mut out = Matrix::zeros(self.rows, n);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · selfᵀ`, computed on the upper triangle and mirrored so the
    /// result is exactly symmetric.
    pub fn gram_outer(&self) -> Matrix {
        let n = self.rows;
        let k = self.cols;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            let ri = &self.data[i * k..(i + 1) * k];
            for j in i..n {
                let rj = &self.data[j * k..(j + 1) * k];
                let v = dot(ri, rj);
                out.data[i * n + j] = v;
                out.data[j * n + i] = v;
            }
        }
        out
    }

    /// `selfᵀ · self`.
    pub fn gram_inner(&self) -> Matrix {
        self.transpose().gram_outer()
    }

    /// `selfᵀ · v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| s * x).collect(),
        }
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: f64, other: &Matrix) {
        assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Frobenius inner product `⟨A, B⟩ = trace(AᵀB)`.
    pub fn inner(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        dot(&self.data, &other.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// Largest entrywise gap `|M_ij − M_ji|`.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i]).abs());
            }
        }
        worst
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        assert!(self.is_square());
        let n = self.rows;
        let mut out = self.clone();
        for i in 0..n {
            for j in i + 1..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                out.data[i * n + j] = v;
                out.data[j * n + i] = v;
            }
        }
        out
    }

    /// Outer product `a bᵀ`.
    pub fn outer(a: &[f64], b: &[f64]) -> Matrix {
        Matrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for x in self.row(i) {
                write!(f, "{x:>12.5e} ")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape());
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Matrix::from_vec(self.rows, self.cols, data)
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape());
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Matrix::from_vec(self.rows, self.cols, data)
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

impl Mul<&Matrix> for f64 {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        rhs.scale(self)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&Matrix> for Matrix {
    fn sub_assign(&mut self, rhs: &Matrix) {
        self.axpy(-1.0, rhs);
    }
}

/// Dot product with four fixed accumulation lanes.
///
/// The lane split is part of the summation order, so results are
/// bit-reproducible for a given length.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn vec_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Thin singular value decomposition `M = left · diag(singulars) · rightᵀ`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left: Matrix,
    pub singulars: Vec<f64>,
    pub right: Matrix,
}

impl SvdResult {
    /// Number of singular values above `rank_tol · σ₁`.
    pub fn rank(&self, rank_tol: f64) -> usize {
        let cutoff = self.cutoff(rank_tol);
        self.singulars.iter().filter(|&&s| s > cutoff).count()
    }

    fn cutoff(&self, rank_tol: f64) -> f64 {
        rank_tol * self.singulars.first().copied().unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut ls = self.left.clone();
        for i in 0..ls.rows() {
            for (j, s) in self.singulars.iter().enumerate() {
                ls[(i, j)] *= s;
            }
        }
        ls.matmul(&self.right.transpose())
    }
}

// The SVD backend tests convergence against an absolute epsilon and deflates
// too early at machine epsilon on rank-deficient inputs, so inputs are brought
// to unit scale and a much tighter threshold is used.
const SVD_EPS: f64 = 1e-20;
const SVD_MAX_ITER: usize = 100_000;

fn unit_scale(m: &Matrix) -> f64 {
    let s = m.max_abs();
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

pub fn svd(m: &Matrix) -> Result<SvdResult> {
    m.ensure_finite()?;
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(SvdResult {
            left: Matrix::zeros(rows, 0),
            singulars: Vec::new(),
            right: Matrix::zeros(cols, 0),
        });
    }
    let scale = unit_scale(m);
    let dec = SVD::try_new(m.to_nalgebra() / scale, true, true, SVD_EPS, SVD_MAX_ITER)
        .ok_or(Error::NoConvergence)?;
    let u = dec.u.as_ref().ok_or(Error::NoConvergence)?;
    let v_t = dec.v_t.as_ref().ok_or(Error::NoConvergence)?;

    let mut order: Vec<usize> = (0..k).collect();
    // Stable sort keeps ties in factorization order, which is deterministic.
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));

    let mut left = Matrix::zeros(rows, k);
    let mut right = Matrix::zeros(cols, k);
    let mut singulars = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        singulars.push(dec.singular_values[src].max(0.0) * scale);
        for i in 0..rows {
            left[(i, dst)] = u[(i, src)];
        }
        for j in 0..cols {
            right[(j, dst)] = v_t[(src, j)];
        }
    }
    let out = SvdResult {
        left,
        singulars,
        right,
    };
    if (&out.reconstruct() - m).max_abs() > 1e-10 * scale * k as f64 {
        return Err(Error::NoConvergence);
    }
    Ok(out)
}

pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    m.ensure_finite()?;
    if m.rows().min(m.cols()) == 0 {
        return Ok(Vec::new());
    }
    let scale = unit_scale(m);
    let mut s: Vec<f64> = (m.to_nalgebra() / scale)
        .try_svd(false, false, SVD_EPS, SVD_MAX_ITER)
        .ok_or(Error::NoConvergence)?
        .singular_values
        .iter()
        .map(|x| x.max(0.0) * scale)
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub spectral: f64,
    pub frobenius: f64,
    pub nuclear: f64,
}

pub fn norms(m: &Matrix) -> Result<Norms> {
    let s = singular_values(m)?;
    Ok(Norms {
        spectral: s.first().copied().unwrap_or(0.0),
        frobenius: s.iter().map(|x| x * x).sum::<f64>().sqrt(),
        nuclear: s.iter().sum(),
    })
}

pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

pub fn nuclear_norm(m: &Matrix) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// Moore–Penrose pseudo-inverse; singular values at or below
/// `rank_tol · σ₁` are treated as zero.
pub fn pseudo_inverse(m: &Matrix, rank_tol: f64) -> Result<Matrix> {
    check_rank_tol(rank_tol)?;
    let dec = svd(m)?;
    let cutoff = dec.cutoff(rank_tol);
    let (rows, cols) = m.shape();
    let mut out = Matrix::zeros(cols, rows);
    for (k, &s) in dec.singulars.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let inv = 1.0 / s;
        for i in 0..cols {
            let vi = dec.right[(i, k)] * inv;
            if vi == 0.0 {
                continue;
            }
            for j in 0..rows {
                out[(i, j)] += vi * dec.left[(j, k)];
            }
        }
    }
    Ok(out)
}

/// Orthonormal basis of the column span (left singular vectors above the
/// rank cutoff). Zero matrices yield a basis with no columns.
pub fn orthonormal_basis(m: &Matrix, rank_tol: f64) -> Result<Matrix> {
    check_rank_tol(rank_tol)?;
    let dec = svd(m)?;
    let rank = dec.rank(rank_tol);
    Ok(dec.left.leading_columns(rank))
}

/// Orthogonal projector onto the column span of `m`.
pub fn col_projector(m: &Matrix, rank_tol: f64) -> Result<Matrix> {
    let q = orthonormal_basis(m, rank_tol)?;
    Ok(q.gram_outer())
}

/// Largest principal-angle sine between `col(a)` and `col(b)`:
/// `‖(I − P_b) Q_a‖₂` for an orthonormal basis `Q_a` of `col(a)`.
pub fn principal_angle_sin(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows() != b.rows() {
        return Err(Error::dims(
            format!("{} rows", a.rows()),
            format!("{} rows", b.rows()),
        ));
    }
    let qa = orthonormal_basis(a, DEFAULT_RANK_TOL)?;
    let qb = orthonormal_basis(b, DEFAULT_RANK_TOL)?;
    if qa.cols() == 0 || qb.cols() == 0 {
        return Err(Error::InvalidArgument(
            "principal angle of a zero-dimensional span".into(),
        ));
    }
    let residual = &qa - &qb.matmul(&qb.transpose().matmul(&qa));
    Ok(spectral_norm(&residual)?.clamp(0.0, 1.0))
}

/// Eigendecomposition of a symmetric matrix with eigenvalues in
/// non-increasing order; `vectors` holds the eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

pub fn sym_eigen(m: &Matrix) -> Result<SymEigen> {
    m.ensure_finite()?;
    if !m.is_square() {
        return Err(Error::dims("square matrix", format!("{}x{}", m.rows(), m.cols())));
    }
    let n = m.rows();
    let scale = unit_scale(m);
    let dec = SymmetricEigen::try_new(m.to_nalgebra() / scale, f64::EPSILON, 0).ok_or(Error::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.eigenvalues[b].total_cmp(&dec.eigenvalues[a]));
    let values = order.iter().map(|&k| dec.eigenvalues[k] * scale).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| dec.eigenvectors[(i, order[j])]);
    Ok(SymEigen { values, vectors })
}

/// `V · diag(values) · Vᵀ`, mirrored to exact symmetry.
pub fn sym_from_eigen(values: &[f64], vectors: &Matrix) -> Matrix {
    let n = vectors.rows();
    let mut scaled = vectors.clone();
    for i in 0..n {
        for (j, &v) in values.iter().enumerate() {
            scaled[(i, j)] *= v;
        }
    }
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = dot(scaled.row(i), vectors.row(j));
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Frobenius-nearest PSD matrix: clamp negative eigenvalues to zero.
///
/// Inputs with asymmetry up to [`SYMMETRY_TOL`] (relative to the largest
/// entry) are symmetrized first; anything larger is rejected.
pub fn psd_project(m: &Matrix) -> Result<Matrix> {
    m.ensure_finite()?;
    if !m.is_square() {
        return Err(Error::dims("square matrix", format!("{}x{}", m.rows(), m.cols())));
    }
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL * m.max_abs().max(1.0) {
        return Err(Error::Asymmetric(asym));
    }
    let sym = m.symmetrized();
    let eig = sym_eigen(&sym)?;
    if eig.values.iter().all(|&v| v >= 0.0) {
        return Ok(sym);
    }
    let clamped: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
    Ok(sym_from_eigen(&clamped, &eig.vectors))
}

/// Thin QR orthonormalization: returns `Q` (same shape as `m`, orthonormal
/// columns) and the diagonal of `R`.
pub fn qr_orthonormalize(m: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    m.ensure_finite()?;
    if m.cols() > m.rows() {
        return Err(Error::dims(
            "tall matrix",
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    let qr = m.to_nalgebra().qr();
    let q = Matrix::from_nalgebra(&qr.q());
    let r = qr.r();
    let diag = (0..m.cols()).map(|i| r[(i, i)]).collect();
    Ok((q, diag))
}

/// Haar-distributed orthonormal columns from a Gaussian matrix: QR with the
/// sign of each column fixed by the sign of `R`'s diagonal.
pub fn haar_from_gaussian(g: &Matrix) -> Result<Matrix> {
    let (mut q, diag) = qr_orthonormalize(g)?;
    for (j, r) in diag.iter().enumerate() {
        if *r < 0.0 {
            for i in 0..q.rows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

fn check_rank_tol(rank_tol: f64) -> Result<()> {
    if rank_tol > 0.0 && rank_tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "rank_tol must be positive and finite, got {rank_tol}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, stream, Stream};

    fn rand_matrix(seed: u64, r: usize, c: usize) -> Matrix {
        gaussian_matrix(&mut stream(seed, Stream::Probes), r, c)
    }

    fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).max_abs()
    }

    /// Eigenvalues of a symmetric 3×3 matrix from its characteristic
    /// polynomial (trigonometric solution of the depressed cubic).
    fn eig3_closed_form(a: &Matrix) -> [f64; 3] {
        let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
        let q = a.trace() / 3.0;
        let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let b = (1.0 / p) * &(a - &Matrix::identity(3).scale(q));
        let det_b = b[(0, 0)] * (b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)])
            - b[(0, 1)] * (b[(1, 0)] * b[(2, 2)] - b[(1, 2)] * b[(2, 0)])
            + b[(0, 2)] * (b[(1, 0)] * b[(2, 1)] - b[(1, 1)] * b[(2, 0)]);
        let r = (det_b / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        [e1, 3.0 * q - e1 - e3, e3]
    }

    #[test]
    fn rank_deficient_inputs_reconstruct() {
        for seed in 0..200u64 {
            let mut r = crate::rng::stream(seed, crate::rng::Stream::Probes);
            let d = 2 + (seed % 40) as usize;
            let k = 1 + (seed % 4) as usize;
            let g = crate::rng::gaussian_matrix(&mut r, d, k.min(d));
            let m = match seed % 4 {
                0 => haar_from_gaussian(&g).unwrap().gram_outer(),
                1 => g.gram_outer().scale(1e-4),
                2 => g.matmul(&crate::rng::gaussian_matrix(&mut r, k.min(d), d + 3)),
                _ => crate::rng::gaussian_matrix(&mut r, d, d),
            };
            let dec = svd(&m).unwrap();
            let err = (&dec.reconstruct() - &m).max_abs();
            assert!(err <= 1e-11 * m.max_abs().max(1e-300), "seed {seed}: {err:e}");
            let sv = singular_values(&m).unwrap();
            for (a, b) in sv.iter().zip(&dec.singulars) {
                assert!((a - b).abs() <= 1e-10 * dec.singulars[0]);
            }
        }
    }

    #[test]
    fn small_scale_inputs_stay_accurate() {
        let q = haar_from_gaussian(&Matrix::from_fn(9, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * i as f64)).unwrap();
        for scale in [1e-2, 1e-6, 1e3] {
            let m = q.gram_outer().scale(scale);
            let dec = svd(&m).unwrap();
            assert!((&dec.reconstruct() - &m).max_abs() <= 1e-12 * scale);
            for s in &dec.singulars[..3] {
                assert!((s - scale).abs() <= 1e-12 * scale);
            }
            assert_eq!(dec.rank(DEFAULT_RANK_TOL), 3);
            let eig = sym_eigen(&m).unwrap();
            assert!((eig.values[0] - scale).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn svd_identity_and_diagonal() {
        let s = svd(&Matrix::identity(3)).unwrap();
        assert_eq!(s.singulars.len(), 3);
        for v in &s.singulars {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let d = Matrix::from_diag(&[3.0, -2.0]);
        let s = svd(&d).unwrap();
        assert!((s.singulars[0] - 3.0).abs() < 1e-14);
        assert!((s.singulars[1] - 2.0).abs() < 1e-14);
        assert!(max_diff(&s.reconstruct(), &d) < 1e-12);
    }

    #[test]
    fn svd_matches_characteristic_polynomial_oracle() {
        let m = rand_matrix(11, 5, 3);
        let gram = m.gram_inner();
        let mut oracle = eig3_closed_form(&gram);
        oracle.sort_by(|a, b| b.total_cmp(a));
        let s = svd(&m).unwrap();
        for (sv, ev) in s.singulars.iter().zip(oracle) {
            assert!((sv * sv - ev).abs() <= 1e-8 * ev.abs());
        }
    }

    #[test]
    fn svd_contracts_hold() {
        for seed in 0..10 {
            let m = rand_matrix(seed, 6, 4);
            let s = svd(&m).unwrap();
            assert!(max_diff(&s.reconstruct(), &m) <= 1e-10 * m.frobenius_norm());
            assert!(s.singulars.windows(2).all(|w| w[0] >= w[1]));
            assert!(max_diff(&s.left.gram_inner(), &Matrix::identity(4)) < 1e-10);
            assert!(max_diff(&s.right.gram_inner(), &Matrix::identity(4)) < 1e-10);
        }
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut m = Matrix::identity(2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&m), Err(Error::NonFinite)));
    }

    #[test]
    fn norms_of_diagonal_and_zero() {
        let n = norms(&Matrix::from_diag(&[3.0, 4.0])).unwrap();
        assert!((n.spectral - 4.0).abs() < 1e-14);
        assert!((n.frobenius - 5.0).abs() < 1e-14);
        assert!((n.nuclear - 7.0).abs() < 1e-14);
        let z = norms(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!((z.spectral, z.frobenius, z.nuclear), (0.0, 0.0, 0.0));
    }

    #[test]
    fn nuclear_norm_matches_trace_of_gram_root() {
        // trace(sqrt(MᵀM)) from the Gram eigenvalues, via Jacobi rotations.
        let m = rand_matrix(4, 4, 4);
        let mut g = m.gram_inner();
        for _ in 0..100 {
            for p in 0..4 {
                for q in p + 1..4 {
                    if g[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = 0.5 * (2.0 * g[(p, q)]).atan2(g[(q, q)] - g[(p, p)]);
                    let (s, c) = theta.sin_cos();
                    let mut rot = Matrix::identity(4);
                    rot[(p, p)] = c;
                    rot[(q, q)] = c;
                    rot[(p, q)] = s;
                    rot[(q, p)] = -s;
                    g = rot.transpose().matmul(&g).matmul(&rot);
                }
            }
        }
        let oracle: f64 = g.diagonal().iter().map(|e| e.max(0.0).sqrt()).sum();
        let n = norms(&m).unwrap();
        assert!((n.nuclear - oracle).abs() <= 1e-8 * oracle);
        assert!(n.spectral <= n.frobenius && n.frobenius <= n.nuclear);
    }

    #[test]
    fn pseudo_inverse_cases() {
        let p = pseudo_inverse(&Matrix::from_diag(&[2.0, 0.0]), DEFAULT_RANK_TOL).unwrap();
        assert!(max_diff(&p, &Matrix::from_diag(&[0.5, 0.0])) < 1e-15);

        let a = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let inv = pseudo_inverse(&a, DEFAULT_RANK_TOL).unwrap();
        let exact = Matrix::from_rows(&[&[0.6, -0.2], &[-0.2, 0.4]]);
        assert!(max_diff(&inv, &exact) < 1e-10);

        assert_eq!(
            pseudo_inverse(&Matrix::zeros(3, 2), DEFAULT_RANK_TOL).unwrap(),
            Matrix::zeros(2, 3)
        );
    }

    #[test]
    fn pseudo_inverse_matches_normal_equations() {
        let m = rand_matrix(7, 4, 2);
        let g = m.gram_inner();
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let g_inv = Matrix::from_rows(&[
            &[g[(1, 1)] / det, -g[(0, 1)] / det],
            &[-g[(1, 0)] / det, g[(0, 0)] / det],
        ]);
        let oracle = g_inv.matmul(&m.transpose());
        let p = pseudo_inverse(&m, DEFAULT_RANK_TOL).unwrap();
        assert!(max_diff(&p, &oracle) <= 1e-8 * oracle.max_abs());

        let scale = m.frobenius_norm();
        assert!(max_diff(&m.matmul(&p).matmul(&m), &m) < 1e-8 * scale);
        assert!(max_diff(&p.matmul(&m).matmul(&p), &p) < 1e-8 * scale);
    }

    #[test]
    fn projector_cases() {
        let e1 = Matrix::column_vector(&[1.0, 0.0, 0.0]);
        let p = col_projector(&e1, DEFAULT_RANK_TOL).unwrap();
        assert!(max_diff(&p, &Matrix::from_diag(&[1.0, 0.0, 0.0])) < 1e-15);

        let q = haar_from_gaussian(&rand_matrix(3, 4, 4)).unwrap();
        let p = col_projector(&q, DEFAULT_RANK_TOL).unwrap();
        assert!(max_diff(&p, &Matrix::identity(4)) < 1e-10);

        let m = rand_matrix(5, 5, 2);
        let p = col_projector(&m, DEFAULT_RANK_TOL).unwrap();
        assert!(max_diff(&p.matmul(&m), &m) < 1e-10);
        assert!((p.trace() - 2.0).abs() < 1e-8);
        assert!(max_diff(&p, &p.transpose()) < 1e-10);
        assert!(max_diff(&p.matmul(&p), &p) < 1e-10);
    }

    #[test]
    fn principal_angle_cases() {
        let e1 = Matrix::column_vector(&[1.0, 0.0, 0.0]);
        let e2 = Matrix::column_vector(&[0.0, 1.0, 0.0]);
        assert!(principal_angle_sin(&e1, &e1).unwrap() < 1e-15);
        assert!((principal_angle_sin(&e1, &e2).unwrap() - 1.0).abs() < 1e-15);
        let th: f64 = 0.3;
        let v = Matrix::column_vector(&[th.cos(), th.sin(), 0.0]);
        assert!((principal_angle_sin(&e1, &v).unwrap() - th.sin()).abs() < 1e-10);
        assert!(principal_angle_sin(&e1, &Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn psd_projection_cases() {
        let p = psd_project(&Matrix::from_diag(&[1.0, -2.0])).unwrap();
        assert!(max_diff(&p, &Matrix::from_diag(&[1.0, 0.0])) < 1e-14);

        let g = rand_matrix(8, 4, 4);
        let psd = g.gram_outer();
        assert!(max_diff(&psd_project(&psd).unwrap(), &psd) < 1e-10);

        let asym = Matrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
        assert!(matches!(psd_project(&asym), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn psd_projection_matches_grid_search() {
        // Symmetric 2x2 with eigenvalues of both signs.
        let m = Matrix::from_rows(&[&[0.3, 0.9], &[0.9, -0.4]]);
        // PSD 2x2 = [[a, b], [b, c]] with a, c ≥ 0 and b² ≤ ac. Coarse grid,
        // then a local refinement around the best cell.
        let objective = |a: f64, b: f64, c: f64| {
            (a - m[(0, 0)]).powi(2) + 2.0 * (b - m[(0, 1)]).powi(2) + (c - m[(1, 1)]).powi(2)
        };
        let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
        let mut center = (0.5, 0.0, 0.5);
        let mut half = 1.5;
        for _ in 0..6 {
            let n = 60;
            for ia in 0..=n {
                let a = (center.0 - half + 2.0 * half * ia as f64 / n as f64).max(0.0);
                for ic in 0..=n {
                    let c = (center.2 - half + 2.0 * half * ic as f64 / n as f64).max(0.0);
                    let lim = (a * c).sqrt();
                    for ib in 0..=n {
                        let b = center.1 - half + 2.0 * half * ib as f64 / n as f64;
                        if b.abs() > lim {
                            continue;
                        }
                        let f = objective(a, b, c);
                        if f < best.0 {
                            best = (f, a, b, c);
                        }
                    }
                }
            }
            center = (best.1, best.2, best.3);
            half /= 8.0;
        }
        let p = psd_project(&m).unwrap();
        assert!((p[(0, 0)] - best.1).abs() < 1e-4);
        assert!((p[(0, 1)] - best.2).abs() < 1e-4);
        assert!((p[(1, 1)] - best.3).abs() < 1e-4);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn sym_matrix(n: usize) -> impl Strategy<Value = Matrix> {
            proptest::collection::vec(-3.0f64..3.0, n * n).prop_map(move |v| {
                Matrix::from_vec(n, n, v).symmetrized()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn psd_project_is_idempotent(m in sym_matrix(4)) {
                let once = psd_project(&m).unwrap();
                let twice = psd_project(&once).unwrap();
                prop_assert!(max_diff(&once, &twice) < 1e-10);
                let eig = sym_eigen(&once).unwrap();
                prop_assert!(eig.values.iter().all(|&v| v >= -1e-10));
            }

            #[test]
            fn singular_values_rotation_invariant(seed in 0u64..1000) {
                let m = rand_matrix(seed, 5, 3);
                let q = haar_from_gaussian(&rand_matrix(seed + 10_000, 5, 5)).unwrap();
                let a = singular_values(&m).unwrap();
                let b = singular_values(&q.matmul(&m)).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }

            #[test]
            fn projector_fixes_span(seed in 0u64..1000, coeffs in proptest::collection::vec(-2.0f64..2.0, 2)) {
                let m = rand_matrix(seed, 6, 2);
                let p = col_projector(&m, DEFAULT_RANK_TOL).unwrap();
                let v = m.mul_vec(&coeffs);
                let pv = p.mul_vec(&v);
                for (a, b) in v.iter().zip(&pv) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }

            #[test]
            fn principal_sine_zero_iff_contained(seed in 0u64..1000) {
                let b = rand_matrix(seed, 6, 3);
                let inside = b.matmul(&rand_matrix(seed + 1, 3, 2));
                prop_assert!(principal_angle_sin(&inside, &b).unwrap() < 1e-9);
                let outside = rand_matrix(seed + 2, 6, 1);
                prop_assert!(principal_angle_sin(&outside, &b).unwrap() > 1e-9);
            }
        }
    }
}
