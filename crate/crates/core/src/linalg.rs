//! Dense linear-algebra kernels.
//!
//! Everything here is row-major `f64`. The solver hot loop only needs the two
//! matrix-vector products; the rest (products, norm estimates, random
//! orthogonal factors) feeds instance generation and diagnostics.

use std::ops::Deref;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seed used by [`operator_norm_estimate`] for its starting vector.
const NORM_ESTIMATE_SEED: u64 = 0x7269_616e_676c_6531;

pub const NORM_ESTIMATE_MAX_ITERS: usize = 200;

#[cfg(debug_assertions)]
thread_local! {
    static MULADDS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

#[inline]
fn count_muladds(_n: usize) {
    #[cfg(debug_assertions)]
    MULADDS.with(|c| c.set(c.get() + _n as u64));
}

/// Multiply-adds performed by the matrix-vector kernels on this thread.
///
/// Only tracked in debug builds; release builds return `None`.
pub fn muladd_count() -> Option<u64> {
    #[cfg(debug_assertions)]
    {
        Some(MULADDS.with(|c| c.get()))
    }
    #[cfg(not(debug_assertions))]
    {
        None
    }
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// A dense real vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("vector length must be positive".into()));
        }
        check_finite(&data)?;
        Ok(Vector(data))
    }

    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len])
    }

    pub fn from_slice(data: &[f64]) -> Result<Self> {
        Self::new(data.to_vec())
    }

    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Vector(data)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        dot(&self.0, &other.0)
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Vector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "DenseMatrix::new",
                expected: rows * cols,
                got: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds a matrix from a slice of equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    op: "DenseMatrix::from_rows",
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0);
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    /// Square diagonal matrix.
    pub fn diag(d: &[f64]) -> Self {
        Self::rect_diag(d.len(), d.len(), d)
    }

    /// `rows x cols` matrix with `d` on the leading diagonal.
    pub fn rect_diag(rows: usize, cols: usize, d: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, &v) in d.iter().enumerate().take(rows.min(cols)) {
            m.data[i * cols + i] = v;
        }
        m
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        DenseMatrix::from_raw(self.cols, self.rows, t)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                expected: self.cols,
                got: other.rows,
            });
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                axpy(a, other.row(p), orow);
            }
        }
        Ok(DenseMatrix::from_raw(m, n, out))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators keep the reduction vectorizable.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Euclidean distance `|a - b|`.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(alpha: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|v| alpha * v).collect()
}

/// `y = A x` into a caller-provided buffer.
pub(crate) fn gemv_into(a: &DenseMatrix, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), a.cols);
    debug_assert_eq!(y.len(), a.rows);
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = dot(a.row(i), x);
    }
    count_muladds(a.rows * a.cols);
}

/// `y = A^T x` into a caller-provided buffer.
pub(crate) fn gemv_t_into(a: &DenseMatrix, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), a.rows);
    debug_assert_eq!(y.len(), a.cols);
    y.fill(0.0);
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            axpy(xi, a.row(i), y);
        }
    }
    count_muladds(a.rows * a.cols);
}

/// `A x`.
pub fn matvec(a: &DenseMatrix, x: &[f64]) -> Result<Vector> {
    if x.len() != a.cols {
        return Err(Error::DimensionMismatch {
            op: "matvec",
            expected: a.cols,
            got: x.len(),
        });
    }
    let mut y = vec![0.0; a.rows];
    gemv_into(a, x, &mut y);
    Ok(Vector::from_vec_unchecked(y))
}

/// `A^T y`.
pub fn transpose_matvec(a: &DenseMatrix, y: &[f64]) -> Result<Vector> {
    if y.len() != a.rows {
        return Err(Error::DimensionMismatch {
            op: "transpose_matvec",
            expected: a.rows,
            got: y.len(),
        });
    }
    let mut x = vec![0.0; a.cols];
    gemv_t_into(a, y, &mut x);
    Ok(Vector::from_vec_unchecked(x))
}

/// Spectral norm estimate by power iteration on `A^T A`.
///
/// The returned value is `|A v|` for a unit vector `v`, so it never exceeds
/// the true norm. Iteration stops once successive estimates agree to a
/// relative `tol`, or after [`NORM_ESTIMATE_MAX_ITERS`] iterations.
pub fn operator_norm_estimate(a: &DenseMatrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if a.data.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(NORM_ESTIMATE_SEED);
    let mut v: Vec<f64> = (0..a.cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut av = vec![0.0; a.rows];
    let mut w = vec![0.0; a.cols];
    let mut sigma = 0.0;
    for _ in 0..NORM_ESTIMATE_MAX_ITERS {
        gemv_into(a, &v, &mut av);
        let s = norm2(&av);
        gemv_t_into(a, &av, &mut w);
        let nw = norm2(&w);
        if nw == 0.0 {
            // v landed in the null space; the seeded start makes this measure-zero.
            break;
        }
        let converged = sigma > 0.0 && (s - sigma).abs() <= tol * s;
        sigma = s;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        if converged {
            break;
        }
    }
    gemv_into(a, &v, &mut av);
    Ok(norm2(&av).max(sigma))
}

/// Random `k x k` orthogonal matrix from the QR factorization of a seeded
/// Gaussian matrix (Householder reflections, signs fixed so `diag(R) > 0`).
pub fn random_orthogonal(k: usize, seed: u64) -> DenseMatrix {
    assert!(k >= 1, "random_orthogonal requires k >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Column-major working copy; each column is one Gaussian vector.
    let mut g: Vec<f64> = (0..k * k).map(|_| StandardNormal.sample(&mut rng)).collect();
    let col = |j: usize| j * k..(j + 1) * k;

    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut signs = vec![1.0; k];
    for j in 0..k {
        let x = &g[col(j)][j..];
        let alpha = norm2(x);
        let mut v = x.to_vec();
        if alpha == 0.0 {
            reflectors.push(vec![0.0; k - j]);
            continue;
        }
        let s = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        // R[j][j] = -s * alpha after reflection.
        signs[j] = -s;
        v[0] += s * alpha;
        let nv = norm2(&v);
        v.iter_mut().for_each(|e| *e /= nv);
        for jj in j..k {
            let c = &mut g[col(jj)][j..];
            let d = 2.0 * dot(&v, c);
            axpy(-d, &v, c);
        }
        reflectors.push(v);
    }

    // Q = H_0 H_1 ... H_{k-1}, applied to the identity from the right end.
    let mut q = vec![0.0; k * k];
    for j in 0..k {
        q[j * k + j] = 1.0;
    }
    for j in (0..k).rev() {
        let v = &reflectors[j];
        for jj in 0..k {
            let c = &mut q[col(jj)][j..];
            let d = 2.0 * dot(v, c);
            axpy(-d, v, c);
        }
    }
    // Column j of Q times sign(R_jj) gives the Haar-distributed factor.
    let mut out = vec![0.0; k * k];
    for j in 0..k {
        for i in 0..k {
            out[i * k + j] = q[j * k + i] * signs[j];
        }
    }
    DenseMatrix::from_raw(k, k, out)
}
