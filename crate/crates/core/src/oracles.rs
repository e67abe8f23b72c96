//! Slow reference computations.
//!
//! These exist to check the iterative solvers and to build test instances.
//! Nothing in the solver path calls into this module.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm2, DenseMatrix, Vector};

/// Relative threshold below which singular values count as zero.
pub const RANK_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 80;
const JACOBI_TOL: f64 = 1e-15;

/// Thin SVD `A = U diag(s) V^T` with `k = min(m, n)` columns, `s` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl Svd {
    pub fn sigma_max(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values above `RANK_TOL * sigma_max`.
    pub fn rank(&self) -> usize {
        let cut = RANK_TOL * self.sigma_max();
        self.s.iter().filter(|&&s| s > cut).count()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let (m, n, k) = (self.u.rows(), self.v.rows(), self.s.len());
        let mut us = self.u.clone();
        for i in 0..m {
            for j in 0..k {
                us.set(i, j, self.u.get(i, j) * self.s[j]);
            }
        }
        let out = us.matmul(&self.v.transpose()).expect("conforming factors");
        debug_assert_eq!((out.rows(), out.cols()), (m, n));
        out
    }
}

/// One-sided (Hestenes) Jacobi on the columns of a tall `m x n` matrix given
/// column by column. Returns orthogonalized columns and, when requested, the
/// accumulated right rotations (also column by column).
fn hestenes(mut cols: Vec<Vec<f64>>, accumulate: bool) -> (Vec<Vec<f64>>, Option<Vec<Vec<f64>>>) {
    let n = cols.len();
    let mut v: Option<Vec<Vec<f64>>> = accumulate.then(|| {
        (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect()
    });
    let mut norms: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
                norms[p] = dot(&cols[p], &cols[p]);
                norms[q] = dot(&cols[q], &cols[q]);
                if let Some(v) = v.as_mut() {
                    let (lo, hi) = v.split_at_mut(q);
                    rotate(&mut lo[p], &mut hi[0], c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (cols, v)
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

fn columns_of(a: &DenseMatrix, transpose: bool) -> Vec<Vec<f64>> {
    if transpose {
        (0..a.rows()).map(|i| a.row(i).to_vec()).collect()
    } else {
        (0..a.cols()).map(|j| a.column(j)).collect()
    }
}

fn from_columns(rows: usize, cols: &[Vec<f64>]) -> DenseMatrix {
    let k = cols.len();
    let mut data = vec![0.0; rows * k];
    for (j, c) in cols.iter().enumerate() {
        for (i, &x) in c.iter().enumerate() {
            data[i * k + j] = x;
        }
    }
    DenseMatrix::from_raw(rows, k, data)
}

/// Thin singular value decomposition by one-sided Jacobi.
pub fn svd(a: &DenseMatrix) -> Svd {
    let (m, n) = (a.rows(), a.cols());
    // Orthogonalize the columns of A (m >= n) or of A^T (m < n).
    let wide = m < n;
    let (w, v) = hestenes(columns_of(a, wide), true);
    let v = v.expect("accumulated");
    let len = if wide { n } else { m };
    let k = w.len();

    let mut order: Vec<(f64, usize)> = w.iter().map(|c| norm2(c)).zip(0..k).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));

    let s: Vec<f64> = order.iter().map(|&(s, _)| s).collect();
    let left: Vec<Vec<f64>> = order
        .iter()
        .map(|&(s, j)| {
            if s > 0.0 {
                w[j].iter().map(|x| x / s).collect()
            } else {
                vec![0.0; len]
            }
        })
        .collect();
    let right: Vec<Vec<f64>> = order.iter().map(|&(_, j)| v[j].clone()).collect();

    let (u, vt) = if wide {
        (from_columns(m, &right), from_columns(n, &left))
    } else {
        (from_columns(m, &left), from_columns(n, &right))
    };
    Svd { u, s, v: vt }
}

/// Singular values only, descending.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    let wide = a.rows() < a.cols();
    let (w, _) = hestenes(columns_of(a, wide), false);
    let mut s: Vec<f64> = w.iter().map(|c| norm2(c)).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Minimum-norm least-squares solution `x_* = V S^+ U^T b` and the
/// least-squares residual `min |Ax - b|`.
pub fn least_squares_direct(a: &DenseMatrix, b: &[f64]) -> Result<(Vector, f64)> {
    let f = svd(a);
    least_squares_from_svd(a, &f, b)
}

pub fn least_squares_from_svd(a: &DenseMatrix, f: &Svd, b: &[f64]) -> Result<(Vector, f64)> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            op: "least_squares_direct",
            expected: a.rows(),
            got: b.len(),
        });
    }
    let x = pseudo_solve(f, b, 0.0);
    let delta = residual_norm(a, &x, b);
    Ok((Vector::from_vec_unchecked(x), delta))
}

/// `sum_i s_i / (s_i^2 + lambda) (u_i^T b) v_i` over the numerical rank.
fn pseudo_solve(f: &Svd, b: &[f64], lambda: f64) -> Vec<f64> {
    let n = f.v.rows();
    let mut x = vec![0.0; n];
    for j in 0..f.rank() {
        let s = f.s[j];
        let beta: f64 = (0..f.u.rows()).map(|i| f.u.get(i, j) * b[i]).sum();
        let coef = s * beta / (s * s + lambda);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += coef * f.v.get(i, j);
        }
    }
    x
}

fn residual_norm(a: &DenseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = linalg::matvec(a, x).expect("conforming");
    linalg::dist(&ax, b)
}

/// Smallest singular value above the rank threshold.
pub fn smallest_positive_singular_value(a: &DenseMatrix) -> Result<f64> {
    let s = singular_values(a);
    let cut = RANK_TOL * s.first().copied().unwrap_or(0.0);
    s.iter()
        .rev()
        .copied()
        .find(|&x| x > cut)
        .ok_or_else(|| Error::InvalidArgument("zero matrix has no positive singular value".into()))
}

/// Distance from `b` to the ellipsoid `{ Ax : |x| <= r }` and its minimizer.
#[derive(Debug, Clone, Serialize)]
pub struct EllipsoidProjection {
    pub delta_r: f64,
    pub x_opt: Vector,
    /// Multiplier of the ball constraint; zero when it is inactive.
    pub lambda: f64,
}

/// Solves `min |Ax - b|` subject to `|x| <= r`.
///
/// If the minimum-norm least-squares solution fits in the ball it is the
/// answer. Otherwise the constraint is active and `x(lambda) =
/// (A^T A + lambda I)^{-1} A^T b` is bisected on `lambda` until
/// `|x(lambda)| = r` to relative accuracy `1e-10`. `x(lambda)` is evaluated
/// through the SVD.
pub fn project_to_ellipsoid(a: &DenseMatrix, b: &[f64], r: f64) -> Result<EllipsoidProjection> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let f = svd(a);
    let (x_hat, delta) = least_squares_from_svd(a, &f, b)?;
    if x_hat.norm() <= r {
        return Ok(EllipsoidProjection {
            delta_r: delta,
            x_opt: x_hat,
            lambda: 0.0,
        });
    }

    // |x(lambda)| <= |A^T b| / lambda, so this upper end is feasible.
    let atb = linalg::transpose_matvec(a, b)?;
    let mut hi = atb.norm() / r;
    let mut lo = 0.0;
    if norm2(&pseudo_solve(&f, b, hi)) > r {
        return Err(Error::Numerical("ellipsoid projection failed to bracket lambda".into()));
    }
    let mut x = pseudo_solve(&f, b, hi);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let xm = pseudo_solve(&f, b, mid);
        let nx = norm2(&xm);
        if nx > r {
            lo = mid;
        } else {
            hi = mid;
            x = xm;
            if r - nx <= 1e-10 * r {
                break;
            }
        }
    }
    let delta_r = residual_norm(a, &x, b);
    Ok(EllipsoidProjection {
        delta_r,
        x_opt: Vector::from_vec_unchecked(x),
        lambda: hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn svd_reconstructs() {
        for (m, n) in [(5, 3), (3, 5), (4, 4), (1, 3), (3, 1)] {
            let data: Vec<f64> = (0..m * n).map(|k| ((k * 7 + 3) % 11) as f64 - 5.0).collect();
            let a = DenseMatrix::new(m, n, data).unwrap();
            let f = svd(&a);
            let err = {
                let r = f.reconstruct();
                a.data().iter().zip(r.data()).fold(0.0f64, |e, (x, y)| e.max((x - y).abs()))
            };
            assert!(err <= 1e-9 * f.sigma_max(), "{m}x{n}: {err}");
            assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
            let sv = singular_values(&a);
            for (x, y) in sv.iter().zip(&f.s) {
                assert!(close(*x, *y, 1e-12 * f.sigma_max()));
            }
        }
    }

    #[test]
    fn least_squares_examples() {
        let (x, d) = least_squares_direct(&DenseMatrix::identity(2), &[3.0, 4.0]).unwrap();
        assert_eq!(x.as_slice(), &[3.0, 4.0]);
        assert_eq!(d, 0.0);

        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let (x, d) = least_squares_direct(&a, &[1.0, 1.0]).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 0.0]);
        assert_eq!(d, 1.0);

        let (x, d) = least_squares_direct(&DenseMatrix::diag(&[2.0, 0.0]), &[2.0, 5.0]).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 0.0]);
        assert_eq!(d, 5.0);
    }

    #[test]
    fn smallest_singular_value_examples() {
        let s = smallest_positive_singular_value(&DenseMatrix::diag(&[3.0, 1.0])).unwrap();
        assert!(close(s, 1.0, 1e-15));
        let s = smallest_positive_singular_value(&DenseMatrix::diag(&[2.0, 1e-3])).unwrap();
        assert!(close(s, 1e-3, 1e-15));
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert_eq!(smallest_positive_singular_value(&a).unwrap(), 1.0);
        assert!(smallest_positive_singular_value(&DenseMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn projection_examples() {
        let i2 = DenseMatrix::identity(2);
        let p = project_to_ellipsoid(&i2, &[2.0, 0.0], 1.0).unwrap();
        assert!(close(p.delta_r, 1.0, 1e-9));
        assert!(close(p.x_opt[0], 1.0, 1e-9) && p.x_opt[1].abs() < 1e-12);
        assert!(p.lambda > 0.0);

        let p = project_to_ellipsoid(&i2, &[0.5, 0.0], 1.0).unwrap();
        assert_eq!(p.delta_r, 0.0);
        assert_eq!(p.x_opt.as_slice(), &[0.5, 0.0]);

        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        for r in [0.1, 3.0] {
            let p = project_to_ellipsoid(&a, &[0.0, 1.0], r).unwrap();
            assert_eq!(p.delta_r, 1.0);
            assert_eq!(p.x_opt.as_slice(), &[0.0, 0.0]);
        }
    }

    #[test]
    fn projection_beats_a_grid_of_the_ball() {
        let a = DenseMatrix::from_rows(&[[2.0, 0.5], [0.3, 0.7], [1.0, -1.0]]).unwrap();
        let b = [3.0, -1.0, 2.5];
        let r = 0.8;
        let proj = project_to_ellipsoid(&a, &b, r).unwrap();
        assert!(proj.x_opt.norm() <= r * (1.0 + 1e-8));
        let h = 1e-3;
        let steps = (r / h).ceil() as i64;
        let mut best = f64::INFINITY;
        for i in -steps..=steps {
            for j in -steps..=steps {
                let x = [i as f64 * h, j as f64 * h];
                if x[0] * x[0] + x[1] * x[1] > r * r {
                    continue;
                }
                let ax = linalg::matvec(&a, &x).unwrap();
                best = best.min(linalg::dist(&ax, &b));
            }
        }
        assert!(best >= proj.delta_r - 1e-6, "grid {best} < oracle {}", proj.delta_r);
        assert!(best - proj.delta_r < 5e-3);
    }
}
