//! Reference iterative solvers used for comparison runs.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, axpy, dot, gemv_into, gemv_t_into, norm2, DenseMatrix, Vector};
use crate::solver::residuals;

/// Magnitude below which BiCGSTAB scalars count as a breakdown.
pub const BREAKDOWN_TOL: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BaselineMethod {
    BiCgStab,
    SteepestDescentNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    #[default]
    None,
    Jacobi,
}

impl fmt::Display for Preconditioner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preconditioner::None => "none",
            Preconditioner::Jacobi => "jacobi",
        })
    }
}

impl FromStr for Preconditioner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Preconditioner::None),
            "jacobi" => Ok(Preconditioner::Jacobi),
            other => Err(Error::InvalidArgument(format!("unknown preconditioner `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineReport {
    pub method: BaselineMethod,
    pub x: Vector,
    /// `|Ax - b|`, recomputed from `x`.
    pub residual: f64,
    pub normal_residual: f64,
    pub iterations: u64,
    pub converged: bool,
    pub breakdown: Option<String>,
}

fn finish(
    method: BaselineMethod,
    a: &DenseMatrix,
    b: &[f64],
    x: Vec<f64>,
    iterations: u64,
    converged: impl FnOnce(f64, f64) -> bool,
    breakdown: Option<String>,
) -> Result<BaselineReport> {
    let x = Vector::new(x).map_err(|_| Error::Numerical(format!("{method:?} produced non-finite iterates")))?;
    let (residual, normal_residual) = residuals(a, &x, b)?;
    Ok(BaselineReport {
        method,
        converged: converged(residual, normal_residual),
        x,
        residual,
        normal_residual,
        iterations,
        breakdown,
    })
}

/// Unrestarted BiCGSTAB for square systems.
///
/// Converged means `|Ax - b| <= tol |b|` for the returned `x`. A breakdown
/// (`|rho|`, `|r^T v|` or `|omega|` below [`BREAKDOWN_TOL`]) stops the
/// iteration and is reported rather than restarted.
pub fn bicgstab(
    a: &DenseMatrix,
    b: &[f64],
    tol: f64,
    max_iters: u64,
    precond: Preconditioner,
) -> Result<BaselineReport> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            op: "bicgstab",
            expected: a.rows(),
            got: b.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let n = a.rows();
    let inv_diag: Option<Vec<f64>> = match precond {
        Preconditioner::None => None,
        Preconditioner::Jacobi => Some(
            (0..n)
                .map(|i| {
                    let d = a.get(i, i);
                    if d != 0.0 {
                        1.0 / d
                    } else {
                        1.0
                    }
                })
                .collect(),
        ),
    };
    let apply_m = |src: &[f64], dst: &mut [f64]| match &inv_diag {
        Some(d) => dst.iter_mut().zip(src).zip(d).for_each(|((o, s), di)| *o = s * di),
        None => dst.copy_from_slice(src),
    };

    let b_norm = norm2(b);
    let target = tol * b_norm;
    let ok = move |res: f64, _: f64| res <= target;
    let method = BaselineMethod::BiCgStab;
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return finish(method, a, b, x, 0, ok, None);
    }

    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];

    let mut breakdown = None;
    let mut iters = 0;
    while iters < max_iters {
        iters += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < BREAKDOWN_TOL {
            breakdown = Some("rho".to_string());
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        apply_m(&p, &mut y);
        gemv_into(a, &y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv.abs() < BREAKDOWN_TOL {
            breakdown = Some("r_hat^T v".to_string());
            break;
        }
        alpha = rho_new / rv;
        axpy(alpha, &y, &mut x);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= target {
            r.copy_from_slice(&s);
            break;
        }
        apply_m(&s, &mut z);
        gemv_into(a, &z, &mut t);
        let tt = dot(&t, &t);
        if tt < BREAKDOWN_TOL {
            breakdown = Some("t^T t".to_string());
            break;
        }
        omega = dot(&t, &s) / tt;
        axpy(omega, &z, &mut x);
        for i in 0..n {
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= target {
            break;
        }
        if omega.abs() < BREAKDOWN_TOL {
            breakdown = Some("omega".to_string());
            break;
        }
        if !norm2(&r).is_finite() {
            breakdown = Some("non-finite residual".to_string());
            break;
        }
        rho = rho_new;
    }
    if x.iter().any(|v| !v.is_finite()) {
        // Diverged; report the zero vector so the residual stays meaningful.
        x.fill(0.0);
        breakdown.get_or_insert_with(|| "non-finite iterate".to_string());
    }
    finish(method, a, b, x, iters, ok, breakdown)
}

/// Gradient descent on `|Ax - b|^2 / 2` with exact line search.
///
/// Converged means `|A^T A x - A^T b| <= tol`.
pub fn steepest_descent_normal(a: &DenseMatrix, b: &[f64], tol: f64, max_iters: u64) -> Result<BaselineReport> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            op: "steepest_descent_normal",
            expected: a.rows(),
            got: b.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let (m, n) = (a.rows(), a.cols());
    let mut x = vec![0.0; n];
    // r = Ax - b, g = A^T r
    let mut r: Vec<f64> = b.iter().map(|v| -v).collect();
    let mut g = vec![0.0; n];
    let mut ag = vec![0.0; m];
    gemv_t_into(a, &r, &mut g);

    let mut iters = 0;
    while iters < max_iters {
        let gg = dot(&g, &g);
        if gg.sqrt() <= tol {
            break;
        }
        gemv_into(a, &g, &mut ag);
        let agag = dot(&ag, &ag);
        if agag == 0.0 {
            break;
        }
        let step = gg / agag;
        axpy(-step, &g, &mut x);
        axpy(-step, &ag, &mut r);
        gemv_t_into(a, &r, &mut g);
        iters += 1;
    }
    finish(
        BaselineMethod::SteepestDescentNormal,
        a,
        b,
        x,
        iters,
        move |_, nres| nres <= tol,
        None,
    )
}

/// Relative BiCGSTAB tolerance that targets an absolute residual `eps`.
pub fn relative_tol_for(b: &[f64], eps: f64) -> f64 {
    let nb = linalg::norm2(b);
    if nb > 0.0 {
        eps / nb
    } else {
        eps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bicgstab_identity_one_iteration() {
        let rep = bicgstab(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0], 1e-10, 30, Preconditioner::None).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 1);
        assert_eq!(rep.x.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn bicgstab_diagonal() {
        let tol = 1e-10;
        let rep = bicgstab(&DenseMatrix::diag(&[1.0, 2.0, 4.0]), &[1.0, 2.0, 4.0], tol, 30, Preconditioner::None).unwrap();
        assert!(rep.converged);
        assert!(rep.residual <= tol * 21f64.sqrt());
        for xi in rep.x.iter() {
            assert!((xi - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bicgstab_singular_inconsistent_does_not_converge() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        for pc in [Preconditioner::None, Preconditioner::Jacobi] {
            let rep = bicgstab(&a, &[0.0, 1.0], 1e-6, 20, pc).unwrap();
            assert!(!rep.converged);
            assert!(rep.breakdown.is_some());
        }
    }

    #[test]
    fn bicgstab_rejects_rectangular() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(matches!(
            bicgstab(&a, &[1.0, 1.0], 1e-6, 10, Preconditioner::None),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn steepest_descent_examples() {
        let rep = steepest_descent_normal(&DenseMatrix::identity(2), &[1.0, 1.0], 1e-12, 10).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.x.as_slice(), &[1.0, 1.0]);

        let rep = steepest_descent_normal(&DenseMatrix::diag(&[1.0, 10.0]), &[1.0, 10.0], 1e-8, 100_000).unwrap();
        assert!(rep.converged);
        assert!((rep.x[0] - 1.0).abs() < 1e-6 && (rep.x[1] - 1.0).abs() < 1e-6);

        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let rep = steepest_descent_normal(&a, &[0.0, 1.0], 1e-8, 10).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.x.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn steepest_descent_slows_with_conditioning() {
        // Starting error along (k^2, 1) gives the worst-case zigzag.
        let its = |k: f64| {
            let rep = steepest_descent_normal(&DenseMatrix::diag(&[1.0, k]), &[k * k, k], 1e-8, 1_000_000).unwrap();
            assert!(rep.converged);
            rep.iterations
        };
        let (a, b, c) = (its(2.0), its(4.0), its(8.0));
        assert!(a < b && b < c, "{a} {b} {c}");
        // roughly quadratic in k: doubling k should more than double the count
        assert!(c > 2 * b, "{b} {c}");
    }
}
