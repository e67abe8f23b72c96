use std::ffi::CStr;
use std::ptr;

use trilin_ffi::*;

fn matrix(rows: usize, cols: usize, data: &[f64]) -> *mut TrilinMatrix {
    let mut m = ptr::null_mut();
    let st = unsafe { trilin_matrix_new(rows, cols, data.as_ptr(), &mut m) };
    assert_eq!(st, TrilinStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> Option<String> {
    let p = trilin_last_error_message();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn empty_report() -> TrilinSolveReport {
    TrilinSolveReport {
        outcome: TrilinOutcome::Inconclusive,
        residual: f64::NAN,
        normal_residual: f64::NAN,
        delta_lower_bound: f64::NAN,
        iterations: 0,
        final_radius: 0.0,
        radius_count: 0,
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(trilin_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn solve_identity_walkthrough() {
    let a = matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    assert_eq!(unsafe { trilin_matrix_rows(a) }, 2);
    assert_eq!(unsafe { trilin_matrix_cols(a) }, 2);
    let mut cfg = trilin_solver_config_default(0.01);
    cfg.r0 = 1.0;
    let b = [2.0, 0.0];
    let mut x = [0.0; 2];
    let mut rep = empty_report();
    let st = unsafe { trilin_solve(a, b.as_ptr(), 2, &cfg, x.as_mut_ptr(), 2, &mut rep) };
    assert_eq!(st, TrilinStatus::Ok);
    assert_eq!(rep.outcome, TrilinOutcome::EpsSolution);
    assert_eq!(rep.iterations, 2);
    assert_eq!(rep.radius_count, 2);
    assert!((rep.final_radius - 2.0).abs() < 1e-12);
    assert!((x[0] - 2.0).abs() < 1e-12 && x[1].abs() < 1e-12);
    assert!(rep.delta_lower_bound.is_nan());
    assert!(last_error().is_none());
    unsafe { trilin_matrix_free(a) };
}

#[test]
fn solve_rank_one_unsolvable() {
    let a = matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let cfg = trilin_solver_config_default(0.01);
    let b = [1.0, 1.0];
    let mut rep = empty_report();
    let st = unsafe { trilin_solve(a, b.as_ptr(), 2, &cfg, ptr::null_mut(), 0, &mut rep) };
    assert_eq!(st, TrilinStatus::Ok);
    assert_eq!(rep.outcome, TrilinOutcome::Unsolvable);
    assert!((rep.delta_lower_bound - 0.05).abs() < 1e-12);
    assert!(rep.delta_lower_bound <= 1.0);

    // Without the side-condition check the same system falls back to the normal equations.
    let mut cfg = cfg;
    cfg.unsolvable_tol = 0.0;
    let st = unsafe { trilin_solve(a, b.as_ptr(), 2, &cfg, ptr::null_mut(), 0, &mut rep) };
    assert_eq!(st, TrilinStatus::Ok);
    assert_eq!(rep.outcome, TrilinOutcome::NormalEqEpsSolution);
    assert!(rep.normal_residual <= 0.01);
    unsafe { trilin_matrix_free(a) };
}

#[test]
fn inconclusive_still_reports_iterate() {
    let a = matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    let mut cfg = trilin_solver_config_default(1e-6);
    cfg.r0 = 1.0;
    cfg.radius_cap = 1.5;
    let b = [2.0, 0.0];
    let mut x = [f64::NAN; 2];
    let mut rep = empty_report();
    let st = unsafe { trilin_solve(a, b.as_ptr(), 2, &cfg, x.as_mut_ptr(), 2, &mut rep) };
    assert_eq!(st, TrilinStatus::Inconclusive);
    assert_eq!(rep.outcome, TrilinOutcome::Inconclusive);
    assert!(x.iter().all(|v| v.is_finite()));
    assert!((rep.residual - 0.5).abs() < 1e-9, "{}", rep.residual);
    assert!(last_error().unwrap().contains("inconclusive"));
    unsafe { trilin_matrix_free(a) };
}

#[test]
fn membership_witness_bracket() {
    let a = matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    let cfg = trilin_membership_config_default(1.0, 0.01);
    let b = [2.0, 0.0];
    let mut x = [0.0; 2];
    let mut rep = TrilinMembershipReport {
        tag: TrilinMembershipTag::IterationCapReached,
        gap: 0.0,
        iterations: 0,
        distance_lower: 0.0,
        distance_upper: 0.0,
        radius_lower_bound: 0.0,
    };
    let st = unsafe { trilin_membership(a, b.as_ptr(), 2, &cfg, x.as_mut_ptr(), 2, &mut rep) };
    assert_eq!(st, TrilinStatus::Ok);
    assert_eq!(rep.tag, TrilinMembershipTag::Witness);
    assert!((rep.gap - 1.0).abs() < 1e-12);
    assert!(rep.distance_lower <= 1.0 && 1.0 <= rep.distance_upper);
    assert!((rep.radius_lower_bound - 2.0).abs() < 1e-12);
    assert_eq!(x, [1.0, 0.0]);

    let cfg = trilin_membership_config_default(3.0, 0.01);
    let st = unsafe { trilin_membership(a, b.as_ptr(), 2, &cfg, ptr::null_mut(), 0, &mut rep) };
    assert_eq!(st, TrilinStatus::Ok);
    assert_eq!(rep.tag, TrilinMembershipTag::NearPoint);
    assert!(rep.distance_lower.is_nan());
    unsafe { trilin_matrix_free(a) };
}

#[test]
fn bicgstab_singular_does_not_converge() {
    let a = matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let b = [0.0, 1.0];
    let mut rep = TrilinBaselineReport {
        converged: true,
        breakdown: false,
        residual: 0.0,
        normal_residual: 0.0,
        iterations: 0,
    };
    let st = unsafe {
        trilin_bicgstab(a, b.as_ptr(), 2, 1e-6, 20, TrilinPreconditioner::None, ptr::null_mut(), 0, &mut rep)
    };
    assert_eq!(st, TrilinStatus::Ok);
    assert!(!rep.converged);
    assert!(rep.breakdown);
    unsafe { trilin_matrix_free(a) };
}

#[test]
fn error_codes() {
    let mut m = ptr::null_mut();
    let st = unsafe { trilin_matrix_new(2, 2, ptr::null(), &mut m) };
    assert_eq!(st, TrilinStatus::NullPointer);
    assert!(last_error().unwrap().contains("data"));

    let st = unsafe { trilin_matrix_new(0, 2, [1.0].as_ptr(), &mut m) };
    assert_eq!(st, TrilinStatus::InvalidArgument);

    let st = unsafe { trilin_matrix_new(1, 2, [1.0, f64::INFINITY].as_ptr(), &mut m) };
    assert_eq!(st, TrilinStatus::NonFinite);

    let a = matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    let cfg = trilin_solver_config_default(0.01);
    let mut rep = empty_report();
    // wrong rhs length
    let st = unsafe { trilin_solve(a, [1.0; 3].as_ptr(), 3, &cfg, ptr::null_mut(), 0, &mut rep) };
    assert_eq!(st, TrilinStatus::DimensionMismatch);
    // wrong x buffer length
    let mut x = [0.0; 3];
    let st = unsafe { trilin_solve(a, [1.0, 1.0].as_ptr(), 2, &cfg, x.as_mut_ptr(), 3, &mut rep) };
    assert_eq!(st, TrilinStatus::DimensionMismatch);
    // epsilon out of range
    let bad = trilin_solver_config_default(1.5);
    let st = unsafe { trilin_solve(a, [1.0, 1.0].as_ptr(), 2, &bad, ptr::null_mut(), 0, &mut rep) };
    assert_eq!(st, TrilinStatus::InvalidArgument);
    // null handle and report
    let st = unsafe { trilin_solve(ptr::null(), [1.0, 1.0].as_ptr(), 2, &cfg, ptr::null_mut(), 0, &mut rep) };
    assert_eq!(st, TrilinStatus::NullPointer);
    let st = unsafe { trilin_solve(a, [1.0, 1.0].as_ptr(), 2, &cfg, ptr::null_mut(), 0, ptr::null_mut()) };
    assert_eq!(st, TrilinStatus::NullPointer);
    // a success clears the message
    let st = unsafe { trilin_solve(a, [1.0, 1.0].as_ptr(), 2, &cfg, ptr::null_mut(), 0, &mut rep) };
    assert_eq!(st, TrilinStatus::Ok);
    assert!(last_error().is_none());
    unsafe { trilin_matrix_free(a) };

    assert_eq!(unsafe { trilin_matrix_rows(ptr::null()) }, 0);
    unsafe { trilin_matrix_free(ptr::null_mut()) };
}

#[test]
fn read_matrix_market_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.mtx");
    std::fs::write(&path, "%%MatrixMarket matrix array real general\n2 2\n1\n0\n0\n2\n").unwrap();
    let cpath = std::ffi::CString::new(path.to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { trilin_matrix_read(cpath.as_ptr(), &mut m) }, TrilinStatus::Ok);
    assert_eq!(unsafe { trilin_matrix_cols(m) }, 2);
    unsafe { trilin_matrix_free(m) };

    let missing = std::ffi::CString::new(dir.path().join("nope.mtx").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { trilin_matrix_read(missing.as_ptr(), &mut m) }, TrilinStatus::Io);
    std::fs::write(&path, "%%MatrixMarket matrix array real general\n2 2\n1\n").unwrap();
    assert_eq!(unsafe { trilin_matrix_read(cpath.as_ptr(), &mut m) }, TrilinStatus::Parse);
}
