//! C ABI for the trilin solver.
//!
//! Matrices live behind an opaque `TrilinMatrix` handle. Every fallible call
//! returns a `TrilinStatus`; on failure a message is available from
//! `trilin_last_error_message` on the same thread. Optional `double` fields in
//! config structs use NaN for "unset".

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use trilin::baselines::{self, Preconditioner};
use trilin::membership::{self, MembershipConfig, MembershipTag, PivotMode};
use trilin::solver::{self, OutcomeTag, SolverConfig};
use trilin::{mm, DenseMatrix, Error};

static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrilinStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    /// Radius cap or iteration budget reached without a verdict.
    Inconclusive = 5,
    Numerical = 6,
    Io = 7,
    Parse = 8,
    Panic = 9,
}

impl From<&Error> for TrilinStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } | Error::NotSquare { .. } => TrilinStatus::DimensionMismatch,
            Error::NonFinite { .. } => TrilinStatus::NonFinite,
            Error::InvalidArgument(_) => TrilinStatus::InvalidArgument,
            Error::Inconclusive { .. } => TrilinStatus::Inconclusive,
            Error::DegeneratePivot(_) | Error::Numerical(_) => TrilinStatus::Numerical,
            Error::Io { .. } => TrilinStatus::Io,
            Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => TrilinStatus::Parse,
        }
    }
}

struct Failure(TrilinStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(TrilinStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(TrilinStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<TrilinStatus, Failure>) -> TrilinStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(format!("internal panic: {msg}"));
            TrilinStatus::Panic
        }
    }
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `data` points to `len` readable doubles.
    Ok(unsafe { std::slice::from_raw_parts(data, len) })
}

unsafe fn write_x(x: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Ok(());
    }
    if len != x.len() {
        return Err(Failure(
            TrilinStatus::DimensionMismatch,
            format!("x buffer holds {len} entries, solution has {}", x.len()),
        ));
    }
    // SAFETY: caller guarantees `out` points to `len` writable doubles.
    unsafe { ptr::copy_nonoverlapping(x.as_ptr(), out, len) };
    Ok(())
}

fn opt(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

/// Dense matrix handle.
pub struct TrilinMatrix(DenseMatrix);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrilinPivotMode {
    Standard = 0,
    Strict = 1,
}

impl From<TrilinPivotMode> for PivotMode {
    fn from(m: TrilinPivotMode) -> Self {
        match m {
            TrilinPivotMode::Standard => PivotMode::Standard,
            TrilinPivotMode::Strict => PivotMode::Strict,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrilinOutcome {
    EpsSolution = 0,
    NormalEqEpsSolution = 1,
    Unsolvable = 2,
    Inconclusive = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrilinSolverConfig {
    pub epsilon: f64,
    /// NaN: `|b| / |A|`.
    pub r0: f64,
    /// NaN: `|b|^2 / epsilon`.
    pub radius_cap: f64,
    pub pivot_mode: TrilinPivotMode,
    pub max_iters_total: u64,
    /// NaN: `epsilon`.
    pub normal_eq_tol: f64,
    /// NaN: `epsilon`; 0 disables the unsolvable verdict.
    pub unsolvable_tol: f64,
    /// NaN: unknown.
    pub sigma_star_hint: f64,
}

impl From<&TrilinSolverConfig> for SolverConfig {
    fn from(c: &TrilinSolverConfig) -> Self {
        let mut cfg = SolverConfig::new(c.epsilon)
            .with_pivot_mode(c.pivot_mode.into())
            .with_max_iters(c.max_iters_total);
        cfg.r0 = opt(c.r0);
        cfg.radius_cap = opt(c.radius_cap);
        cfg.normal_eq_tol = opt(c.normal_eq_tol);
        cfg.unsolvable_tol = opt(c.unsolvable_tol);
        cfg.sigma_star_hint = opt(c.sigma_star_hint);
        cfg
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrilinSolveReport {
    pub outcome: TrilinOutcome,
    pub residual: f64,
    pub normal_residual: f64,
    /// NaN unless `outcome` is unsolvable.
    pub delta_lower_bound: f64,
    pub iterations: u64,
    pub final_radius: f64,
    /// Number of radii tried, including the initial one; 0 when inconclusive.
    pub radius_count: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrilinMembershipConfig {
    pub radius: f64,
    pub epsilon: f64,
    pub pivot_mode: TrilinPivotMode,
    /// 0: derived from the radius, `|A|` and epsilon.
    pub max_iters: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrilinMembershipTag {
    NearPoint = 0,
    Witness = 1,
    IterationCapReached = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrilinMembershipReport {
    pub tag: TrilinMembershipTag,
    pub gap: f64,
    pub iterations: u64,
    /// Witness only (NaN otherwise): `distance_lower <= dist(b, ellipsoid) <= distance_upper`.
    pub distance_lower: f64,
    pub distance_upper: f64,
    /// Witness only: any radius whose ellipsoid contains `b` is at least this.
    pub radius_lower_bound: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrilinPreconditioner {
    None = 0,
    Jacobi = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrilinBaselineReport {
    pub converged: bool,
    pub breakdown: bool,
    pub residual: f64,
    pub normal_residual: f64,
    pub iterations: u64,
}

/// Library version as a NUL-terminated string with static lifetime.
#[no_mangle]
pub extern "C" fn trilin_version() -> *const c_char {
    VERSION.as_ptr().cast()
}

/// Message for the most recent failed call on this thread, or NULL.
///
/// The pointer stays valid until the next trilin call on this thread.
#[no_mangle]
pub extern "C" fn trilin_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Copies a row-major `rows x cols` array into a new matrix handle.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles and `out` must be a
/// valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn trilin_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut TrilinMatrix,
) -> TrilinStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(TrilinStatus::InvalidArgument, "rows * cols overflows".into()))?;
        if len == 0 {
            return Err(Failure(TrilinStatus::InvalidArgument, "matrix dimensions must be positive".into()));
        }
        let values = unsafe { slice(data, len, "data") }?;
        let rows_vec: Vec<&[f64]> = values.chunks(cols).collect();
        let m = DenseMatrix::from_rows(&rows_vec)?;
        unsafe { *out = Box::into_raw(Box::new(TrilinMatrix(m))) };
        Ok(TrilinStatus::Ok)
    })
}

/// Reads a Matrix Market file (array or coordinate, real).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn trilin_matrix_read(path: *const c_char, out: *mut *mut TrilinMatrix) -> TrilinStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| Failure(TrilinStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let m = mm::read_matrix(path)?;
        unsafe { *out = Box::into_raw(Box::new(TrilinMatrix(m))) };
        Ok(TrilinStatus::Ok)
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn trilin_matrix_free(m: *mut TrilinMatrix) {
    if !m.is_null() {
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Row count, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn trilin_matrix_rows(m: *const TrilinMatrix) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.0.rows())
}

/// Column count, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn trilin_matrix_cols(m: *const TrilinMatrix) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.0.cols())
}

#[no_mangle]
pub extern "C" fn trilin_solver_config_default(epsilon: f64) -> TrilinSolverConfig {
    TrilinSolverConfig {
        epsilon,
        r0: f64::NAN,
        radius_cap: f64::NAN,
        pivot_mode: TrilinPivotMode::Standard,
        max_iters_total: solver::DEFAULT_MAX_ITERS_TOTAL,
        normal_eq_tol: f64::NAN,
        unsolvable_tol: f64::NAN,
        sigma_star_hint: f64::NAN,
    }
}

#[no_mangle]
pub extern "C" fn trilin_membership_config_default(radius: f64, epsilon: f64) -> TrilinMembershipConfig {
    TrilinMembershipConfig {
        radius,
        epsilon,
        pivot_mode: TrilinPivotMode::Standard,
        max_iters: 0,
    }
}

unsafe fn matrix<'a>(a: *const TrilinMatrix) -> Result<&'a DenseMatrix, Failure> {
    unsafe { a.as_ref() }.map(|m| &m.0).ok_or_else(|| null("matrix"))
}

/// Solves `Ax = b`.
///
/// `x_out` (length `x_len == cols`) receives the iterate and may be NULL.
/// When the radius cap or iteration budget is hit the call returns
/// `TRILIN_STATUS_INCONCLUSIVE` and still fills `x_out` and `report` with the
/// last iterate.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `a` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn trilin_solve(
    a: *const TrilinMatrix,
    b: *const f64,
    b_len: usize,
    config: *const TrilinSolverConfig,
    x_out: *mut f64,
    x_len: usize,
    report: *mut TrilinSolveReport,
) -> TrilinStatus {
    guard(|| {
        let a = unsafe { matrix(a) }?;
        let b = unsafe { slice(b, b_len, "b") }?;
        let config = unsafe { config.as_ref() }.ok_or_else(|| null("config"))?;
        let report = unsafe { report.as_mut() }.ok_or_else(|| null("report"))?;
        let cfg = SolverConfig::from(config);
        match solver::solve(a, b, &cfg) {
            Ok(o) => {
                unsafe { write_x(&o.x, x_out, x_len) }?;
                *report = TrilinSolveReport {
                    outcome: match o.tag {
                        OutcomeTag::EpsSolution => TrilinOutcome::EpsSolution,
                        OutcomeTag::NormalEqEpsSolution => TrilinOutcome::NormalEqEpsSolution,
                        OutcomeTag::Unsolvable => TrilinOutcome::Unsolvable,
                    },
                    residual: o.residual,
                    normal_residual: o.normal_residual,
                    delta_lower_bound: o.delta_lower_bound.unwrap_or(f64::NAN),
                    iterations: o.iterations,
                    final_radius: o.radius_history.last().copied().unwrap_or(0.0),
                    radius_count: o.radius_history.len(),
                };
                Ok(TrilinStatus::Ok)
            }
            Err(Error::Inconclusive {
                iterations,
                radius,
                gap,
                c_norm,
                x,
            }) => {
                let (residual, normal_residual) = solver::residuals(a, &x, b)?;
                unsafe { write_x(&x, x_out, x_len) }?;
                *report = TrilinSolveReport {
                    outcome: TrilinOutcome::Inconclusive,
                    residual,
                    normal_residual,
                    delta_lower_bound: f64::NAN,
                    iterations,
                    final_radius: radius,
                    radius_count: 0,
                };
                Err(Error::Inconclusive {
                    iterations,
                    radius,
                    gap,
                    c_norm,
                    x,
                }
                .into())
            }
            Err(e) => Err(e.into()),
        }
    })
}

/// Tests whether `b` lies within `epsilon` of `{Ax : |x| <= radius}`.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `a` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn trilin_membership(
    a: *const TrilinMatrix,
    b: *const f64,
    b_len: usize,
    config: *const TrilinMembershipConfig,
    x_out: *mut f64,
    x_len: usize,
    report: *mut TrilinMembershipReport,
) -> TrilinStatus {
    guard(|| {
        let a = unsafe { matrix(a) }?;
        let b = unsafe { slice(b, b_len, "b") }?;
        let config = unsafe { config.as_ref() }.ok_or_else(|| null("config"))?;
        let report = unsafe { report.as_mut() }.ok_or_else(|| null("report"))?;
        let mut cfg = MembershipConfig::new(config.radius, config.epsilon);
        cfg.pivot_mode = config.pivot_mode.into();
        cfg.max_iters = (config.max_iters > 0).then_some(config.max_iters);
        let res = membership::run_membership_with(a, b, &cfg, &mut trilin::trace::NoTrace)?;
        unsafe { write_x(&res.state.x_prime, x_out, x_len) }?;
        let cert = res.certificate.as_ref();
        *report = TrilinMembershipReport {
            tag: match res.tag {
                MembershipTag::NearPoint => TrilinMembershipTag::NearPoint,
                MembershipTag::Witness => TrilinMembershipTag::Witness,
                MembershipTag::IterationCapReached => TrilinMembershipTag::IterationCapReached,
            },
            gap: res.state.gap,
            iterations: res.state.iterations,
            distance_lower: cert.map_or(f64::NAN, |c| c.delta_lower),
            distance_upper: cert.map_or(f64::NAN, |c| c.delta_upper),
            radius_lower_bound: cert.map_or(f64::NAN, |c| c.radius_lower_bound),
        };
        Ok(TrilinStatus::Ok)
    })
}

/// Unrestarted BiCGSTAB on a square system; converged means
/// `|Ax - b| <= tol |b|`.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `a` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn trilin_bicgstab(
    a: *const TrilinMatrix,
    b: *const f64,
    b_len: usize,
    tol: f64,
    max_iters: u64,
    precond: TrilinPreconditioner,
    x_out: *mut f64,
    x_len: usize,
    report: *mut TrilinBaselineReport,
) -> TrilinStatus {
    guard(|| {
        let a = unsafe { matrix(a) }?;
        let b = unsafe { slice(b, b_len, "b") }?;
        let report = unsafe { report.as_mut() }.ok_or_else(|| null("report"))?;
        let precond = match precond {
            TrilinPreconditioner::None => Preconditioner::None,
            TrilinPreconditioner::Jacobi => Preconditioner::Jacobi,
        };
        let rep = baselines::bicgstab(a, b, tol, max_iters, precond)?;
        unsafe { write_x(&rep.x, x_out, x_len) }?;
        *report = TrilinBaselineReport {
            converged: rep.converged,
            breakdown: rep.breakdown.is_some(),
            residual: rep.residual,
            normal_residual: rep.normal_residual,
            iterations: rep.iterations,
        };
        Ok(TrilinStatus::Ok)
    })
}
