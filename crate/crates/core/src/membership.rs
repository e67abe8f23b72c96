//! Membership test for the ellipsoid `C(A, r) = { Ax : |x| <= r }`.
//!
//! Starting from `p' = 0`, each iteration computes the direction
//! `c = A^T (b - p')`, the farthest point `v_r = r A c / |c|` of the ellipsoid
//! along `c`, and moves `p'` to the point of segment `[p', v_r]` nearest to
//! `b`. The run ends when `|b - p'| <= eps` or when `v_r` fails the pivot
//! inequality, in which case `p'` is a witness: the hyperplane bisecting
//! `[p', b]` separates `b` from the ellipsoid and `|b - p'|` brackets the
//! distance from `b` to the ellipsoid within a factor of two.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, gemv_into, gemv_t_into, norm2, DenseMatrix, Vector};
use crate::trace::{NoTrace, TraceEvent, TraceRecord, TraceSink};

/// Hard ceiling on default iteration budgets.
pub const MAX_ITERS_CEILING: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PivotMode {
    /// `r|c| >= (|p|^2 - |p'|^2) / 2`
    #[default]
    Standard,
    /// `r|c| >= (p - p')^T p`
    Strict,
}

impl fmt::Display for PivotMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PivotMode::Standard => "standard",
            PivotMode::Strict => "strict",
        })
    }
}

impl FromStr for PivotMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(PivotMode::Standard),
            "strict" => Ok(PivotMode::Strict),
            other => Err(Error::InvalidArgument(format!(
                "unknown pivot mode `{other}` (expected standard or strict)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotTest {
    Pivot,
    NoPivot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrictPivotTest {
    StrictPivot,
    NoStrictPivot,
}

/// Absolute slack applied to both pivot inequalities.
pub fn pivot_slack(p_norm_sq: f64) -> f64 {
    1e-12 * (1.0 + p_norm_sq)
}

/// Live iterate of a membership run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipState {
    /// Target point (the right-hand side `b`).
    pub p: Vector,
    /// Current point of the ellipsoid.
    pub p_prime: Vector,
    /// Preimage of `p_prime` inside the radius-`r` ball.
    pub x_prime: Vector,
    pub r: f64,
    /// Last computed direction `A^T (p - p')`.
    pub c: Vector,
    pub gap: f64,
    pub iterations: u64,
}

/// Evidence that `b` is not in `C(A, r)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessCertificate {
    pub p_prime: Vector,
    pub x_prime: Vector,
    pub gap: f64,
    /// Lower bound on the distance from `b` to `C(A, r)`.
    pub delta_lower: f64,
    /// Upper bound on the same distance (`gap`, since `p'` is in the set).
    pub delta_upper: f64,
    /// `b` lies outside `C(A, r')` for every `r' < radius_lower_bound`.
    /// Infinite when `c = 0`.
    pub radius_lower_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MembershipTag {
    NearPoint,
    Witness,
    IterationCapReached,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipResult {
    pub tag: MembershipTag,
    pub state: MembershipState,
    pub certificate: Option<WitnessCertificate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipConfig {
    pub radius: f64,
    pub epsilon: f64,
    pub pivot_mode: PivotMode,
    /// `None` selects [`default_max_iters`].
    pub max_iters: Option<u64>,
}

impl MembershipConfig {
    pub fn new(radius: f64, epsilon: f64) -> Self {
        MembershipConfig {
            radius,
            epsilon,
            pivot_mode: PivotMode::Standard,
            max_iters: None,
        }
    }
}

/// `100 * ceil((r |A| / eps)^2)`, clamped to `[1, MAX_ITERS_CEILING]`.
pub fn default_max_iters(radius: f64, a_norm: f64, epsilon: f64) -> u64 {
    let q = (radius * a_norm / epsilon).powi(2).ceil();
    let budget = 100.0 * q;
    if !budget.is_finite() || budget >= MAX_ITERS_CEILING as f64 {
        MAX_ITERS_CEILING
    } else {
        (budget as u64).max(1)
    }
}

fn check_conform(op: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { op, expected, got });
    }
    Ok(())
}

/// `A^T (p - p')`.
pub fn direction(a: &DenseMatrix, p: &[f64], p_prime: &[f64]) -> Result<Vector> {
    check_conform("direction", p.len(), p_prime.len())?;
    linalg::transpose_matvec(a, &linalg::sub(p, p_prime))
}

/// `v_r = r A c / |c|`, the image of the maximizer of `c^T x` over the
/// radius-`r` ball.
pub fn pivot_point(a: &DenseMatrix, c: &[f64], r: f64) -> Result<Vector> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let cn = norm2(c);
    if cn == 0.0 {
        return Err(Error::DegeneratePivot("zero direction; the current iterate is a witness"));
    }
    linalg::matvec(a, &linalg::scale(r / cn, c))
}

pub fn pivot_test(r: f64, c: &[f64], p: &[f64], p_prime: &[f64]) -> PivotTest {
    let diff = linalg::sub(p, p_prime);
    let gap_sq = dot(&diff, &diff);
    let threshold = dot(&diff, p) - 0.5 * gap_sq;
    if r * norm2(c) >= threshold - pivot_slack(dot(p, p)) {
        PivotTest::Pivot
    } else {
        PivotTest::NoPivot
    }
}

pub fn strict_pivot_test(r: f64, c: &[f64], p: &[f64], p_prime: &[f64]) -> StrictPivotTest {
    let diff = linalg::sub(p, p_prime);
    if r * norm2(c) >= dot(&diff, p) - pivot_slack(dot(p, p)) {
        StrictPivotTest::StrictPivot
    } else {
        StrictPivotTest::NoStrictPivot
    }
}

/// Result of one move toward a pivot.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub p_prime: Vector,
    pub x_prime: Vector,
    pub alpha: f64,
}

/// Moves `p'` to the point of `[p', v_r]` nearest to `p` and carries the
/// preimage along.
pub fn step(p: &[f64], p_prime: &[f64], v_r: &[f64], x_prime: &[f64], x_v: &[f64]) -> Result<Step> {
    check_conform("step", p.len(), p_prime.len())?;
    check_conform("step", p.len(), v_r.len())?;
    check_conform("step", x_prime.len(), x_v.len())?;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..p.len() {
        let w = v_r[i] - p_prime[i];
        num += (p[i] - p_prime[i]) * w;
        den += w * w;
    }
    if den == 0.0 {
        return Err(Error::DegeneratePivot("pivot coincides with the current iterate"));
    }
    let alpha = (num / den).clamp(0.0, 1.0);
    let blend = |a: &[f64], b: &[f64]| -> Vector {
        Vector::from_vec_unchecked(a.iter().zip(b).map(|(u, v)| (1.0 - alpha) * u + alpha * v).collect())
    };
    Ok(Step {
        p_prime: blend(p_prime, v_r),
        x_prime: blend(x_prime, x_v),
        alpha,
    })
}

/// Outcome of probing the current iterate at some radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Probe {
    /// `|p - p'| <= eps`.
    Near,
    /// `c = 0`: `p'` is the projection of `p` onto the range of `A`.
    ZeroDirection,
    Pivot,
    /// Neither inequality of the active mode holds.
    NoPivot,
}

/// Shared iteration engine for membership runs and the solver driver.
///
/// `p'` is updated by convex combination rather than recomputed from `x'`,
/// so each iteration costs exactly one `A^T y` and one `A x`.
pub(crate) struct Walker<'a> {
    a: &'a DenseMatrix,
    pub p: Vec<f64>,
    pub p_prime: Vec<f64>,
    pub x_prime: Vec<f64>,
    /// `p - p'`, refreshed by every probe.
    pub diff: Vec<f64>,
    pub c: Vec<f64>,
    v: Vec<f64>,
    xv: Vec<f64>,
    p_norm_sq: f64,
    pub gap: f64,
    pub c_norm: f64,
    pub iterations: u64,
}

impl<'a> Walker<'a> {
    pub fn new(a: &'a DenseMatrix, b: &[f64]) -> Self {
        let (m, n) = (a.rows(), a.cols());
        let p = b.to_vec();
        let p_norm_sq = dot(&p, &p);
        Walker {
            a,
            diff: p.clone(),
            gap: p_norm_sq.sqrt(),
            p,
            p_prime: vec![0.0; m],
            x_prime: vec![0.0; n],
            c: vec![0.0; n],
            v: vec![0.0; m],
            xv: vec![0.0; n],
            p_norm_sq,
            c_norm: f64::NAN,
            iterations: 0,
        }
    }

    pub fn refresh_gap(&mut self) -> f64 {
        for ((d, p), q) in self.diff.iter_mut().zip(&self.p).zip(&self.p_prime) {
            *d = p - q;
        }
        self.gap = norm2(&self.diff);
        self.gap
    }

    pub fn refresh_direction(&mut self) -> f64 {
        gemv_t_into(self.a, &self.diff, &mut self.c);
        self.c_norm = norm2(&self.c);
        self.c_norm
    }

    /// `(p - p')^T p`.
    pub fn excess(&self) -> f64 {
        dot(&self.diff, &self.p)
    }

    /// `(|p|^2 - |p'|^2) / 2`, evaluated as `(p - p')^T p - |p - p'|^2 / 2`.
    pub fn pivot_threshold(&self) -> f64 {
        self.excess() - 0.5 * self.gap * self.gap
    }

    pub fn slack(&self) -> f64 {
        pivot_slack(self.p_norm_sq)
    }

    /// True when `r|c|` falls short of the standard pivot threshold.
    pub fn is_standard_witness(&self, r: f64) -> bool {
        r * self.c_norm < self.pivot_threshold() - self.slack()
    }

    pub fn probe(&mut self, r: f64, eps: f64, mode: PivotMode) -> Probe {
        if self.refresh_gap() <= eps {
            return Probe::Near;
        }
        if self.refresh_direction() == 0.0 {
            return Probe::ZeroDirection;
        }
        let rc = r * self.c_norm;
        let threshold = match mode {
            PivotMode::Standard => self.pivot_threshold(),
            PivotMode::Strict => self.excess(),
        };
        if rc >= threshold - self.slack() {
            Probe::Pivot
        } else {
            Probe::NoPivot
        }
    }

    /// Takes the pivot step at radius `r` using the direction from the last
    /// probe. Returns `None` when the step would not move (`alpha = 0`), which
    /// only happens when the pivot inequality was met inside the slack.
    pub fn pivot_step(&mut self, r: f64) -> Result<Option<f64>> {
        let s = r / self.c_norm;
        for (xv, c) in self.xv.iter_mut().zip(&self.c) {
            *xv = s * c;
        }
        gemv_into(self.a, &self.xv, &mut self.v);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.v.len() {
            let w = self.v[i] - self.p_prime[i];
            num += self.diff[i] * w;
            den += w * w;
        }
        if den == 0.0 {
            return Err(Error::DegeneratePivot("pivot coincides with the current iterate"));
        }
        let alpha = (num / den).min(1.0);
        if !(alpha > 0.0) {
            return Ok(None);
        }
        let keep = 1.0 - alpha;
        for (q, v) in self.p_prime.iter_mut().zip(&self.v) {
            *q = keep * *q + alpha * v;
        }
        for (x, xv) in self.x_prime.iter_mut().zip(&self.xv) {
            *x = keep * *x + alpha * xv;
        }
        self.iterations += 1;
        Ok(Some(alpha))
    }

    /// Recomputes `p' = A x'` to discard accumulated rounding.
    pub fn resync(&mut self) {
        gemv_into(self.a, &self.x_prime, &mut self.p_prime);
    }

    pub fn state(&self, r: f64) -> MembershipState {
        MembershipState {
            p: Vector::from_vec_unchecked(self.p.clone()),
            p_prime: Vector::from_vec_unchecked(self.p_prime.clone()),
            x_prime: Vector::from_vec_unchecked(self.x_prime.clone()),
            r,
            c: Vector::from_vec_unchecked(self.c.clone()),
            gap: self.gap,
            iterations: self.iterations,
        }
    }

    /// Certificate for the current iterate, which must have failed the
    /// active pivot test at radius `r` (or have `c = 0`).
    pub fn certificate(&self, r: f64) -> WitnessCertificate {
        let gap = self.gap;
        let excess = self.excess();
        let (delta_lower, radius_lower_bound) = if self.c_norm == 0.0 {
            (0.5 * gap, f64::INFINITY)
        } else if self.is_standard_witness(r) {
            (0.5 * gap, excess / self.c_norm)
        } else {
            // Strict-mode stop that is still a pivot: only the supporting
            // hyperplane through p separates, at distance (excess - r|c|)/gap.
            (((excess - r * self.c_norm) / gap).max(0.0), excess / self.c_norm)
        };
        WitnessCertificate {
            p_prime: Vector::from_vec_unchecked(self.p_prime.clone()),
            x_prime: Vector::from_vec_unchecked(self.x_prime.clone()),
            gap,
            delta_lower,
            delta_upper: gap,
            radius_lower_bound,
        }
    }
}

pub(crate) fn validate_rhs(a: &DenseMatrix, b: &[f64]) -> Result<()> {
    check_conform("rhs", a.rows(), b.len())?;
    if let Some(index) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

pub(crate) fn validate_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

/// Runs the membership test with the standard pivot rule and no trace.
pub fn run_membership(
    a: &DenseMatrix,
    b: &[f64],
    r: f64,
    eps: f64,
    max_iters: Option<u64>,
) -> Result<MembershipResult> {
    let cfg = MembershipConfig {
        max_iters,
        ..MembershipConfig::new(r, eps)
    };
    run_membership_with(a, b, &cfg, &mut NoTrace)
}

pub fn run_membership_with<S: TraceSink + ?Sized>(
    a: &DenseMatrix,
    b: &[f64],
    cfg: &MembershipConfig,
    sink: &mut S,
) -> Result<MembershipResult> {
    validate_rhs(a, b)?;
    validate_epsilon(cfg.epsilon)?;
    let r = cfg.radius;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if b.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("right-hand side must be nonzero".into()));
    }
    let max_iters = match cfg.max_iters {
        Some(0) => return Err(Error::InvalidArgument("max_iters must be at least 1".into())),
        Some(k) => k,
        None => default_max_iters(r, linalg::operator_norm_estimate(a, 1e-6)?, cfg.epsilon),
    };

    let mut w = Walker::new(a, b);
    let eps = cfg.epsilon;
    loop {
        let probe = w.probe(r, eps, cfg.pivot_mode);
        let stop = match probe {
            Probe::Near => Some(MembershipTag::NearPoint),
            Probe::ZeroDirection | Probe::NoPivot => Some(MembershipTag::Witness),
            Probe::Pivot if w.iterations >= max_iters => Some(MembershipTag::IterationCapReached),
            Probe::Pivot => match w.pivot_step(r)? {
                Some(alpha) => {
                    sink.record(&TraceRecord {
                        iter: w.iterations,
                        gap: linalg::dist(&w.p, &w.p_prime),
                        radius: r,
                        alpha,
                        event: TraceEvent::Pivot,
                    });
                    None
                }
                None => Some(MembershipTag::Witness),
            },
        };
        if let Some(tag) = stop {
            let certificate = (tag == MembershipTag::Witness).then(|| w.certificate(r));
            sink.record(&TraceRecord {
                iter: w.iterations,
                gap: w.gap,
                radius: r,
                alpha: 0.0,
                event: if tag == MembershipTag::Witness {
                    TraceEvent::Witness
                } else {
                    TraceEvent::Done
                },
            });
            return Ok(MembershipResult {
                tag,
                state: w.state(r),
                certificate,
            });
        }
    }
}
