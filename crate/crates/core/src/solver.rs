//! Solvability driver for `Ax = b`.
//!
//! Runs the membership iteration at a radius `r`, and every time the iterate
//! turns out to be a witness enlarges the radius to
//! `max((p - p')^T p / |c|, 2r)`. Iterates persist across radius changes
//! because the ellipsoids are nested.
//!
//! Termination:
//! - `|Ax' - b| <= eps` gives [`OutcomeTag::EpsSolution`];
//! - a witness with `|A^T (Ax' - b)| <= normal_eq_tol` gives
//!   [`OutcomeTag::NormalEqEpsSolution`], except that while
//!   `(p - p')^T p >= 2 t` the radius keeps growing until the cap, where the
//!   certificate side conditions decide on [`OutcomeTag::Unsolvable`];
//! - a witness at the radius cap, or exhausting the iteration budget, is
//!   reported as [`Error::Inconclusive`].
//!
//! Once `r >= |b|^2 / eps` every witness has `|c| < eps`, so with the default
//! cap and tolerances the driver always reaches one of the first two cases.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, DenseMatrix, Vector};
use crate::membership::{
    run_membership_with, validate_epsilon, validate_rhs, MembershipConfig, MembershipTag, PivotMode, Probe,
    Walker,
};
use crate::trace::{NoTrace, TraceEvent, TraceRecord, TraceSink};

pub const DEFAULT_MAX_ITERS_TOTAL: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    /// Initial radius; `None` uses `|b| / |A|` with `|A|` from power iteration.
    pub r0: Option<f64>,
    /// Largest radius tried; `None` uses `|b|^2 / eps`, or
    /// `(|b| / eps) max(|b|, 2 / sigma_*)` when `sigma_star_hint` is set.
    pub radius_cap: Option<f64>,
    pub pivot_mode: PivotMode,
    /// Budget on pivot steps across all radii.
    pub max_iters_total: u64,
    /// Tolerance on `|A^T A x - A^T b|` at a witness; `None` means `epsilon`.
    pub normal_eq_tol: Option<f64>,
    /// Tolerance `t` of the unsolvability side conditions
    /// `|(p - p')^T p - |p - p'|^2| <= t` and `(p - p')^T p >= 2t`.
    /// `None` means `epsilon`; zero disables the unsolvability verdict.
    pub unsolvable_tol: Option<f64>,
    /// Smallest positive singular value of `A`, if known.
    pub sigma_star_hint: Option<f64>,
}

impl SolverConfig {
    pub fn new(epsilon: f64) -> Self {
        SolverConfig {
            epsilon,
            r0: None,
            radius_cap: None,
            pivot_mode: PivotMode::Standard,
            max_iters_total: DEFAULT_MAX_ITERS_TOTAL,
            normal_eq_tol: None,
            unsolvable_tol: None,
            sigma_star_hint: None,
        }
    }

    pub fn with_r0(mut self, r0: f64) -> Self {
        self.r0 = Some(r0);
        self
    }

    pub fn with_radius_cap(mut self, cap: f64) -> Self {
        self.radius_cap = Some(cap);
        self
    }

    pub fn with_pivot_mode(mut self, mode: PivotMode) -> Self {
        self.pivot_mode = mode;
        self
    }

    pub fn with_max_iters(mut self, n: u64) -> Self {
        self.max_iters_total = n;
        self
    }

    pub fn normal_eq_tol(&self) -> f64 {
        self.normal_eq_tol.unwrap_or(self.epsilon)
    }

    pub fn unsolvable_tol(&self) -> f64 {
        self.unsolvable_tol.unwrap_or(self.epsilon)
    }

    fn validate(&self) -> Result<()> {
        validate_epsilon(self.epsilon)?;
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => {
                Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {x}")))
            }
            _ => Ok(()),
        };
        positive("r0", self.r0)?;
        positive("radius_cap", self.radius_cap)?;
        positive("sigma_star_hint", self.sigma_star_hint)?;
        if let (Some(r0), Some(cap)) = (self.r0, self.radius_cap) {
            if cap < r0 {
                return Err(Error::InvalidArgument(format!("radius_cap {cap} is below r0 {r0}")));
            }
        }
        if self.normal_eq_tol() < 0.0 || self.unsolvable_tol() < 0.0 {
            return Err(Error::InvalidArgument("tolerances must be non-negative".into()));
        }
        if self.max_iters_total == 0 {
            return Err(Error::InvalidArgument("max_iters_total must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutcomeTag {
    EpsSolution,
    NormalEqEpsSolution,
    Unsolvable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutcome {
    pub tag: OutcomeTag,
    pub x: Vector,
    /// `|Ax - b|`, recomputed from `x`.
    pub residual: f64,
    /// `|A^T A x - A^T b|`, recomputed from `x`.
    pub normal_residual: f64,
    /// Certified lower bound on `min |Ax - b|` (unsolvable outcomes only).
    pub delta_lower_bound: Option<f64>,
    /// Every radius used, starting with `r0`.
    pub radius_history: Vec<f64>,
    /// Pivot steps taken.
    pub iterations: u64,
}

impl SolveOutcome {
    /// True when at least one witness forced a radius increase.
    pub fn escalated(&self) -> bool {
        self.radius_history.len() > 1
    }

    pub fn report(&self, wall_time_ms: f64) -> SolveReport {
        SolveReport {
            tag: self.tag,
            residual: self.residual,
            normal_residual: self.normal_residual,
            delta_lower_bound: self.delta_lower_bound,
            iterations: self.iterations,
            radius_history: self.radius_history.clone(),
            wall_time_ms,
        }
    }
}

/// JSON shape of a solve result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub tag: OutcomeTag,
    pub residual: f64,
    pub normal_residual: f64,
    pub delta_lower_bound: Option<f64>,
    pub iterations: u64,
    pub radius_history: Vec<f64>,
    pub wall_time_ms: f64,
}

/// Radius after a witness: `max((p - p')^T p / |c|, 2r)`.
pub fn radius_update(r: f64, p: &[f64], p_prime: &[f64], c: &[f64]) -> Result<f64> {
    let cn = linalg::norm2(c);
    if cn == 0.0 {
        return Err(Error::DegeneratePivot(
            "zero direction; radius growth cannot help, route to the unsolvability checks",
        ));
    }
    let excess = dot(&linalg::sub(p, p_prime), p);
    Ok((excess / cn).max(2.0 * r))
}

/// `sqrt(((p - p')^T p - eps) / 4)` when `(p - p')^T p > eps`.
///
/// Valid as a lower bound on `min |Ax - b|` when `p'` is a witness at a radius
/// containing the minimum-norm least-squares solution, `|c| <= eps` and
/// `|(p - p')^T p - |p - p'|^2| <= eps`.
pub fn delta_lower_bound(p: &[f64], p_prime: &[f64], epsilon: f64) -> Option<f64> {
    let excess = dot(&linalg::sub(p, p_prime), p);
    (excess > epsilon).then(|| ((excess - epsilon) / 4.0).sqrt())
}

/// `(|Ax - b|, |A^T (Ax - b)|)`.
pub fn residuals(a: &DenseMatrix, x: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let mut r = linalg::matvec(a, x)?.into_inner();
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    let g = linalg::transpose_matvec(a, &r)?;
    Ok((linalg::norm2(&r), g.norm()))
}

/// Radii actually used for a run: `(r0, cap)`.
pub fn resolve_radii(a: &DenseMatrix, b: &[f64], cfg: &SolverConfig) -> Result<(f64, f64)> {
    let b_norm = linalg::norm2(b);
    let r0 = match cfg.r0 {
        Some(r0) => r0,
        None => {
            let sigma = linalg::operator_norm_estimate(a, 1e-6)?;
            if sigma > 0.0 {
                b_norm / sigma
            } else {
                1.0
            }
        }
    };
    let cap = match cfg.radius_cap {
        Some(cap) => cap,
        None => {
            let eps = cfg.epsilon;
            let base = match cfg.sigma_star_hint {
                Some(s) => (b_norm / eps) * b_norm.max(2.0 / s),
                None => b_norm * b_norm / eps,
            };
            base.max(r0)
        }
    };
    Ok((r0, cap))
}

pub fn solve(a: &DenseMatrix, b: &[f64], cfg: &SolverConfig) -> Result<SolveOutcome> {
    solve_with(a, b, cfg, &mut NoTrace)
}

pub fn solve_with<S: TraceSink + ?Sized>(
    a: &DenseMatrix,
    b: &[f64],
    cfg: &SolverConfig,
    sink: &mut S,
) -> Result<SolveOutcome> {
    validate_rhs(a, b)?;
    cfg.validate()?;
    if b.iter().all(|&v| v == 0.0) {
        return Ok(SolveOutcome {
            tag: OutcomeTag::EpsSolution,
            x: Vector::zeros(a.cols()),
            residual: 0.0,
            normal_residual: 0.0,
            delta_lower_bound: None,
            radius_history: Vec::new(),
            iterations: 0,
        });
    }

    let (r0, cap) = resolve_radii(a, b, cfg)?;
    let eps = cfg.epsilon;
    let normal_tol = cfg.normal_eq_tol();
    let cert_tol = cfg.unsolvable_tol();

    let mut w = Walker::new(a, b);
    let mut r = r0;
    let mut radius_history = vec![r0];
    // Set after p' is recomputed from x', cleared by the next step.
    let mut synced = false;

    let finish = |w: &Walker, tag, delta_lower_bound, radius_history| -> Result<SolveOutcome> {
        let (residual, normal_residual) = residuals(a, &w.x_prime, b)?;
        Ok(SolveOutcome {
            tag,
            x: Vector::from_vec_unchecked(w.x_prime.clone()),
            residual,
            normal_residual,
            delta_lower_bound,
            radius_history,
            iterations: w.iterations,
        })
    };
    let inconclusive = |w: &Walker, r: f64| Error::Inconclusive {
        iterations: w.iterations,
        radius: r,
        gap: w.gap,
        c_norm: w.c_norm,
        x: w.x_prime.clone(),
    };

    loop {
        let probe = w.probe(r, eps, cfg.pivot_mode);
        let witness = match probe {
            Probe::Near => {
                let (res, _) = residuals(a, &w.x_prime, b)?;
                if res <= eps {
                    done(sink, &w, r);
                    return finish(&w, OutcomeTag::EpsSolution, None, radius_history);
                }
                if synced {
                    return Err(Error::Numerical(format!(
                        "iterate gap {} disagrees with residual {res}",
                        w.gap
                    )));
                }
                w.resync();
                synced = true;
                continue;
            }
            Probe::Pivot => {
                if w.iterations >= cfg.max_iters_total {
                    return Err(inconclusive(&w, r));
                }
                match w.pivot_step(r)? {
                    Some(alpha) => {
                        synced = false;
                        sink.record(&TraceRecord {
                            iter: w.iterations,
                            gap: linalg::dist(&w.p, &w.p_prime),
                            radius: r,
                            alpha,
                            event: TraceEvent::Pivot,
                        });
                        false
                    }
                    None => true,
                }
            }
            Probe::ZeroDirection | Probe::NoPivot => true,
        };
        if !witness {
            continue;
        }

        sink.record(&TraceRecord {
            iter: w.iterations,
            gap: w.gap,
            radius: r,
            alpha: 0.0,
            event: TraceEvent::Witness,
        });

        if w.c_norm <= normal_tol {
            let (_, normal_res) = residuals(a, &w.x_prime, b)?;
            if normal_res > normal_tol && !synced {
                w.resync();
                synced = true;
                continue;
            }
            let excess = w.excess();
            let suspect = cert_tol > 0.0 && excess >= 2.0 * cert_tol;
            // certified only at the cap, or when p' is exactly the projection onto range(A)
            let settled = r >= cap || w.c_norm == 0.0;
            if !suspect || settled {
                done(sink, &w, r);
                if suspect && (excess - w.gap * w.gap).abs() <= cert_tol {
                    // 4 Delta^2 >= excess - t >= t
                    let bound = Some(0.5 * cert_tol.sqrt());
                    return finish(&w, OutcomeTag::Unsolvable, bound, radius_history);
                }
                return finish(&w, OutcomeTag::NormalEqEpsSolution, None, radius_history);
            }
        }

        if r >= cap {
            return Err(inconclusive(&w, r));
        }
        let next = (w.excess() / w.c_norm).max(2.0 * r).min(cap);
        r = next;
        radius_history.push(r);
        sink.record(&TraceRecord {
            iter: w.iterations,
            gap: w.gap,
            radius: r,
            alpha: 0.0,
            event: TraceEvent::Radius,
        });
    }
}

fn done<S: TraceSink + ?Sized>(sink: &mut S, w: &Walker, r: f64) {
    sink.record(&TraceRecord {
        iter: w.iterations,
        gap: w.gap,
        radius: r,
        alpha: 0.0,
        event: TraceEvent::Done,
    });
}

/// Bracket on the smallest radius admitting an `eps`-solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinNormResult {
    pub x: Vector,
    pub r_low: f64,
    pub r_high: f64,
    pub residual: f64,
    /// Membership runs performed.
    pub probes: usize,
}

/// Bisects the radius over `[0, r_feasible]`, keeping `r_high` at a radius
/// where the membership run found an `eps`-solution and `r_low` at one where
/// it did not (or 0).
///
/// Runs that hit their iteration budget count as "not found", so `r_high`
/// always carries a verified solution.
pub fn min_norm_refine(
    a: &DenseMatrix,
    b: &[f64],
    cfg: &SolverConfig,
    r_feasible: f64,
    width: f64,
) -> Result<MinNormResult> {
    if !(width > 0.0) {
        return Err(Error::InvalidArgument(format!("width must be positive, got {width}")));
    }
    if !(r_feasible > 0.0 && r_feasible.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "r_feasible must be positive, got {r_feasible}"
        )));
    }
    cfg.validate()?;

    let probe = |r: f64| -> Result<Option<Vector>> {
        let mcfg = MembershipConfig {
            pivot_mode: cfg.pivot_mode,
            max_iters: Some(cfg.max_iters_total),
            ..MembershipConfig::new(r, cfg.epsilon)
        };
        let res = run_membership_with(a, b, &mcfg, &mut NoTrace)?;
        Ok((res.tag == MembershipTag::NearPoint).then_some(res.state.x_prime))
    };

    let mut x = probe(r_feasible)?.ok_or_else(|| {
        Error::InvalidArgument(format!("no eps-solution found within radius {r_feasible}"))
    })?;
    let mut probes = 1;
    let (mut lo, mut hi) = (0.0, r_feasible);
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        probes += 1;
        match probe(mid)? {
            Some(xm) => {
                hi = mid;
                x = xm;
            }
            None => lo = mid,
        }
    }
    let (residual, _) = residuals(a, &x, b)?;
    Ok(MinNormResult {
        x,
        r_low: lo,
        r_high: hi,
        residual,
        probes,
    })
}
