use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trilin::baselines::{bicgstab, steepest_descent_normal, Preconditioner};
use trilin::instance::{generate, InstanceKind, InstanceSpec};
use trilin::linalg::{self, dot, norm2, random_orthogonal, DenseMatrix, Vector};
use trilin::membership::{
    direction, pivot_point, pivot_test, run_membership_with, step, MembershipConfig, MembershipTag, PivotMode,
    PivotTest,
};
use trilin::oracles::{least_squares_direct, project_to_ellipsoid, smallest_positive_singular_value, svd};
use trilin::solver::{residuals, solve, OutcomeTag, SolverConfig};
use trilin::trace::{TraceEvent, TraceRecord};

fn random_matrix(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DenseMatrix::new(m, n, data).unwrap()
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Rank-`k` product of two random factors.
fn low_rank(m: usize, n: usize, k: usize, seed: u64) -> DenseMatrix {
    random_matrix(m, k, seed).matmul(&random_matrix(k, n, seed + 1)).unwrap()
}

/// Determinant by cofactor expansion.
fn det(a: &[Vec<f64>]) -> f64 {
    let k = a.len();
    if k == 1 {
        return a[0][0];
    }
    (0..k)
        .map(|j| {
            let minor: Vec<Vec<f64>> = a[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, v)| *v).collect())
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * a[0][j] * det(&minor)
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity(m in 1usize..12, n in 1usize..12, seed in any::<u64>()) {
        let a = random_matrix(m, n, seed);
        let x = random_vec(n, seed + 1);
        let y = random_vec(m, seed + 2);
        let lhs = dot(&y, &linalg::matvec(&a, &x).unwrap());
        let rhs = dot(&linalg::transpose_matvec(&a, &y).unwrap(), &x);
        let scale = a.frobenius_norm() * norm2(&x) * norm2(&y);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn orthogonal_has_unit_determinant(k in 1usize..=6, seed in any::<u64>()) {
        let q = random_orthogonal(k, seed);
        let rows: Vec<Vec<f64>> = (0..k).map(|i| q.row(i).to_vec()).collect();
        prop_assert!((det(&rows).abs() - 1.0).abs() < 1e-8);
    }

    /// Drives single steps through the public API and checks every iterate.
    #[test]
    fn steps_stay_feasible_and_gap_decreases(
        m in 1usize..8, n in 1usize..8, seed in any::<u64>(), r in 0.1f64..5.0,
    ) {
        let a = random_matrix(m, n, seed);
        let p = random_vec(m, seed + 7);
        prop_assume!(norm2(&p) > 1e-3);
        let mut p_prime = vec![0.0; m];
        let mut x_prime = vec![0.0; n];
        let mut gap = norm2(&p);
        for _ in 0..200 {
            let c = direction(&a, &p, &p_prime).unwrap();
            let c_norm = c.norm();
            if c_norm == 0.0 || pivot_test(r, &c, &p, &p_prime) == PivotTest::NoPivot {
                break;
            }
            let v = pivot_point(&a, &c, r).unwrap();
            let x_v: Vec<f64> = c.iter().map(|ci| r * ci / c_norm).collect();
            let Ok(s) = step(&p, &p_prime, &v, &x_prime, &x_v) else { break };
            p_prime = s.p_prime.into_inner();
            x_prime = s.x_prime.into_inner();
            prop_assert!(norm2(&x_prime) <= r * (1.0 + 1e-12));
            let ax = linalg::matvec(&a, &x_prime).unwrap();
            prop_assert!(linalg::dist(&ax, &p_prime) <= 1e-10 * (1.0 + norm2(&p_prime)));
            let new_gap = linalg::dist(&p, &p_prime);
            prop_assert!(new_gap <= gap * (1.0 + 1e-12) + 1e-14 * norm2(&p));
            if s.alpha > 1e-12 && gap > 1e-12 {
                prop_assert!(new_gap < gap, "alpha {} but gap {} -> {}", s.alpha, gap, new_gap);
            }
            gap = new_gap;
        }
    }

    #[test]
    fn trace_gaps_are_monotone(m in 1usize..10, n in 1usize..10, seed in any::<u64>(), r in 0.05f64..4.0) {
        let a = random_matrix(m, n, seed);
        let b = random_vec(m, seed + 3);
        prop_assume!(norm2(&b) > 1e-3);
        let mut trace: Vec<TraceRecord> = Vec::new();
        let mut cfg = MembershipConfig::new(r, 1e-3);
        cfg.max_iters = Some(20_000);
        let res = run_membership_with(&a, &b, &cfg, &mut trace).unwrap();
        let gaps: Vec<f64> = trace.iter().filter(|t| t.event == TraceEvent::Pivot).map(|t| t.gap).collect();
        for w in gaps.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        prop_assert!(res.state.x_prime.norm() <= r * (1.0 + 1e-12));
    }

    /// Witness distance bracket and separation, checked against the projection oracle.
    #[test]
    fn witness_bracket_matches_oracle(m in 2usize..9, n in 1usize..9, seed in any::<u64>(), frac in 0.05f64..0.9) {
        let a = random_matrix(m, n, seed);
        let b = random_vec(m, seed + 11);
        let (x_star, _) = least_squares_direct(&a, &b).unwrap();
        let r = frac * x_star.norm().max(1e-3);
        let proj = project_to_ellipsoid(&a, &b, r).unwrap();
        prop_assume!(proj.delta_r > 1e-4);

        let mut cfg = MembershipConfig::new(r, 1e-6);
        cfg.max_iters = Some(2_000_000);
        let res = run_membership_with(&a, &b, &cfg, &mut trilin::trace::NoTrace).unwrap();
        prop_assert_eq!(res.tag, MembershipTag::Witness);
        let st = &res.state;
        prop_assert!(st.gap / 2.0 <= proj.delta_r + 1e-8, "gap {} delta {}", st.gap, proj.delta_r);
        prop_assert!(proj.delta_r <= st.gap + 1e-8, "gap {} delta {}", st.gap, proj.delta_r);
        // no pivot exists at the witness
        let c = direction(&a, &b, &st.p_prime).unwrap();
        let lhs = r * c.norm();
        let rhs = 0.5 * (dot(&b, &b) - dot(&st.p_prime, &st.p_prime));
        prop_assert!(lhs < rhs + 1e-9 * (1.0 + dot(&b, &b)));

        // every radius below the certified bound still excludes b
        let cert = res.certificate.unwrap();
        if cert.radius_lower_bound.is_finite() && cert.radius_lower_bound > 1e-6 {
            let below = project_to_ellipsoid(&a, &b, 0.999 * cert.radius_lower_bound).unwrap();
            prop_assert!(below.delta_r > 0.0);
        }
    }

    /// Every verdict is checked directly; unsolvable verdicts against the oracle residual.
    #[test]
    fn solve_outcomes_are_sound(
        m in 2usize..12, n in 2usize..12, rank in 1usize..6, seed in any::<u64>(), consistent in any::<bool>(),
    ) {
        let k = rank.min(m).min(n);
        let a = low_rank(m, n, k, seed);
        let b = if consistent {
            linalg::matvec(&a, &random_vec(n, seed + 5)).unwrap().into_inner()
        } else {
            random_vec(m, seed + 5)
        };
        prop_assume!(norm2(&b) > 1e-2);
        let eps = 1e-2;
        let cfg = SolverConfig::new(eps).with_max_iters(2_000_000);
        let out = match solve(&a, &b, &cfg) {
            Ok(o) => o,
            Err(trilin::Error::Inconclusive { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let (res, nres) = residuals(&a, &out.x, &b).unwrap();
        match out.tag {
            OutcomeTag::EpsSolution => prop_assert!(res <= eps),
            OutcomeTag::NormalEqEpsSolution => prop_assert!(nres <= eps),
            OutcomeTag::Unsolvable => {
                let (_, delta) = least_squares_direct(&a, &b).unwrap();
                let bound = out.delta_lower_bound.unwrap();
                prop_assert!(delta >= bound, "delta {} < bound {}", delta, bound);
            }
        }
        for w in out.radius_history.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        // deterministic
        let again = solve(&a, &b, &cfg).unwrap();
        prop_assert_eq!(&again, &out);
    }

    #[test]
    fn consistent_norm_bound(n in 2usize..10, seed in any::<u64>(), shrink in 1.5f64..8.0) {
        let a = random_matrix(n, n, seed);
        let b = linalg::matvec(&a, &random_vec(n, seed + 1)).unwrap();
        let (x_star, _) = least_squares_direct(&a, &b).unwrap();
        let xs = x_star.norm();
        prop_assume!(xs > 1e-3 && smallest_positive_singular_value(&a).unwrap() > 0.05);
        let cfg = SolverConfig::new(1e-2).with_r0(xs / shrink).with_max_iters(2_000_000);
        let out = solve(&a, &b, &cfg).unwrap();
        let (res, nres) = residuals(&a, &out.x, &b).unwrap();
        match out.tag {
            OutcomeTag::EpsSolution => prop_assert!(res <= 1e-2),
            // a witness with small normal residual may stop before escalating
            OutcomeTag::NormalEqEpsSolution => prop_assert!(nres <= 1e-2),
            OutcomeTag::Unsolvable => prop_assert!(false, "consistent system declared unsolvable"),
        }
        prop_assert!(out.x.norm() <= 2.0 * xs + 1e-2, "{} vs {}", out.x.norm(), xs);
    }
}

#[test]
fn radius_history_doubles_or_jumps() {
    for seed in 0..20 {
        let a = random_matrix(6, 6, seed);
        let b = random_vec(6, seed);
        let cfg = SolverConfig::new(1e-2).with_r0(1e-3).with_max_iters(2_000_000);
        let Ok(out) = solve(&a, &b, &cfg) else { continue };
        let h = &out.radius_history;
        // the final radius may be clipped to the cap
        for w in h[..h.len() - 1].windows(2) {
            assert!(w[1] >= 2.0 * w[0] * (1.0 - 1e-15), "{h:?}");
        }
        assert!(h.windows(2).all(|w| w[1] > w[0]), "{h:?}");
    }
}

#[test]
fn oracle_consistency_on_generated_instances() {
    for kind in InstanceKind::ALL {
        for seed in 1..=3 {
            let inst = generate(&InstanceSpec::new(kind, 24, 24, seed)).unwrap();
            let (x_star, delta) = least_squares_direct(&inst.a, &inst.b).unwrap();
            let sigma = smallest_positive_singular_value(&inst.a).unwrap();
            assert!(x_star.norm() <= inst.b.norm() / sigma * (1.0 + 1e-9));
            assert!(delta <= 1e-10, "{kind} {seed}: {delta}");

            // projection vanishes exactly when the ball holds the min-norm solution
            let inside = project_to_ellipsoid(&inst.a, &inst.b, 1.01 * x_star.norm()).unwrap();
            assert!(inside.delta_r <= 1e-9);
            let outside = project_to_ellipsoid(&inst.a, &inst.b, 0.9 * x_star.norm()).unwrap();
            assert!(outside.delta_r > 1e-9);
        }
    }
}

#[test]
fn inconsistent_instances_keep_their_gap() {
    for seed in 1..=5 {
        let inst = generate(&InstanceSpec::new(InstanceKind::LowRank, 20, 20, seed).inconsistent()).unwrap();
        let (_, delta) = least_squares_direct(&inst.a, &inst.b).unwrap();
        let z = inst.z.unwrap().norm();
        assert!(delta >= z * (1.0 - 1e-8));
        assert!(project_to_ellipsoid(&inst.a, &inst.b, 1e3).unwrap().delta_r > 0.0);
    }
}

#[test]
fn svd_reconstruction_at_200() {
    let a = random_matrix(200, 200, 42);
    let f = svd(&a);
    let rec = f.reconstruct();
    let err = rec
        .data()
        .iter()
        .zip(a.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-9 * f.sigma_max(), "{err}");
}

#[test]
fn bicgstab_agrees_with_direct_on_well_conditioned() {
    // symmetric positive definite with condition number at most 50
    for (n, seed) in [(20, 1), (60, 2), (120, 3)] {
        let u = random_orthogonal(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..50.0)).collect();
        let a = u.matmul(&DenseMatrix::diag(&s)).unwrap().matmul(&u.transpose()).unwrap();
        let b = random_vec(n, seed);
        let (x_direct, _) = least_squares_direct(&a, &b).unwrap();
        let rep = bicgstab(&a, &b, 1e-12, 10 * n as u64, Preconditioner::None).unwrap();
        assert!(rep.converged, "n={n}");
        let err = linalg::dist(&rep.x, &x_direct);
        assert!(err <= 1e-6 * x_direct.norm(), "n={n}: {err}");
    }
}

#[test]
fn jacobi_never_slower_on_diagonally_dominant() {
    for seed in 0..10 {
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = random_matrix(n, n, seed).data().to_vec();
        for i in 0..n {
            let row_sum: f64 = a[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum();
            a[i * n + i] = row_sum * rng.gen_range(1.5..20.0);
        }
        let a = DenseMatrix::new(n, n, a).unwrap();
        let b = random_vec(n, seed);
        let plain = bicgstab(&a, &b, 1e-10, 400, Preconditioner::None).unwrap();
        let jac = bicgstab(&a, &b, 1e-10, 400, Preconditioner::Jacobi).unwrap();
        assert!(plain.converged && jac.converged);
        assert!(jac.iterations <= plain.iterations, "seed {seed}: {} > {}", jac.iterations, plain.iterations);
    }
}

#[test]
fn steepest_descent_reaches_normal_equations_on_rank_deficient() {
    let a = low_rank(8, 6, 3, 9);
    let b = random_vec(8, 9);
    let rep = steepest_descent_normal(&a, &b, 1e-8, 1_000_000).unwrap();
    assert!(rep.converged);
    let (_, delta) = least_squares_direct(&a, &b).unwrap();
    assert!((rep.residual - delta).abs() < 1e-6);
}

#[test]
fn strict_mode_verdicts_are_sound() {
    // square random systems are solvable, so neither mode may declare otherwise
    for seed in 0..10 {
        let a = random_matrix(5, 5, seed);
        let b = Vector::new(random_vec(5, seed)).unwrap();
        let base = SolverConfig::new(1e-2).with_max_iters(2_000_000);
        let strict = base.clone().with_pivot_mode(PivotMode::Strict);
        for cfg in [&base, &strict] {
            let Ok(out) = solve(&a, &b, cfg) else { continue };
            match out.tag {
                OutcomeTag::EpsSolution => assert!(out.residual <= 1e-2),
                OutcomeTag::NormalEqEpsSolution => assert!(out.normal_residual <= 1e-2),
                OutcomeTag::Unsolvable => panic!("seed {seed}: unsolvable"),
            }
        }
    }
}
