use proptest::prelude::*;

use semidi_core::analysis::{hmin_of, robustness};
use semidi_core::boundary::{p2_ellipse_point, p2_region, p3_curve_point, p3_region};
use semidi_core::qmat::{
    make_preparation, mix_with_noise, relabel_pi, simulate_behavior, slice_coords, symmetric_povm,
    symmetrize_t, Behavior, Povm,
};
use semidi_core::sdp::{guessing_probability, omega_star, SolveStatus, SolverSettings};
use semidi_core::usd::p_succ2_bound;

fn behavior() -> impl Strategy<Value = Behavior> {
    let row = prop::array::uniform3(0.0f64..1.0).prop_filter("nonzero", |r| r.iter().sum::<f64>() > 1e-3);
    (row.clone(), row).prop_map(|(a, b)| {
        let norm = |r: [f64; 3]| {
            let s: f64 = r.iter().sum();
            [r[0] / s, r[1] / s, 1.0 - r[0] / s - r[1] / s]
        };
        Behavior::with_row_tolerance([norm(a), norm(b)], 1e-12).unwrap()
    })
}

fn extremal_povm() -> impl Strategy<Value = Povm> {
    prop::array::uniform3(0.0f64..std::f64::consts::TAU)
        .prop_filter_map("origin inside the Bloch triangle", |a| Povm::extremal_from_angles(a).ok())
}

fn assert_close(a: &Behavior, b: &Behavior, tol: f64) {
    assert!(a.max_abs_diff(b) <= tol, "{a:?} vs {b:?}");
}

proptest! {
    #[test]
    fn constructed_povms_are_valid(phi in -1.5707f64..1.5707, povm in extremal_povm()) {
        for m in [symmetric_povm(phi).unwrap(), povm] {
            for e in m.elements() {
                prop_assert!(e.min_eigenvalue() >= -1e-10);
            }
            let s = m.sum();
            prop_assert!((s.a0 - 1.0).abs() <= 1e-10 && s.bloch_norm() <= 1e-10);
        }
    }

    #[test]
    fn simulated_rows_are_normalized(delta in 0.0f64..=1.0, povm in extremal_povm()) {
        let prep = make_preparation(delta).unwrap();
        let b = simulate_behavior(&prep, &povm).unwrap();
        for row in b.p() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        // Deterministic arithmetic.
        prop_assert_eq!(b, simulate_behavior(&prep, &povm).unwrap());
    }

    #[test]
    fn relabeling_and_symmetrization(b1 in behavior(), b2 in behavior(), alpha in 0.0f64..=1.0) {
        assert_close(&relabel_pi(&relabel_pi(&b1)), &b1, 0.0);
        let t = symmetrize_t(&b1);
        assert_close(&symmetrize_t(&t), &t, 1e-15);
        assert_close(&relabel_pi(&t), &t, 1e-15);
        let mixed = mix_with_noise(&b1, 1.0 - alpha, &b2).unwrap();
        let lhs = symmetrize_t(&mixed);
        let rhs = mix_with_noise(&symmetrize_t(&b1), 1.0 - alpha, &symmetrize_t(&b2)).unwrap();
        assert_close(&lhs, &rhs, 1e-15);
        let (s, st) = (slice_coords(&b1), slice_coords(&t));
        prop_assert!((s.x - st.x).abs() <= 1e-15 && (s.y - st.y).abs() <= 1e-15);
    }

    #[test]
    fn sampled_boundary_points_lie_in_the_simplex(delta in 0.001f64..0.999, t in -1.0f64..=1.0) {
        let pts = [
            p2_ellipse_point(delta, t * std::f64::consts::PI).unwrap(),
            p3_curve_point(delta, t * std::f64::consts::FRAC_PI_2).unwrap(),
        ];
        for p in pts {
            prop_assert!(p.x >= -1e-15 && p.y >= -1e-15 && p.x + p.y <= 1.0 + 1e-15, "{p:?}");
        }
    }

    #[test]
    fn usd_witness_gap_is_strict(delta in 1e-6f64..(1.0 - 1e-6)) {
        prop_assert!(p_succ2_bound(delta).unwrap() < 1.0 - delta);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn regions_nest(d1 in 0.05f64..0.95, gap in 0.01f64..0.3, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        prop_assume!(x + y <= 1.0);
        let d2 = (d1 + gap).min(0.99);
        let (p2a, p3a, p2b) = (p2_region(d1).unwrap(), p3_region(d1).unwrap(), p2_region(d2).unwrap());
        if p2a.contains(x, y) {
            prop_assert!(p3a.contains(x, y));
        }
        if p2b.contains(x, y) {
            prop_assert!(p2a.contains(x, y));
        }
    }

    #[test]
    fn weak_duality_and_monotonicity(p in behavior(), d1 in 0.05f64..0.9, gap in 0.02f64..0.1) {
        let u = Behavior::uniform();
        let r1 = omega_star(&p, d1, &u).unwrap();
        let r2 = omega_star(&p, d1 + gap, &u).unwrap();
        for r in [&r1, &r2] {
            if r.status == SolveStatus::Solved {
                prop_assert!(r.dual_value <= r.primal_value + SolverSettings::DEFAULT_TOL * 10.0);
            }
        }
        if r1.status.is_solved() && r2.status.is_solved() {
            prop_assert!(r2.omega_star.value() <= r1.omega_star.value() * (1.0 + 1e-6) + 1e-9);
        }
    }

    #[test]
    fn guessing_beats_marginal_mode(delta in 0.05f64..0.95, povm in extremal_povm(), xi in 0.05f64..0.5) {
        let prep = make_preparation(delta).unwrap();
        let b = mix_with_noise(&simulate_behavior(&prep, &povm).unwrap(), xi, &Behavior::uniform()).unwrap();
        let g = guessing_probability(&b, delta, 0).unwrap();
        let mode = b.p()[0].iter().copied().fold(0.0, f64::max);
        prop_assert!(g.p_guess >= mode - 1e-6, "{} < {mode}", g.p_guess);
    }

    #[test]
    fn noise_never_helps(delta in 0.2f64..0.9, povm in extremal_povm(), xi1 in 0.0f64..0.5, dxi in 0.05f64..0.5) {
        let prep = make_preparation(delta).unwrap();
        let b = simulate_behavior(&prep, &povm).unwrap();
        let u = Behavior::uniform();
        let b1 = mix_with_noise(&b, xi1, &u).unwrap();
        let b2 = mix_with_noise(&b, xi1 + dxi, &u).unwrap();
        prop_assert!(robustness(&b2, delta).unwrap() <= robustness(&b1, delta).unwrap() + 1e-6);
        let s = SolverSettings::default();
        prop_assert!(hmin_of(&b2, delta, &s).unwrap() <= hmin_of(&b1, delta, &s).unwrap() + 1e-4);
    }
}
