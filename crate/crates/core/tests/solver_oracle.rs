//! The conic solver against brute force over real qubit density matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semidi_core::qmat::Sym2;
use semidi_core::sdp::{solve_conic, AffineSym2, ConicProblem, SolveStatus, SolverSettings};

/// ρ = ½(𝕀 + r_x σ_x + r_z σ_z) as `(a, b, d)`.
fn rho(rx: f64, rz: f64) -> Sym2 {
    Sym2::new(0.5 * (1.0 + rz), 0.5 * rx, 0.5 * (1.0 - rz))
}

/// Minimum of `⟨C, ρ⟩` subject to `⟨A, ρ⟩ ≤ cap` over a lattice of step
/// 1e-3 inside the disk plus a dense sampling of its boundary.
fn grid_minimum(c: &Sym2, a: &Sym2, cap: f64) -> f64 {
    let mut best = f64::INFINITY;
    let mut visit = |rx: f64, rz: f64| {
        let r = rho(rx, rz);
        if a.dot(&r) <= cap {
            best = best.min(c.dot(&r));
        }
    };
    let n = 1000;
    for i in -n..=n {
        for j in -n..=n {
            let (rx, rz) = (i as f64 / n as f64, j as f64 / n as f64);
            if rx * rx + rz * rz <= 1.0 {
                visit(rx, rz);
            }
        }
    }
    let m = 1 << 20;
    for k in 0..m {
        let t = std::f64::consts::TAU * k as f64 / m as f64;
        visit(t.sin(), t.cos());
    }
    best
}

#[test]
fn random_qubit_sdps_match_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..8 {
        let mut sym = || Sym2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (c, a) = (sym(), sym());
        // Keep the cut nonempty: the center ρ = 𝕀/2 satisfies it with slack.
        let cap = a.dot(&rho(0.0, 0.0)) + 0.05 + 0.3 * rng.gen_range(0.0..1.0);

        let mut prob = ConicProblem::new(3);
        prob.objective = vec![c.a, 2.0 * c.b, c.d];
        prob.add_psd2(
            AffineSym2::new(Sym2::ZERO)
                .term(0, Sym2::new(1.0, 0.0, 0.0))
                .term(1, Sym2::new(0.0, 1.0, 0.0))
                .term(2, Sym2::new(0.0, 0.0, 1.0)),
        );
        prob.add_equality(vec![(0, 1.0), (2, 1.0)], 1.0);
        prob.add_nonneg(cap, vec![(0, -a.a), (1, -2.0 * a.b), (2, -a.d)]);

        let sol = solve_conic(&prob, &SolverSettings::default());
        assert_eq!(sol.status, SolveStatus::Solved);
        let oracle = grid_minimum(&c, &a, cap);
        assert!(
            (sol.primal_value - oracle).abs() <= 1e-4,
            "solver {} vs grid {oracle}",
            sol.primal_value
        );
    }
}

#[test]
fn infeasible_trace_constraint_has_certificate() {
    let mut prob = ConicProblem::new(3);
    prob.add_psd2(
        AffineSym2::new(Sym2::ZERO)
            .term(0, Sym2::new(1.0, 0.0, 0.0))
            .term(1, Sym2::new(0.0, 1.0, 0.0))
            .term(2, Sym2::new(0.0, 0.0, 1.0)),
    );
    prob.add_equality(vec![(0, 1.0), (2, 1.0)], 1.0);
    prob.add_equality(vec![(2, 1.0)], 2.0);
    let sol = solve_conic(&prob, &SolverSettings::default());
    assert_eq!(sol.status, SolveStatus::Infeasible);
    assert!(sol.certificate.unwrap().violation(&prob) < 1e-7);
}

#[test]
fn diagnostics_serialize() {
    let mut prob = ConicProblem::new(1);
    prob.objective[0] = 1.0;
    prob.add_psd2(AffineSym2::new(Sym2::new(-1.0, 0.0, -3.0)).term(0, Sym2::IDENTITY));
    let sol = solve_conic(&prob, &SolverSettings::default());
    let v = serde_json::to_value(&sol.report).unwrap();
    assert_eq!(v["status"], "SOLVED");
    for key in ["iterations", "primal_residual", "dual_residual", "gap"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}
