//! Conic solver and the semidefinite programs built on it.

mod conic;
mod guessing;
mod omega;
mod witness;

pub use conic::{
    solve_conic, AffineScalar, AffineSym2, BlockDual, Certificate, ConeBlock, ConicProblem,
    ConicSolution, LinearEquality, SolveStatus, SolverReport, SolverSettings,
};
pub use guessing::{guessing_probability, guessing_probability_with, GuessingResult};
pub use omega::{
    omega_star, omega_star_with, CertificationResult, OmegaStar, Verdict, OMEGA_CAP,
    VERDICT_MARGIN,
};
pub use witness::{
    dual_witness, dual_witness_with, verify_witness, witness_matrices, DualWitness,
    WitnessCheck, WitnessVerdict, WITNESS_FEASIBILITY_TOL,
};

use crate::qmat::Sym2;

/// Symmetric matrix built from three consecutive variables `(a, b, d)`.
pub(crate) fn matrix_variable(first: usize) -> AffineSym2 {
    AffineSym2::new(Sym2::ZERO)
        .term(first, Sym2::new(1.0, 0.0, 0.0))
        .term(first + 1, Sym2::new(0.0, 1.0, 0.0))
        .term(first + 2, Sym2::new(0.0, 0.0, 1.0))
}

/// Coefficients of `⟨m, N⟩` in the variables `(a, b, d)` of `N`.
pub(crate) fn pairing(m: &Sym2) -> [f64; 3] {
    [m.a, 2.0 * m.b, m.d]
}

/// Constrain `Σ_k N_k` to be a multiple of the identity.
pub(crate) fn add_proportional_to_identity(prob: &mut ConicProblem, firsts: &[usize]) {
    let diff = firsts.iter().flat_map(|&f| [(f, 1.0), (f + 2, -1.0)]).collect();
    let off = firsts.iter().map(|&f| (f + 1, 1.0)).collect();
    prob.add_equality(diff, 0.0);
    prob.add_equality(off, 0.0);
}
