//! Adversarial guessing probability of the outcome for a fixed input.
//!
//! The adversary holds a classical symbol `e ∈ {0, 1, 2}` and, for each
//! value, a subnormalized three-outcome POVM `Ñ^e`; the mixture must
//! reproduce the observed behavior. She guesses `b = e`.

use serde::Serialize;

use super::{
    add_proportional_to_identity, matrix_variable, pairing, solve_conic, ConicProblem,
    SolveStatus, SolverReport, SolverSettings,
};
use crate::error::{Error, Result};
use crate::qmat::{make_preparation, Behavior};

#[derive(Debug, Clone, Serialize)]
pub struct GuessingResult {
    pub p_guess: f64,
    /// `−log₂ p_guess`, in bits.
    pub h_min: f64,
    pub x_star: usize,
    pub solver: SolverReport,
}

pub fn guessing_probability(p: &Behavior, delta: f64, x_star: usize) -> Result<GuessingResult> {
    guessing_probability_with(p, delta, x_star, &SolverSettings::default())
}

pub fn guessing_probability_with(
    p: &Behavior,
    delta: f64,
    x_star: usize,
    settings: &SolverSettings,
) -> Result<GuessingResult> {
    if x_star > 1 {
        return Err(Error::Domain(format!("input index {x_star} is not 0 or 1")));
    }
    let prep = make_preparation(delta)?;
    let var = |e: usize, b: usize| 3 * (3 * e + b);
    let mut prob = ConicProblem::new(27);

    let guess = pairing(&prep.projector(x_star));
    for e in 0..3 {
        for (l, c) in guess.iter().enumerate() {
            prob.objective[var(e, e) + l] = -c;
        }
    }
    for e in 0..3 {
        for b in 0..3 {
            prob.add_psd2(matrix_variable(var(e, b)));
        }
        let firsts: Vec<usize> = (0..3).map(|b| var(e, b)).collect();
        add_proportional_to_identity(&mut prob, &firsts);
    }
    let total = (0..9).flat_map(|k| [(3 * k, 0.5), (3 * k + 2, 0.5)]).collect();
    prob.add_equality(total, 1.0);
    for x in 0..2 {
        let coeffs = pairing(&prep.projector(x));
        for b in 0..3 {
            let terms = (0..3)
                .flat_map(|e| (0..3).map(move |l| (var(e, b) + l, coeffs[l])))
                .collect();
            prob.add_equality(terms, p.get(b, x));
        }
    }

    let sol = solve_conic(&prob, settings);
    match sol.status {
        SolveStatus::Solved | SolveStatus::SolvedInaccurate => {}
        SolveStatus::Infeasible => return Err(Error::InfeasibleBehavior { delta }),
        _ => return Err(Error::Solver(sol.report)),
    }
    let p_guess = (-sol.primal_value).clamp(0.0, 1.0);
    Ok(GuessingResult {
        p_guess,
        h_min: if p_guess >= 1.0 { 0.0 } else { -p_guess.log2() },
        x_star,
        solver: sol.report,
    })
}
