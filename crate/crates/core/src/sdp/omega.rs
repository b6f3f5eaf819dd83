//! Largest mixing weight `ω` keeping `ωp + (1−ω)p₀` inside the
//! two-outcome set `P₂(δ)`.
//!
//! Solved as a minimization of `η = 1/ω` over unnormalized strategy
//! elements `N^j_b` (strategy `j` never outputs `b = j`).

use serde::{Serialize, Serializer};

use super::{
    add_proportional_to_identity, matrix_variable, pairing, solve_conic, ConicProblem,
    SolveStatus, SolverReport, SolverSettings,
};
use crate::error::Result;
use crate::qmat::{check_overlap, make_preparation, Behavior};

/// Upper cap on `ω`; reaching it is reported as [`OmegaStar::Unbounded`].
pub const OMEGA_CAP: f64 = 1e6;
/// `ω*` must fall this far below 1 before a behavior is certified.
pub const VERDICT_MARGIN: f64 = 1e-6;

/// Strategy/outcome pairs `(j, b)` with `b ≠ j`, in variable order.
pub(crate) const STRATEGY_PAIRS: [(usize, usize); 6] =
    [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmegaStar {
    Finite(f64),
    /// The mixing ray never leaves `P₂(δ)` (up to [`OMEGA_CAP`]).
    Unbounded,
}

impl OmegaStar {
    /// Numeric value with `Unbounded` mapped to infinity.
    pub fn value(self) -> f64 {
        match self {
            OmegaStar::Finite(w) => w,
            OmegaStar::Unbounded => f64::INFINITY,
        }
    }
}

impl Serialize for OmegaStar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            OmegaStar::Finite(w) => s.serialize_f64(*w),
            OmegaStar::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    InP2,
    #[serde(rename = "GENUINE_3_OUTCOME")]
    Genuine3Outcome,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificationResult {
    pub omega_star: OmegaStar,
    pub verdict: Verdict,
    /// Optimal `η = 1/ω` of the minimization.
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub solver: Option<SolverReport>,
}

fn verdict_for(omega: OmegaStar) -> Verdict {
    match omega {
        OmegaStar::Finite(w) if w < 1.0 - VERDICT_MARGIN => Verdict::Genuine3Outcome,
        _ => Verdict::InP2,
    }
}

pub fn omega_star(p: &Behavior, delta: f64, p0: &Behavior) -> Result<CertificationResult> {
    omega_star_with(p, delta, p0, &SolverSettings::default())
}

pub fn omega_star_with(
    p: &Behavior,
    delta: f64,
    p0: &Behavior,
    settings: &SolverSettings,
) -> Result<CertificationResult> {
    check_overlap(delta)?;
    if delta == 0.0 {
        return Ok(orthogonal_states(p, p0));
    }
    let prob = build_problem(p, delta, p0)?;
    let sol = solve_conic(&prob, settings);
    let report = sol.report.clone();
    let base = CertificationResult {
        omega_star: OmegaStar::Finite(0.0),
        verdict: Verdict::Inconclusive,
        primal_value: report.primal_value,
        dual_value: report.dual_value,
        gap: (report.primal_value - report.dual_value).abs(),
        iterations: report.iterations,
        status: sol.status,
        solver: Some(report),
    };
    Ok(match sol.status {
        SolveStatus::Solved | SolveStatus::SolvedInaccurate => {
            let eta = sol.primal_value;
            let omega = if eta <= 1.0 / OMEGA_CAP + 10.0 * settings.tol {
                OmegaStar::Unbounded
            } else {
                OmegaStar::Finite(1.0 / eta)
            };
            CertificationResult { omega_star: omega, verdict: verdict_for(omega), ..base }
        }
        // No positive weight reaches P₂(δ): the behavior direction leaves
        // the set immediately.
        SolveStatus::Infeasible => CertificationResult {
            verdict: Verdict::Genuine3Outcome,
            primal_value: f64::INFINITY,
            gap: 0.0,
            ..base
        },
        SolveStatus::Unbounded | SolveStatus::NumericalFailure => base,
    })
}

/// At zero overlap every valid behavior is reachable, so the only limit is
/// positivity of the mixture's entries.
fn orthogonal_states(p: &Behavior, p0: &Behavior) -> CertificationResult {
    let mut omega = OMEGA_CAP;
    for (pv, qv) in p.as_vector().iter().zip(p0.as_vector()) {
        if *pv < qv {
            omega = omega.min(qv / (qv - pv));
        }
    }
    let omega_star =
        if omega >= OMEGA_CAP { OmegaStar::Unbounded } else { OmegaStar::Finite(omega) };
    CertificationResult {
        omega_star,
        verdict: Verdict::InP2,
        primal_value: 1.0 / omega,
        dual_value: 1.0 / omega,
        gap: 0.0,
        iterations: 0,
        status: SolveStatus::Solved,
        solver: None,
    }
}

fn build_problem(p: &Behavior, delta: f64, p0: &Behavior) -> Result<ConicProblem> {
    let prep = make_preparation(delta)?;
    let n = 3 * STRATEGY_PAIRS.len();
    let mut prob = ConicProblem::new(n);
    let eta_terms: Vec<(usize, f64)> = (0..STRATEGY_PAIRS.len())
        .flat_map(|k| [(3 * k, 0.5), (3 * k + 2, 0.5)])
        .collect();
    for &(i, c) in &eta_terms {
        prob.objective[i] = c;
    }
    for k in 0..STRATEGY_PAIRS.len() {
        prob.add_psd2(matrix_variable(3 * k));
    }
    for j in 0..3 {
        let firsts: Vec<usize> = STRATEGY_PAIRS
            .iter()
            .enumerate()
            .filter(|(_, &(jj, _))| jj == j)
            .map(|(k, _)| 3 * k)
            .collect();
        add_proportional_to_identity(&mut prob, &firsts);
    }
    for x in 0..2 {
        let proj = prep.projector(x);
        let coeffs = pairing(&proj);
        for b in 0..3 {
            let p0_bx = p0.get(b, x);
            let mut terms: Vec<(usize, f64)> = eta_terms.iter().map(|&(i, c)| (i, -p0_bx * c)).collect();
            for (k, &(_, bb)) in STRATEGY_PAIRS.iter().enumerate() {
                if bb == b {
                    terms.extend((0..3).map(|l| (3 * k + l, coeffs[l])));
                }
            }
            prob.add_equality(terms, p.get(b, x) - p0_bx);
        }
    }
    prob.add_nonneg(-1.0 / OMEGA_CAP, eta_terms);
    Ok(prob)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_against_itself_is_unbounded() {
        let u = Behavior::uniform();
        let r = omega_star(&u, 0.5, &u).unwrap();
        assert_eq!(r.omega_star, OmegaStar::Unbounded);
        assert_eq!(r.verdict, Verdict::InP2);
    }

    #[test]
    fn usd_at_high_overlap_is_certified() {
        let r = omega_star(&Behavior::usd(0.9).unwrap(), 0.9, &Behavior::uniform()).unwrap();
        assert_eq!(r.status, SolveStatus::Solved);
        assert_eq!(r.verdict, Verdict::Genuine3Outcome);
        assert!(r.omega_star.value() < 1.0);
    }

    #[test]
    fn zero_overlap_is_limited_by_positivity() {
        let p = Behavior::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let r = omega_star(&p, 0.0, &Behavior::uniform()).unwrap();
        assert_eq!(r.omega_star, OmegaStar::Finite(1.0));
        assert_eq!(r.verdict, Verdict::InP2);
    }

    #[test]
    fn unreproducible_direction_at_full_overlap() {
        let p = Behavior::usd(0.5).unwrap();
        let r = omega_star(&p, 1.0, &Behavior::uniform()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert_eq!(r.omega_star, OmegaStar::Finite(0.0));
    }

    #[test]
    fn serializes_unbounded_marker() {
        let json = serde_json::to_string(&OmegaStar::Unbounded).unwrap();
        assert_eq!(json, "\"unbounded\"");
        assert_eq!(serde_json::to_string(&Verdict::Genuine3Outcome).unwrap(), "\"GENUINE_3_OUTCOME\"");
    }
}
