//! Dual witnesses for non-membership in `P₂(δ)`.
//!
//! A witness is a vector `v` together with matrices `H^j`, `J^j` making
//!
//! `C^j_b = ½𝕀 + H^j − ½Tr(H^j)𝕀 + ½(Σ v·p₀)𝕀 − Σ_x v_{b|x}|ψ_x⟩⟨ψ_x| + [b = j]J^j`
//!
//! positive semidefinite for all `j, b`. Any behavior `q` in `P₂(δ)` then
//! obeys `v·(q − p₀) ≤ 1`.

use serde::{Deserialize, Serialize};

use super::omega::STRATEGY_PAIRS;
use super::{solve_conic, AffineSym2, ConicProblem, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::qmat::{check_overlap, make_preparation, Behavior, PreparationPair, Sym2};

/// Minimum eigenvalue accepted when rechecking a witness.
pub const WITNESS_FEASIBILITY_TOL: f64 = 1e-8;
const VIOLATION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualWitness {
    /// `v_{b|x}` at index `3x + b`.
    pub v: [f64; 6],
    #[serde(rename = "H")]
    pub h: [[[f64; 2]; 2]; 3],
    #[serde(rename = "J")]
    pub j: [[[f64; 2]; 2]; 3],
    pub eta: f64,
    pub delta: f64,
}

impl DualWitness {
    pub fn h_matrix(&self, j: usize) -> Sym2 {
        from_rows(&self.h[j])
    }

    pub fn j_matrix(&self, j: usize) -> Sym2 {
        from_rows(&self.j[j])
    }

    /// `v·(q − p₀)`.
    pub fn value(&self, q: &Behavior, p0: &Behavior) -> f64 {
        let (qv, pv) = (q.as_vector(), p0.as_vector());
        (0..6).map(|i| self.v[i] * (qv[i] - pv[i])).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("witness serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    }
}

fn from_rows(m: &[[f64; 2]; 2]) -> Sym2 {
    Sym2::new(m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WitnessVerdict {
    Violated,
    NotViolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessCheck {
    pub verdict: WitnessVerdict,
    pub value: f64,
    pub min_eigenvalue: f64,
}

/// The part of `C^j_b` shared by all strategies: `½𝕀 + ½(v·p₀)𝕀 − Σ_x v_{b|x}ψ_xψ_xᵀ`.
fn outcome_base(prep: &PreparationPair, v: &[f64; 6], p0: &Behavior, b: usize) -> Sym2 {
    let shift: f64 = v.iter().zip(p0.as_vector()).map(|(a, q)| a * q).sum();
    let mut m = (0.5 + 0.5 * shift) * Sym2::IDENTITY;
    for x in 0..2 {
        m = m - v[3 * x + b] * prep.projector(x);
    }
    m
}

/// The nine matrices `C^j_b`, indexed `[j][b]`.
pub fn witness_matrices(w: &DualWitness, p0: &Behavior) -> Result<[[Sym2; 3]; 3]> {
    let prep = make_preparation(w.delta)?;
    let mut out = [[Sym2::ZERO; 3]; 3];
    for (j, row) in out.iter_mut().enumerate() {
        let h = w.h_matrix(j);
        let h_shifted = h - (0.5 * h.trace()) * Sym2::IDENTITY;
        for (b, c) in row.iter_mut().enumerate() {
            *c = outcome_base(&prep, &w.v, p0, b) + h_shifted;
            if b == j {
                *c = *c + w.j_matrix(j);
            }
        }
    }
    Ok(out)
}

pub fn dual_witness(p: &Behavior, delta: f64, p0: &Behavior) -> Result<DualWitness> {
    dual_witness_with(p, delta, p0, &SolverSettings::default())
}

/// Maximize `v·(p − p₀)` over dual-feasible `(v, H, J)`.
///
/// `J^j` only enters the `b = j` constraint, so it is fixed after the solve
/// to `½𝕀 − C^j_j|_{J=0}`. `H^j` is kept traceless since its trace cancels.
pub fn dual_witness_with(
    p: &Behavior,
    delta: f64,
    p0: &Behavior,
    settings: &SolverSettings,
) -> Result<DualWitness> {
    check_overlap(delta)?;
    if delta == 0.0 {
        return Err(Error::Degenerate(
            "every behavior lies in P2 at zero overlap; no witness exists".into(),
        ));
    }
    let prep = make_preparation(delta)?;
    let diff: Vec<f64> = p.as_vector().iter().zip(p0.as_vector()).map(|(a, b)| a - b).collect();
    let p0v = p0.as_vector();

    // Shifting v_{·|x} by a constant per input changes each C^j_b by a
    // traceless matrix that H^j absorbs, and leaves v·(q − p₀) unchanged for
    // normalized q. Fixing v_{2|x} = 0 removes that freedom.
    // Variables: v_{b|x} for b < 2 at 2x + b, then (h1, h2) of H^j at 4 + 2j.
    let v_var = |x: usize, b: usize| (b < 2).then_some(2 * x + b);
    let mut prob = ConicProblem::new(10);
    for x in 0..2 {
        for b in 0..2 {
            prob.objective[2 * x + b] = -diff[3 * x + b];
        }
    }
    for &(j, b) in &STRATEGY_PAIRS {
        let mut m = AffineSym2::new(0.5 * Sym2::IDENTITY);
        for x in 0..2 {
            for bb in 0..2 {
                m.push(2 * x + bb, (0.5 * p0v[3 * x + bb]) * Sym2::IDENTITY);
            }
            if let Some(i) = v_var(x, b) {
                m.push(i, -1.0 * prep.projector(x));
            }
        }
        m.push(4 + 2 * j, Sym2::new(1.0, 0.0, -1.0));
        m.push(5 + 2 * j, Sym2::new(0.0, 1.0, 0.0));
        prob.add_psd2(m);
    }
    let sol = solve_conic(&prob, settings);
    match sol.status {
        SolveStatus::Solved | SolveStatus::SolvedInaccurate => {}
        SolveStatus::Unbounded => return Err(Error::InfeasibleBehavior { delta }),
        _ => return Err(Error::Solver(sol.report)),
    }

    let x = &sol.x;
    let mut v = [x[0], x[1], 0.0, x[2], x[3], 0.0];
    let mut hs = [Sym2::ZERO; 3];
    for (j, h) in hs.iter_mut().enumerate() {
        *h = Sym2::new(x[4 + 2 * j], x[5 + 2 * j], -x[4 + 2 * j]);
    }

    // Pull slightly infeasible iterates back inside: C(tv, tH) = (1−t)½𝕀 + tC(v, H).
    let worst = STRATEGY_PAIRS
        .iter()
        .map(|&(j, b)| (outcome_base(&prep, &v, p0, b) + hs[j]).min_eigenvalue())
        .fold(f64::INFINITY, f64::min);
    if worst < 0.0 {
        let t = 0.5 / (0.5 - worst);
        v.iter_mut().for_each(|a| *a *= t);
        hs.iter_mut().for_each(|h| *h = t * *h);
    }

    let mut js = [Sym2::ZERO; 3];
    for (j, jm) in js.iter_mut().enumerate() {
        let c_jj = outcome_base(&prep, &v, p0, j) + hs[j];
        *jm = 0.5 * Sym2::IDENTITY - c_jj;
    }
    let eta = v.iter().zip(&diff).map(|(a, d)| a * d).sum();
    Ok(DualWitness {
        v,
        h: hs.map(Sym2::to_rows),
        j: js.map(Sym2::to_rows),
        eta,
        delta,
    })
}

/// Recheck feasibility of `w` and test `q` against `v·(q − p₀) ≤ 1`.
pub fn verify_witness(w: &DualWitness, q: &Behavior, delta: f64, p0: &Behavior) -> Result<WitnessCheck> {
    check_overlap(delta)?;
    if (w.delta - delta).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "witness was built for overlap {}, not {delta}",
            w.delta
        )));
    }
    let min_eigenvalue = witness_matrices(w, p0)?
        .iter()
        .flatten()
        .map(Sym2::min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    if !(min_eigenvalue >= -WITNESS_FEASIBILITY_TOL) {
        return Err(Error::InvalidWitness { min_eigenvalue });
    }
    let value = w.value(q, p0);
    let verdict = if value > 1.0 + VIOLATION_SLACK {
        WitnessVerdict::Violated
    } else {
        WitnessVerdict::NotViolated
    };
    Ok(WitnessCheck { verdict, value, min_eigenvalue })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usd_witness_is_violated_by_its_behavior() {
        let p = Behavior::usd(0.9).unwrap();
        let u = Behavior::uniform();
        let w = dual_witness(&p, 0.9, &u).unwrap();
        assert!(w.eta > 1.0);
        assert!((w.value(&p, &u) - w.eta).abs() < 1e-12);
        let check = verify_witness(&w, &p, 0.9, &u).unwrap();
        assert_eq!(check.verdict, WitnessVerdict::Violated);
        assert!(check.min_eigenvalue >= -WITNESS_FEASIBILITY_TOL);
        assert_eq!(verify_witness(&w, &u, 0.9, &u).unwrap().verdict, WitnessVerdict::NotViolated);
    }

    #[test]
    fn tampered_witness_is_rejected() {
        let p = Behavior::usd(0.7).unwrap();
        let u = Behavior::uniform();
        let mut w = dual_witness(&p, 0.7, &u).unwrap();
        w.v[0] *= 10.0;
        assert!(matches!(verify_witness(&w, &p, 0.7, &u), Err(Error::InvalidWitness { .. })));
    }

    #[test]
    fn json_round_trip() {
        let w = dual_witness(&Behavior::usd(0.5).unwrap(), 0.5, &Behavior::uniform()).unwrap();
        let back = DualWitness::from_json(&w.to_json()).unwrap();
        assert_eq!(w, back);
        let v: serde_json::Value = serde_json::from_str(&w.to_json()).unwrap();
        for key in ["v", "H", "J", "eta", "delta"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
