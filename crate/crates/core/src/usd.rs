//! Unambiguous state discrimination: success-probability witnesses and the
//! self-test of the optimal USD measurement.

use nalgebra::{Complex, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qmat::{check_overlap, make_preparation, Behavior, HermitianMat2, Povm, PreparationPair};

type C64 = Complex<f64>;
type CMat = Matrix2<C64>;
type CVec = Vector2<C64>;

/// Slack used by the USD witnesses and the self-test.
pub const USD_TOL: f64 = 1e-9;
const SPOT_CHECKS: usize = 100;
const SPOT_SEED: u64 = 0x5eed_f15d;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UsdStats {
    /// `½(p(0|0) + p(1|1))`.
    pub p_succ: f64,
    /// `½(p(1|0) + p(0|1))`.
    pub error_rate: f64,
}

pub fn usd_success(b: &Behavior) -> UsdStats {
    UsdStats {
        p_succ: 0.5 * (b.get(0, 0) + b.get(1, 1)),
        error_rate: 0.5 * (b.get(1, 0) + b.get(0, 1)),
    }
}

/// Best unambiguous success probability with two-outcome measurements.
pub fn p_succ2_bound(delta: f64) -> Result<f64> {
    check_overlap(delta)?;
    Ok(if delta == 0.0 { 1.0 } else { 0.5 * (1.0 - delta * delta) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UsdVerdict {
    #[serde(rename = "GENUINE_3_OUTCOME")]
    Genuine3Outcome,
    NotCertified,
    /// Errors were observed, so the unambiguity-based witnesses do not apply.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UsdReport {
    pub p_succ: f64,
    pub error_rate: f64,
    pub bound2: f64,
    pub bound3: f64,
    pub verdict: UsdVerdict,
    /// `p_succ ≥ ½` without errors certifies a genuine 3-outcome POVM for
    /// any nonzero overlap.
    pub overlap_free_certificate: bool,
}

pub fn certify_genuine3_usd(stats: &UsdStats, delta: f64) -> Result<UsdReport> {
    let bound2 = p_succ2_bound(delta)?;
    let unambiguous = stats.error_rate <= USD_TOL;
    let verdict = if !unambiguous {
        UsdVerdict::Inconclusive
    } else if stats.p_succ > bound2 + USD_TOL {
        UsdVerdict::Genuine3Outcome
    } else {
        UsdVerdict::NotCertified
    };
    Ok(UsdReport {
        p_succ: stats.p_succ,
        error_rate: stats.error_rate,
        bound2,
        bound3: 1.0 - delta,
        verdict,
        overlap_free_certificate: unambiguous && stats.p_succ >= 0.5 && delta > 0.0,
    })
}

pub fn usd_report(b: &Behavior, delta: f64) -> Result<UsdReport> {
    certify_genuine3_usd(&usd_success(b), delta)
}

fn check_strict_overlap(delta: f64) -> Result<()> {
    check_overlap(delta)?;
    if delta == 0.0 || delta == 1.0 {
        return Err(Error::Degenerate(format!("no strict USD regime at overlap {delta}")));
    }
    Ok(())
}

/// The optimal USD measurement on the ideal states `c|0⟩ ± s|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealUsdMeasurement {
    pub m0: HermitianMat2,
    pub m1: HermitianMat2,
    pub m_fail: HermitianMat2,
}

impl IdealUsdMeasurement {
    pub fn new(delta: f64) -> Result<Self> {
        check_strict_overlap(delta)?;
        let (s, c) = make_preparation(delta)?.theta().sin_cos();
        let k = 1.0 / (1.0 + delta);
        // |s, ±c⟩⟨s, ±c| / (1+δ) in Bloch form.
        let m0 = HermitianMat2::new(0.5 * k, [k * s * c, 0.0, 0.5 * k * (s * s - c * c)]);
        let m1 = HermitianMat2::new(0.5 * k, [-k * s * c, 0.0, 0.5 * k * (s * s - c * c)]);
        let m_fail = HermitianMat2::IDENTITY - m0 - m1;
        Ok(Self { m0, m1, m_fail })
    }

    pub fn elements(&self) -> [HermitianMat2; 3] {
        [self.m0, self.m1, self.m_fail]
    }

    pub fn povm(&self) -> Result<Povm> {
        Povm::new(self.elements())
    }
}

pub fn ideal_usd_realization(delta: f64) -> Result<(PreparationPair, Povm)> {
    let m = IdealUsdMeasurement::new(delta)?;
    Ok((make_preparation(delta)?, m.povm()?))
}

fn hermitian_to_complex(m: &HermitianMat2) -> CMat {
    let e = m.entries();
    CMat::new(
        C64::new(e[0][0].0, e[0][0].1),
        C64::new(e[0][1].0, e[0][1].1),
        C64::new(e[1][0].0, e[1][0].1),
        C64::new(e[1][1].0, e[1][1].1),
    )
}

/// Two pure states and a three-outcome measurement on a qubit, with
/// arbitrary complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalRealization {
    pub states: [CVec; 2],
    pub elements: [CMat; 3],
}

impl PhysicalRealization {
    pub fn from_model(prep: &PreparationPair, povm: &Povm) -> Self {
        let state = |x| {
            let v = prep.state(x);
            CVec::new(C64::new(v[0], 0.0), C64::new(v[1], 0.0))
        };
        Self {
            states: [state(0), state(1)],
            elements: povm.elements().map(|m| hermitian_to_complex(&m)),
        }
    }

    /// Apply `ψ ↦ Uψ`, `M ↦ U M U†`.
    pub fn conjugated(&self, u: &CMat) -> Self {
        let ud = u.adjoint();
        Self {
            states: self.states.map(|s| u * s),
            elements: self.elements.map(|m| u * m * ud),
        }
    }

    pub fn behavior_table(&self) -> [[f64; 3]; 2] {
        let mut p = [[0.0; 3]; 2];
        for (x, row) in p.iter_mut().enumerate() {
            let psi = &self.states[x];
            for (b, v) in row.iter_mut().enumerate() {
                *v = (psi.adjoint() * self.elements[b] * psi)[(0, 0)].re;
            }
        }
        p
    }
}

/// Real rotation by `angle` about the y axis of the Bloch sphere.
pub fn xz_rotation(angle: f64) -> CMat {
    let (s, c) = (0.5 * angle).sin_cos();
    CMat::new(C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0))
}

/// `K` with `K(c|0⟩ ± s|1⟩) = |ψ_{0/1}⟩`; `Λ(ρ) = KρK†`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestMap {
    pub k: CMat,
    pub c: f64,
    pub s: f64,
}

impl SelfTestMap {
    /// Build the map from physical states whose overlap is `delta`. The phase
    /// of `ψ₁` is adjusted so that `⟨ψ₀|ψ₁⟩` is real and positive.
    pub fn new(states: &[CVec; 2], delta: f64) -> Result<Self> {
        check_strict_overlap(delta)?;
        let (s, c) = make_preparation(delta)?.theta().sin_cos();
        let overlap = states[0].dotc(&states[1]);
        let phase = if overlap.norm() > 0.0 { overlap.conj() / overlap.norm() } else { C64::new(1.0, 0.0) };
        let psi0 = states[0];
        let psi1 = states[1] * phase;
        let k0 = (psi0 + psi1) / C64::new(2.0 * c, 0.0);
        let k1 = (psi0 - psi1) / C64::new(2.0 * s, 0.0);
        Ok(Self { k: CMat::from_columns(&[k0, k1]), c, s })
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        self.k * rho * self.k.adjoint()
    }

    /// `‖K†K − 𝕀‖_max`; zero when `Λ` is trace preserving.
    pub fn isometry_defect(&self) -> f64 {
        (self.k.adjoint() * self.k - CMat::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `Tr[M̄₀ ρ] = (s²ρ₀₀ + cs(ρ₀₁ + ρ₁₀) + c²ρ₁₁)/(1+δ)`.
pub fn usd_outcome0_closed_form(delta: f64, rho: &CMat) -> Result<C64> {
    check_strict_overlap(delta)?;
    let (s, c) = make_preparation(delta)?.theta().sin_cos();
    Ok((rho[(0, 0)] * (s * s) + (rho[(0, 1)] + rho[(1, 0)]) * (c * s) + rho[(1, 1)] * (c * c))
        / (1.0 + delta))
}

fn trace_product(a: &CMat, b: &CMat) -> C64 {
    (a * b).trace()
}

/// Uniformly distributed qubit density matrices from a fixed seed.
pub fn random_density_matrices(n: usize, seed: u64) -> Vec<CMat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = loop {
                let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                if v.iter().map(|a| a * a).sum::<f64>() <= 1.0 {
                    break v;
                }
            };
            hermitian_to_complex(&HermitianMat2::new(0.5, [0.5 * r[0], 0.5 * r[1], 0.5 * r[2]]))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SelfTestVerdict {
    Pass,
    Fail,
    /// The observed behavior is not the optimal USD behavior, which is the
    /// only case the self-test covers.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfTestReport {
    pub delta: f64,
    /// `|Tr[M_k Λ(|i⟩⟨j|)] − Tr[M̄_k |i⟩⟨j|]|` for `k ∈ (0, 1, ∅)`,
    /// `(i, j) ∈ (00, 01, 10, 11)`.
    pub residuals: [f64; 12],
    /// `|⟨ψ₀|ψ₁⟩|` of the realization.
    pub overlap_check: f64,
    pub verdict: SelfTestVerdict,
    #[serde(skip)]
    pub spot_check_residual: f64,
    #[serde(skip)]
    pub behavior_deviation: f64,
}

impl SelfTestReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

pub fn verify_selftest(real: &PhysicalRealization, delta: f64) -> Result<SelfTestReport> {
    check_strict_overlap(delta)?;
    let target = Behavior::usd(delta)?;
    let table = real.behavior_table();
    let deviation = (0..2)
        .flat_map(|x| (0..3).map(move |b| (x, b)))
        .map(|(x, b)| (table[x][b] - target.get(b, x)).abs())
        .fold(0.0, f64::max);
    let overlap_check = real.states[0].dotc(&real.states[1]).norm();
    let mut report = SelfTestReport {
        delta,
        residuals: [0.0; 12],
        overlap_check,
        verdict: SelfTestVerdict::NotApplicable,
        spot_check_residual: f64::NAN,
        behavior_deviation: deviation,
    };
    if deviation > USD_TOL {
        return Ok(report);
    }

    let map = SelfTestMap::new(&real.states, delta)?;
    let ideal = IdealUsdMeasurement::new(delta)?.elements().map(|m| hermitian_to_complex(&m));
    let unit = |i: usize, j: usize| {
        let mut e = CMat::zeros();
        e[(i, j)] = C64::new(1.0, 0.0);
        e
    };
    for k in 0..3 {
        for (slot, (i, j)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
            let e = unit(i, j);
            let lhs = trace_product(&real.elements[k], &map.apply(&e));
            let rhs = trace_product(&ideal[k], &e);
            report.residuals[4 * k + slot] = (lhs - rhs).norm();
        }
    }
    report.spot_check_residual = random_density_matrices(SPOT_CHECKS, SPOT_SEED)
        .iter()
        .flat_map(|rho| {
            let image = map.apply(rho);
            (0..3).map(move |k| (trace_product(&real.elements[k], &image) - trace_product(&ideal[k], rho)).norm())
        })
        .fold(0.0, f64::max);

    let pass = report.max_residual() <= USD_TOL
        && report.spot_check_residual <= USD_TOL
        && (overlap_check - delta).abs() <= USD_TOL;
    report.verdict = if pass { SelfTestVerdict::Pass } else { SelfTestVerdict::Fail };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::simulate_behavior;

    #[test]
    fn success_examples() {
        let s = usd_success(&Behavior::usd(0.3).unwrap());
        assert!((s.p_succ - 0.7).abs() < 1e-15 && s.error_rate == 0.0);
        assert!((usd_success(&Behavior::uniform()).p_succ - 1.0 / 3.0).abs() < 1e-15);
        let perfect = Behavior::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(usd_success(&perfect).p_succ, 1.0);
    }

    #[test]
    fn bound_examples() {
        assert_eq!(p_succ2_bound(1.0).unwrap(), 0.0);
        assert_eq!(p_succ2_bound(0.0).unwrap(), 1.0);
        assert!((p_succ2_bound(0.6).unwrap() - 0.32).abs() < 1e-15);
    }

    #[test]
    fn certification_examples() {
        let both = certify_genuine3_usd(&UsdStats { p_succ: 0.5, error_rate: 0.0 }, 0.5).unwrap();
        assert_eq!(both.verdict, UsdVerdict::Genuine3Outcome);
        assert!(both.overlap_free_certificate);
        let weak = certify_genuine3_usd(&UsdStats { p_succ: 0.3, error_rate: 0.0 }, 0.5).unwrap();
        assert_eq!(weak.verdict, UsdVerdict::NotCertified);
        let orth = certify_genuine3_usd(&UsdStats { p_succ: 1.0, error_rate: 0.0 }, 0.0).unwrap();
        assert_eq!(orth.verdict, UsdVerdict::NotCertified);
        assert!(!orth.overlap_free_certificate);
        let noisy = certify_genuine3_usd(&UsdStats { p_succ: 0.6, error_rate: 0.01 }, 0.5).unwrap();
        assert_eq!(noisy.verdict, UsdVerdict::Inconclusive);
        assert!(!noisy.overlap_free_certificate);
    }

    #[test]
    fn ideal_realization_reproduces_usd() {
        let (prep, povm) = ideal_usd_realization(0.5).unwrap();
        let b = simulate_behavior(&prep, &povm).unwrap();
        assert!(b.max_abs_diff(&Behavior::usd(0.5).unwrap()) < 1e-12);
        let m = IdealUsdMeasurement::new(0.5).unwrap();
        assert!(m.m1.expectation_bloch(prep.bloch(0)).abs() < 1e-15);
        assert!(m.m0.expectation_bloch(prep.bloch(1)).abs() < 1e-15);
        let sum = m.m0 + m.m1 + m.m_fail;
        assert!((sum.a0 - 1.0).abs() < 1e-14 && sum.bloch_norm() < 1e-14);
        assert!(m.m_fail.min_eigenvalue() >= -1e-15);
        assert!(matches!(ideal_usd_realization(0.0), Err(Error::Degenerate(_))));
        assert!(matches!(ideal_usd_realization(1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn selftest_passes_on_ideal_and_rotated() {
        let (prep, povm) = ideal_usd_realization(0.7).unwrap();
        let real = PhysicalRealization::from_model(&prep, &povm);
        let r = verify_selftest(&real, 0.7).unwrap();
        assert_eq!(r.verdict, SelfTestVerdict::Pass);
        assert!(r.max_residual() <= 1e-12);
        let rot = verify_selftest(&real.conjugated(&xz_rotation(0.9)), 0.7).unwrap();
        assert_eq!(rot.verdict, SelfTestVerdict::Pass);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["residuals"].as_array().unwrap().len(), 12);
        assert_eq!(json["verdict"], "PASS");
    }

    #[test]
    fn suboptimal_behavior_is_not_applicable() {
        let (prep, _) = ideal_usd_realization(0.7).unwrap();
        // Lose 0.01 of the conclusive weight into the inconclusive outcome.
        let m = IdealUsdMeasurement::new(0.7).unwrap();
        let f = 1.0 - 0.01 / 0.3;
        let povm = Povm::new([f * m.m0, f * m.m1, HermitianMat2::IDENTITY - f * m.m0 - f * m.m1]).unwrap();
        let r = verify_selftest(&PhysicalRealization::from_model(&prep, &povm), 0.7).unwrap();
        assert_eq!(r.verdict, SelfTestVerdict::NotApplicable);
    }

    #[test]
    fn physical_outcomes_vanish_off_pattern() {
        let (prep, povm) = ideal_usd_realization(0.4).unwrap();
        let real = PhysicalRealization::from_model(&prep, &povm);
        assert_eq!(verify_selftest(&real, 0.4).unwrap().verdict, SelfTestVerdict::Pass);
        for k in 0..2 {
            for j in 0..2 {
                for jp in 0..2 {
                    let op = real.states[j] * real.states[jp].adjoint();
                    let v = trace_product(&real.elements[k], &op);
                    let expected = if j == k && jp == k { 0.6 } else { 0.0 };
                    assert!((v - C64::new(expected, 0.0)).norm() < 1e-12, "k {k} j {j} j' {jp}: {v}");
                }
            }
        }
    }

    #[test]
    fn closed_form_matches_map() {
        let delta = 0.35;
        let (prep, povm) = ideal_usd_realization(delta).unwrap();
        let real = PhysicalRealization::from_model(&prep, &povm).conjugated(&xz_rotation(-0.4));
        let map = SelfTestMap::new(&real.states, delta).unwrap();
        assert!(map.isometry_defect() < 1e-12);
        for rho in random_density_matrices(100, 7) {
            let via_map = trace_product(&real.elements[0], &map.apply(&rho));
            let closed = usd_outcome0_closed_form(delta, &rho).unwrap();
            assert!((via_map - closed).norm() < 1e-12);
        }
    }
}
