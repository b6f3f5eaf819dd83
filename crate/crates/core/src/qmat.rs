//! Qubit linear algebra and the prepare-and-measure data model.
//!
//! Two pure preparations live in an effective real qubit,
//! `|ψ_x⟩ = cos θ |0⟩ ± sin θ |1⟩` with overlap `δ = cos 2θ`, and a
//! three-outcome measurement device turns them into a 2×3 table of
//! conditional probabilities `p(b|x)`.

use std::f64::consts::FRAC_PI_4;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical slack used when validating user-supplied objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed negative eigenvalue of a POVM element.
    pub psd: f64,
    /// Allowed deviation of `Σ_b M_b` from the identity.
    pub normalization: f64,
    /// Allowed deviation of a behavior row sum from 1.
    pub row_sum: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        psd: 1e-10,
        normalization: 1e-10,
        row_sum: 1e-12,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Real symmetric 2×2 matrix `[[a, b], [b, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { a: 0.0, b: 0.0, d: 0.0 };
    pub const IDENTITY: Sym2 = Sym2 { a: 1.0, b: 0.0, d: 1.0 };

    pub const fn new(a: f64, b: f64, d: f64) -> Self {
        Self { a, b, d }
    }

    /// `|v⟩⟨v|` for a real vector.
    pub fn outer(v: [f64; 2]) -> Self {
        Self::new(v[0] * v[0], v[0] * v[1], v[1] * v[1])
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.b
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.a + self.d);
        let radius = (0.25 * (self.a - self.d).powi(2) + self.b * self.b).sqrt();
        [mean - radius, mean + radius]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Frobenius inner product `Tr[self · other]`.
    pub fn dot(&self, other: &Sym2) -> f64 {
        self.a * other.a + 2.0 * self.b * other.b + self.d * other.d
    }

    /// `⟨v|self|v⟩` for a real vector.
    pub fn expectation(&self, v: [f64; 2]) -> f64 {
        self.a * v[0] * v[0] + 2.0 * self.b * v[0] * v[1] + self.d * v[1] * v[1]
    }

    pub fn to_rows(self) -> [[f64; 2]; 2] {
        [[self.a, self.b], [self.b, self.d]]
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.d.abs())
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.a + o.a, self.b + o.b, self.d + o.d)
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.a - o.a, self.b - o.b, self.d - o.d)
    }
}

impl Mul<Sym2> for f64 {
    type Output = Sym2;
    fn mul(self, m: Sym2) -> Sym2 {
        Sym2::new(self * m.a, self * m.b, self * m.d)
    }
}

/// Hermitian 2×2 matrix written as `a₀·𝕀 + a·σ`.
///
/// Eigenvalues are `a₀ ± |a|`, so positivity reduces to `a₀ ≥ |a|`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HermitianMat2 {
    pub a0: f64,
    pub a: [f64; 3],
}

impl HermitianMat2 {
    pub const ZERO: HermitianMat2 = HermitianMat2 { a0: 0.0, a: [0.0; 3] };
    pub const IDENTITY: HermitianMat2 = HermitianMat2 { a0: 1.0, a: [0.0; 3] };

    pub const fn new(a0: f64, a: [f64; 3]) -> Self {
        Self { a0, a }
    }

    /// `λ(𝕀 + u·σ)`.
    pub fn weighted_bloch(lambda: f64, u: [f64; 3]) -> Self {
        Self::new(lambda, [lambda * u[0], lambda * u[1], lambda * u[2]])
    }

    /// Build from a real symmetric matrix.
    pub fn from_sym(m: Sym2) -> Self {
        Self::new(0.5 * (m.a + m.d), [m.b, 0.0, 0.5 * (m.a - m.d)])
    }

    /// Real (symmetric) part. This is the only part seen by real states.
    pub fn real_part(&self) -> Sym2 {
        Sym2::new(self.a0 + self.a[2], self.a[0], self.a0 - self.a[2])
    }

    pub fn bloch_norm(&self) -> f64 {
        (self.a[0] * self.a[0] + self.a[1] * self.a[1] + self.a[2] * self.a[2]).sqrt()
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        let r = self.bloch_norm();
        [self.a0 - r, self.a0 + r]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.a0 - self.bloch_norm()
    }

    pub fn trace(&self) -> f64 {
        2.0 * self.a0
    }

    /// `Tr[ρ M]` for the pure state with Bloch vector `n`.
    pub fn expectation_bloch(&self, n: [f64; 3]) -> f64 {
        self.a0 + self.a[0] * n[0] + self.a[1] * n[1] + self.a[2] * n[2]
    }

    /// Entries `[[m00, m01], [m10, m11]]` as `(re, im)` pairs.
    pub fn entries(&self) -> [[(f64, f64); 2]; 2] {
        [
            [(self.a0 + self.a[2], 0.0), (self.a[0], -self.a[1])],
            [(self.a[0], self.a[1]), (self.a0 - self.a[2], 0.0)],
        ]
    }

    fn distance(&self, other: &HermitianMat2) -> f64 {
        // Operator norm of the difference.
        let d = *self - *other;
        d.a0.abs() + d.bloch_norm()
    }
}

impl Add for HermitianMat2 {
    type Output = HermitianMat2;
    fn add(self, o: HermitianMat2) -> HermitianMat2 {
        HermitianMat2::new(
            self.a0 + o.a0,
            [self.a[0] + o.a[0], self.a[1] + o.a[1], self.a[2] + o.a[2]],
        )
    }
}

impl Sub for HermitianMat2 {
    type Output = HermitianMat2;
    fn sub(self, o: HermitianMat2) -> HermitianMat2 {
        HermitianMat2::new(
            self.a0 - o.a0,
            [self.a[0] - o.a[0], self.a[1] - o.a[1], self.a[2] - o.a[2]],
        )
    }
}

impl Mul<HermitianMat2> for f64 {
    type Output = HermitianMat2;
    fn mul(self, m: HermitianMat2) -> HermitianMat2 {
        HermitianMat2::new(self * m.a0, [self * m.a[0], self * m.a[1], self * m.a[2]])
    }
}

/// The two pure preparations with overlap `δ = cos 2θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparationPair {
    theta: f64,
    delta: f64,
}

impl PreparationPair {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `(cos θ, ± sin θ)` for input `x`.
    pub fn state(&self, x: usize) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        if x == 0 {
            [c, s]
        } else {
            [c, -s]
        }
    }

    pub fn states(&self) -> [[f64; 2]; 2] {
        [self.state(0), self.state(1)]
    }

    /// `n_x = ((−1)^x sin 2θ, 0, cos 2θ)`.
    pub fn bloch(&self, x: usize) -> [f64; 3] {
        let (s2, c2) = (2.0 * self.theta).sin_cos();
        let sign = if x == 0 { 1.0 } else { -1.0 };
        [sign * s2, 0.0, c2]
    }

    /// `|ψ_x⟩⟨ψ_x|` as a real symmetric matrix.
    pub fn projector(&self, x: usize) -> Sym2 {
        Sym2::outer(self.state(x))
    }

    pub fn inner_product(&self) -> f64 {
        let [a, b] = self.states();
        a[0] * b[0] + a[1] * b[1]
    }
}

/// Pure-state pair with `⟨ψ₀|ψ₁⟩ = delta`.
pub fn make_preparation(delta: f64) -> Result<PreparationPair> {
    check_overlap(delta)?;
    let theta = if delta == 0.0 { FRAC_PI_4 } else { 0.5 * delta.acos() };
    Ok(PreparationPair { theta, delta })
}

pub(crate) fn check_overlap(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Domain(format!("overlap {delta} outside [0, 1]")));
    }
    Ok(())
}

/// A three-outcome qubit POVM. Two-outcome measurements carry an explicit
/// zero element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Povm {
    elements: [HermitianMat2; 3],
}

impl Povm {
    pub fn new(elements: [HermitianMat2; 3]) -> Result<Self> {
        Self::with_tolerances(elements, &Tolerances::DEFAULT)
    }

    pub fn with_tolerances(elements: [HermitianMat2; 3], tol: &Tolerances) -> Result<Self> {
        let povm = Povm { elements };
        povm.validate(tol)?;
        Ok(povm)
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        for (b, m) in self.elements.iter().enumerate() {
            let values = [m.a0, m.a[0], m.a[1], m.a[2]];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidPovm(format!("element {b} is not finite")));
            }
            let min = m.min_eigenvalue();
            if min < -tol.psd {
                return Err(Error::InvalidPovm(format!(
                    "element {b} has eigenvalue {min:e} below -{:e}",
                    tol.psd
                )));
            }
        }
        let deviation = self.sum().distance(&HermitianMat2::IDENTITY);
        if deviation > tol.normalization {
            return Err(Error::InvalidPovm(format!(
                "elements sum to identity only within {deviation:e}"
            )));
        }
        Ok(())
    }

    pub fn elements(&self) -> &[HermitianMat2; 3] {
        &self.elements
    }

    pub fn element(&self, b: usize) -> HermitianMat2 {
        self.elements[b]
    }

    pub fn sum(&self) -> HermitianMat2 {
        self.elements[0] + self.elements[1] + self.elements[2]
    }

    /// Input-independent POVM `{q_b 𝕀}`.
    pub fn trivial(q: [f64; 3]) -> Result<Self> {
        Self::new(q.map(|qb| qb * HermitianMat2::IDENTITY))
    }

    /// Projective two-outcome measurement along the x–z Bloch direction at
    /// `angle` (from +z towards +x), with outcome `plus` on `+u`, `minus`
    /// on `−u`, and the remaining outcome never firing.
    pub fn projective_pair(angle: f64, plus: usize, minus: usize) -> Result<Self> {
        if plus > 2 || minus > 2 || plus == minus {
            return Err(Error::Domain(format!(
                "outcomes ({plus}, {minus}) must be distinct labels in 0..3"
            )));
        }
        let (s, c) = angle.sin_cos();
        let mut elements = [HermitianMat2::ZERO; 3];
        elements[plus] = HermitianMat2::weighted_bloch(0.5, [s, 0.0, c]);
        elements[minus] = HermitianMat2::weighted_bloch(0.5, [-s, 0.0, -c]);
        Self::new(elements)
    }

    /// Extremal x–z-plane POVM `M_b = λ_b(𝕀 + u_b·σ)` with
    /// `u_b = (sin α_b, 0, cos α_b)`. The weights are the unique solution of
    /// `Σλ_b = 1`, `Σλ_b u_b = 0`; fails when the origin is not inside the
    /// triangle spanned by the three Bloch vectors.
    pub fn extremal_from_angles(angles: [f64; 3]) -> Result<Self> {
        let u: Vec<[f64; 2]> = angles.iter().map(|a| [a.sin(), a.cos()]).collect();
        // Barycentric coordinates of the origin in the triangle u0 u1 u2.
        let cross = |p: [f64; 2], q: [f64; 2]| p[0] * q[1] - p[1] * q[0];
        let area = cross(u[0], u[1]) + cross(u[1], u[2]) + cross(u[2], u[0]);
        if area.abs() < 1e-12 {
            return Err(Error::Domain("Bloch vectors are degenerate".into()));
        }
        let lambda = [
            cross(u[1], u[2]) / area,
            cross(u[2], u[0]) / area,
            cross(u[0], u[1]) / area,
        ];
        if lambda.iter().any(|&l| l < 0.0) {
            return Err(Error::Domain(
                "origin is outside the hull of the Bloch vectors".into(),
            ));
        }
        let elements = [0, 1, 2]
            .map(|b| HermitianMat2::weighted_bloch(lambda[b], [u[b][0], 0.0, u[b][1]]));
        Self::new(elements)
    }
}

/// Symmetric extremal family: `u₀ = (−sin φ, 0, −cos φ)`,
/// `u₁ = (sin φ, 0, −cos φ)`, `λ₀ = λ₁ = 1/[2(1 + cos φ)]`, and the third
/// element along `+z`.
///
/// With this orientation the simulated behavior sits at
/// [`crate::boundary::p3_curve_point`] for the same `φ`.
pub fn symmetric_povm(phi: f64) -> Result<Povm> {
    if !(-std::f64::consts::FRAC_PI_2..=std::f64::consts::FRAC_PI_2).contains(&phi) {
        return Err(Error::Domain(format!("phi {phi} outside [-pi/2, pi/2]")));
    }
    let (s, c) = phi.sin_cos();
    let lambda = 1.0 / (2.0 * (1.0 + c));
    let m0 = HermitianMat2::weighted_bloch(lambda, [-s, 0.0, -c]);
    let m1 = HermitianMat2::weighted_bloch(lambda, [s, 0.0, -c]);
    // 𝕀 − M₀ − M₁ = (c/(1+c))(𝕀 + σ_z), written out to keep it exact.
    let w = c / (1.0 + c);
    let m2 = HermitianMat2::new(w, [0.0, 0.0, w]);
    Povm::new([m0, m1, m2])
}

/// Conditional probabilities `p(b|x)`, row `x`, column `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    p: [[f64; 3]; 2],
}

impl Behavior {
    pub fn new(p: [[f64; 3]; 2]) -> Result<Self> {
        Self::with_row_tolerance(p, Tolerances::DEFAULT.row_sum)
    }

    pub fn with_row_tolerance(p: [[f64; 3]; 2], row_tol: f64) -> Result<Self> {
        for (x, row) in p.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < -row_tol || v > 1.0 + row_tol {
                    return Err(Error::InvalidBehavior(format!(
                        "p({b}|{x}) = {v} is not a probability"
                    )));
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > row_tol {
                return Err(Error::InvalidBehavior(format!(
                    "row {x} sums to {sum}, not 1"
                )));
            }
        }
        Ok(Behavior { p })
    }

    pub fn uniform() -> Self {
        Behavior { p: [[1.0 / 3.0; 3]; 2] }
    }

    /// The slice point `X·A + Y·B + (1−X−Y)·C`.
    pub fn from_slice(x: f64, y: f64) -> Result<Self> {
        let z = 1.0 - x - y;
        Self::new([[x, y, z], [y, x, z]])
    }

    /// Optimal unambiguous-discrimination statistics `[[1−δ,0,δ],[0,1−δ,δ]]`.
    pub fn usd(delta: f64) -> Result<Self> {
        check_overlap(delta)?;
        Self::new([[1.0 - delta, 0.0, delta], [0.0, 1.0 - delta, delta]])
    }

    pub fn p(&self) -> &[[f64; 3]; 2] {
        &self.p
    }

    pub fn get(&self, b: usize, x: usize) -> f64 {
        self.p[x][b]
    }

    /// Entries flattened as `v_{b|x}` index `3x + b`.
    pub fn as_vector(&self) -> [f64; 6] {
        let p = &self.p;
        [p[0][0], p[0][1], p[0][2], p[1][0], p[1][1], p[1][2]]
    }

    pub fn max_abs_diff(&self, other: &Behavior) -> f64 {
        self.as_vector()
            .iter()
            .zip(other.as_vector())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `p(b|x) = Tr[|ψ_x⟩⟨ψ_x| M_b]`.
pub fn simulate_behavior(prep: &PreparationPair, povm: &Povm) -> Result<Behavior> {
    povm.validate(&Tolerances::DEFAULT)?;
    let mut p = [[0.0; 3]; 2];
    for (x, row) in p.iter_mut().enumerate() {
        let n = prep.bloch(x);
        for (b, entry) in row.iter_mut().enumerate() {
            *entry = povm.element(b).expectation_bloch(n);
        }
        // Outcomes with zero weight may come out as −1e-17.
        for entry in row.iter_mut() {
            if *entry < 0.0 && *entry > -1e-14 {
                *entry = 0.0;
            }
        }
    }
    Behavior::new(p)
}

/// `(1−ξ)·b + ξ·b0`.
pub fn mix_with_noise(b: &Behavior, xi: f64, b0: &Behavior) -> Result<Behavior> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::Domain(format!("noise weight {xi} outside [0, 1]")));
    }
    let mut p = [[0.0; 3]; 2];
    for x in 0..2 {
        for k in 0..3 {
            p[x][k] = (1.0 - xi) * b.p[x][k] + xi * b0.p[x][k];
        }
    }
    Ok(Behavior { p })
}

/// Input-output relabeling `(a,b,c; d,e,f) ↦ (e,d,f; b,a,c)`.
pub fn relabel_pi(b: &Behavior) -> Behavior {
    let [[a, bb, c], [d, e, f]] = b.p;
    Behavior {
        p: [[e, d, f], [bb, a, c]],
    }
}

/// Projection onto the relabeling-invariant slice, `½(b + Π(b))`.
pub fn symmetrize_t(b: &Behavior) -> Behavior {
    let r = relabel_pi(b);
    let mut p = [[0.0; 3]; 2];
    for x in 0..2 {
        for k in 0..3 {
            p[x][k] = 0.5 * (b.p[x][k] + r.p[x][k]);
        }
    }
    Behavior { p }
}

/// Coordinates of a point in the symmetric slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceCoords {
    pub x: f64,
    pub y: f64,
}

pub fn slice_coords(b: &Behavior) -> SliceCoords {
    SliceCoords {
        x: 0.5 * (b.p[0][0] + b.p[1][1]),
        y: 0.5 * (b.p[1][0] + b.p[0][1]),
    }
}

/// On-disk behavior: `{"p": [[..],[..]], "delta": r}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorFile {
    pub p: [[f64; 3]; 2],
    pub delta: f64,
}

/// Row-sum slack accepted when reading behaviors from JSON.
pub const JSON_ROW_TOLERANCE: f64 = 1e-9;

impl BehaviorFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: BehaviorFile = serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        check_overlap(file.delta)?;
        Behavior::with_row_tolerance(file.p, JSON_ROW_TOLERANCE)?;
        Ok(file)
    }

    /// The validated behavior, with rows renormalized to sum to one.
    pub fn behavior(&self) -> Result<Behavior> {
        let mut p = self.p;
        for row in p.iter_mut() {
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v = (*v / sum).max(0.0);
            }
        }
        Behavior::new(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("behavior file serializes")
    }
}
