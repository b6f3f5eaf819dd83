//! Dense primal-dual interior-point solver for small conic programs whose
//! cones are scalar half-lines and 2×2 PSD blocks.
//!
//! A 2×2 symmetric matrix `[[a, b], [b, d]]` is PSD exactly when
//! `(a + d, a − d, 2b)` lies in the three-dimensional second-order cone, so
//! every block is handled as a Lorentz cone with Nesterov–Todd scaling.
//! Iterates follow the homogeneous self-dual embedding with Mehrotra
//! predictor-corrector steps, which also yields infeasibility certificates.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::qmat::Sym2;

/// `constant + Σ x_i · coeff_i`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineSym2 {
    pub constant: Sym2,
    pub terms: Vec<(usize, Sym2)>,
}

impl AffineSym2 {
    pub fn new(constant: Sym2) -> Self {
        Self { constant, terms: Vec::new() }
    }

    pub fn term(mut self, var: usize, coeff: Sym2) -> Self {
        self.terms.push((var, coeff));
        self
    }

    pub fn push(&mut self, var: usize, coeff: Sym2) {
        self.terms.push((var, coeff));
    }

    pub fn eval(&self, x: &[f64]) -> Sym2 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(i, m)| acc + x[i] * m)
    }
}

/// `constant + Σ x_i · coeff_i`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineScalar {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl AffineScalar {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConeBlock {
    /// Scalar constraint `f(x) ≥ 0`.
    Nonneg(AffineScalar),
    /// Matrix constraint `M(x) ⪰ 0`.
    Psd2(AffineSym2),
}

/// `Σ coeff_i x_i = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEquality {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Minimize `objective · x` subject to the cone blocks and equalities.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub blocks: Vec<ConeBlock>,
    pub equalities: Vec<LinearEquality>,
}

impl ConicProblem {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: vec![0.0; n_vars],
            blocks: Vec::new(),
            equalities: Vec::new(),
        }
    }

    pub fn add_psd2(&mut self, map: AffineSym2) {
        self.blocks.push(ConeBlock::Psd2(map));
    }

    pub fn add_nonneg(&mut self, constant: f64, terms: Vec<(usize, f64)>) {
        self.blocks.push(ConeBlock::Nonneg(AffineScalar { constant, terms }));
    }

    pub fn add_equality(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(LinearEquality { terms, rhs });
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Smallest eigenvalue (or scalar value) across all cone blocks at `x`.
    pub fn min_block_value(&self, x: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|b| match b {
                ConeBlock::Nonneg(f) => f.eval(x),
                ConeBlock::Psd2(m) => m.eval(x).min_eigenvalue(),
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute equality violation at `x`.
    pub fn equality_residual(&self, x: &[f64]) -> f64 {
        self.equalities
            .iter()
            .map(|e| (e.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() - e.rhs).abs())
            .fold(0.0, f64::max)
    }

    fn check_indices(&self) -> Result<(), String> {
        let n = self.n_vars;
        if self.objective.len() != n {
            return Err(format!("objective has {} entries for {n} variables", self.objective.len()));
        }
        let bad = |i: usize| i >= n;
        for blk in &self.blocks {
            let oob = match blk {
                ConeBlock::Nonneg(f) => f.terms.iter().any(|t| bad(t.0)),
                ConeBlock::Psd2(m) => m.terms.iter().any(|t| bad(t.0)),
            };
            if oob {
                return Err("cone block references an unknown variable".into());
            }
        }
        if self.equalities.iter().any(|e| e.terms.iter().any(|t| bad(t.0))) {
            return Err("equality references an unknown variable".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    /// Target for residuals and the duality gap.
    pub tol: f64,
    /// Looser target accepted when progress stalls, e.g. on problems
    /// without a strictly feasible point.
    pub inaccurate_tol: f64,
    pub max_iter: usize,
}

impl SolverSettings {
    pub const DEFAULT_TOL: f64 = 1e-9;
    pub const DEFAULT_INACCURATE_TOL: f64 = 5e-5;
    pub const DEFAULT_MAX_ITER: usize = 200;

    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: Self::DEFAULT_TOL,
            inaccurate_tol: Self::DEFAULT_INACCURATE_TOL,
            max_iter: Self::DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Solved,
    /// Stopped early with residuals within the reduced-accuracy tolerance.
    SolvedInaccurate,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_solved(self) -> bool {
        matches!(self, SolveStatus::Solved | SolveStatus::SolvedInaccurate)
    }
}

/// Diagnostics attached to every solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub primal_value: f64,
    pub dual_value: f64,
}

impl fmt::Display for SolverReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} after {} iterations (primal residual {:.2e}, dual residual {:.2e}, gap {:.2e})",
            self.status, self.iterations, self.primal_residual, self.dual_residual, self.gap
        )
    }
}

/// Dual multiplier for one cone block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockDual {
    Nonneg(f64),
    Psd2(Sym2),
}

impl BlockDual {
    fn pair(&self, blk: &ConeBlock, var: Option<usize>) -> f64 {
        // ⟨Z, M_var⟩, or ⟨Z, M_0⟩ when `var` is None.
        match (self, blk) {
            (BlockDual::Nonneg(z), ConeBlock::Nonneg(f)) => match var {
                None => z * f.constant,
                Some(i) => z * f.terms.iter().filter(|t| t.0 == i).map(|t| t.1).sum::<f64>(),
            },
            (BlockDual::Psd2(z), ConeBlock::Psd2(m)) => match var {
                None => z.dot(&m.constant),
                Some(i) => m.terms.iter().filter(|t| t.0 == i).map(|t| z.dot(&t.1)).sum(),
            },
            _ => 0.0,
        }
    }
}

/// Proof that a problem has no solution.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// Multipliers `y` (one per equality) and `Z_k ⪰ 0` (one per block)
    /// with `Σ_r y_r a_r + Σ_k M_k*(Z_k) = 0` and
    /// `Σ_r y_r b_r − Σ_k ⟨Z_k, M_k(0)⟩ = 1`.
    Infeasible { equality_duals: Vec<f64>, block_duals: Vec<BlockDual> },
    /// Direction `d` with `c·d < 0`, `A d = 0` and every block's linear part
    /// nonnegative along `d`.
    Unbounded { direction: Vec<f64> },
}

impl Certificate {
    /// Largest violation of the certificate conditions (0 when exact).
    pub fn violation(&self, prob: &ConicProblem) -> f64 {
        match self {
            Certificate::Infeasible { equality_duals, block_duals } => {
                let mut worst: f64 = 0.0;
                for i in 0..prob.n_vars {
                    let mut r = 0.0;
                    for (e, y) in prob.equalities.iter().zip(equality_duals) {
                        r += y * e.terms.iter().filter(|t| t.0 == i).map(|t| t.1).sum::<f64>();
                    }
                    for (blk, z) in prob.blocks.iter().zip(block_duals) {
                        r += z.pair(blk, Some(i));
                    }
                    worst = worst.max(r.abs());
                }
                let mut value = 0.0;
                for (e, y) in prob.equalities.iter().zip(equality_duals) {
                    value += y * e.rhs;
                }
                for (blk, z) in prob.blocks.iter().zip(block_duals) {
                    value -= z.pair(blk, None);
                    let cone_violation = match z {
                        BlockDual::Nonneg(v) => (-v).max(0.0),
                        BlockDual::Psd2(m) => (-m.min_eigenvalue()).max(0.0),
                    };
                    worst = worst.max(cone_violation);
                }
                worst.max((value - 1.0).abs())
            }
            Certificate::Unbounded { direction } => {
                let mut worst: f64 = 0.0;
                let zero = vec![0.0; prob.n_vars];
                for e in &prob.equalities {
                    let r: f64 = e.terms.iter().map(|&(i, c)| c * direction[i]).sum();
                    worst = worst.max(r.abs());
                }
                for blk in &prob.blocks {
                    let v = match blk {
                        ConeBlock::Nonneg(f) => f.eval(direction) - f.eval(&zero),
                        ConeBlock::Psd2(m) => (m.eval(direction) - m.eval(&zero)).min_eigenvalue(),
                    };
                    worst = worst.max((-v).max(0.0));
                }
                let c = prob.objective_value(direction);
                if c >= 0.0 {
                    worst = worst.max(c + 1.0);
                }
                worst
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Multipliers of the equalities, sign convention of
    /// `L = c·x − Σ y_r (a_r·x − b_r) − Σ ⟨Z_k, M_k(x)⟩`.
    pub equality_duals: Vec<f64>,
    pub block_duals: Vec<BlockDual>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub report: SolverReport,
    pub certificate: Option<Certificate>,
}

#[derive(Clone, Copy)]
enum Cone {
    Nonneg(usize),
    Soc3(usize),
}

impl Cone {
    fn offset(self) -> usize {
        match self {
            Cone::Nonneg(o) | Cone::Soc3(o) => o,
        }
    }
}

/// Orthonormalized, consistent equality system and the map back to the
/// original rows.
struct ReducedEqualities {
    rows: Vec<DVector<f64>>,
    rhs: Vec<f64>,
    combos: Vec<DVector<f64>>,
}

fn reduce_equalities(
    a: &[DVector<f64>],
    b: &[f64],
) -> std::result::Result<ReducedEqualities, DVector<f64>> {
    let m = a.len();
    let mut out = ReducedEqualities { rows: Vec::new(), rhs: Vec::new(), combos: Vec::new() };
    for i in 0..m {
        let mut r = a[i].clone();
        let mut rho = b[i];
        let mut t = DVector::zeros(m);
        t[i] = 1.0;
        for _ in 0..2 {
            for k in 0..out.rows.len() {
                let c = out.rows[k].dot(&r);
                r -= c * &out.rows[k];
                rho -= c * out.rhs[k];
                t -= c * &out.combos[k];
            }
        }
        let nrm = r.norm();
        let scale = a[i].norm().max(1.0);
        if nrm <= 1e-10 * scale {
            if rho.abs() > 1e-9 * b[i].abs().max(1.0) {
                return Err(t / rho);
            }
            continue;
        }
        out.rows.push(r / nrm);
        out.rhs.push(rho / nrm);
        out.combos.push(t / nrm);
    }
    Ok(out)
}

/// Nesterov–Todd scaling of one cone at the current iterate.
#[derive(Clone, Copy)]
enum ConeScaling {
    Nonneg { w: f64 },
    Soc3 { w: [[f64; 3]; 3], winv: [[f64; 3]; 3] },
}

fn soc_residual(v: &[f64]) -> f64 {
    let r = (v[1] * v[1] + v[2] * v[2]).sqrt();
    (v[0] - r) * (v[0] + r)
}

fn mat3_vec(m: &[[f64; 3]; 3], v: &[f64]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn soc_scaling(s: &[f64], z: &[f64]) -> ConeScaling {
    let s_norm = soc_residual(s).max(1e-300).sqrt();
    let z_norm = soc_residual(z).max(1e-300).sqrt();
    let sb = [s[0] / s_norm, s[1] / s_norm, s[2] / s_norm];
    let zb = [z[0] / z_norm, z[1] / z_norm, z[2] / z_norm];
    let gamma = ((1.0 + sb[0] * zb[0] + sb[1] * zb[1] + sb[2] * zb[2]) / 2.0).sqrt();
    let wb = [
        (sb[0] + zb[0]) / (2.0 * gamma),
        (sb[1] - zb[1]) / (2.0 * gamma),
        (sb[2] - zb[2]) / (2.0 * gamma),
    ];
    let eta = (s_norm / z_norm).sqrt();
    let k = 1.0 / (1.0 + wb[0]);
    let inner = [
        [1.0 + k * wb[1] * wb[1], k * wb[1] * wb[2]],
        [k * wb[2] * wb[1], 1.0 + k * wb[2] * wb[2]],
    ];
    let mut w = [[0.0; 3]; 3];
    let mut winv = [[0.0; 3]; 3];
    w[0][0] = eta * wb[0];
    winv[0][0] = wb[0] / eta;
    for i in 0..2 {
        w[0][i + 1] = eta * wb[i + 1];
        w[i + 1][0] = eta * wb[i + 1];
        winv[0][i + 1] = -wb[i + 1] / eta;
        winv[i + 1][0] = -wb[i + 1] / eta;
        for j in 0..2 {
            w[i + 1][j + 1] = eta * inner[i][j];
            winv[i + 1][j + 1] = inner[i][j] / eta;
        }
    }
    ConeScaling::Soc3 { w, winv }
}

fn jordan(u: &[f64], v: &[f64], out: &mut [f64]) {
    if u.len() == 1 {
        out[0] = u[0] * v[0];
    } else {
        out[0] = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
        out[1] = u[0] * v[1] + v[0] * u[1];
        out[2] = u[0] * v[2] + v[0] * u[2];
    }
}

/// Solve `λ ∘ u = d` for `u`.
fn jordan_div(lambda: &[f64], d: &[f64], out: &mut [f64]) {
    if lambda.len() == 1 {
        out[0] = d[0] / lambda[0];
    } else {
        let rho = soc_residual(lambda);
        let u0 = (lambda[0] * d[0] - lambda[1] * d[1] - lambda[2] * d[2]) / rho;
        out[0] = u0;
        out[1] = (d[1] - u0 * lambda[1]) / lambda[0];
        out[2] = (d[2] - u0 * lambda[2]) / lambda[0];
    }
}

/// Largest step keeping `v + α dv` in the cone.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    if v.len() == 1 {
        return if dv[0] < 0.0 { -v[0] / dv[0] } else { f64::INFINITY };
    }
    let a = dv[0] * dv[0] - dv[1] * dv[1] - dv[2] * dv[2];
    let b = v[0] * dv[0] - v[1] * dv[1] - v[2] * dv[2];
    let c = soc_residual(v).max(0.0);
    let disc = b * b - a * c;
    let mut alpha = f64::INFINITY;
    if (a < 0.0 || b < 0.0) && disc >= 0.0 {
        alpha = c / (-b + disc.sqrt());
    }
    if dv[0] < 0.0 {
        alpha = alpha.min(-v[0] / dv[0]);
    }
    alpha.max(0.0)
}

struct Standard {
    n: usize,
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    cones: Vec<Cone>,
    combos: Vec<DVector<f64>>,
    m_orig: usize,
}

fn soc_image(m: &Sym2) -> [f64; 3] {
    [m.a + m.d, m.a - m.d, 2.0 * m.b]
}

fn standardize(prob: &ConicProblem) -> std::result::Result<Standard, DVector<f64>> {
    let n = prob.n_vars;
    let mut cones = Vec::new();
    let mut p = 0;
    for blk in &prob.blocks {
        match blk {
            ConeBlock::Nonneg(_) => {
                cones.push(Cone::Nonneg(p));
                p += 1;
            }
            ConeBlock::Psd2(_) => {
                cones.push(Cone::Soc3(p));
                p += 3;
            }
        }
    }
    let mut g = DMatrix::zeros(p, n);
    let mut h = DVector::zeros(p);
    for (blk, cone) in prob.blocks.iter().zip(&cones) {
        let o = cone.offset();
        match blk {
            ConeBlock::Nonneg(f) => {
                h[o] = f.constant;
                for &(i, c) in &f.terms {
                    g[(o, i)] -= c;
                }
            }
            ConeBlock::Psd2(m) => {
                let h0 = soc_image(&m.constant);
                for k in 0..3 {
                    h[o + k] = h0[k];
                }
                for (i, coeff) in &m.terms {
                    let col = soc_image(coeff);
                    for k in 0..3 {
                        g[(o + k, *i)] -= col[k];
                    }
                }
            }
        }
    }
    let rows: Vec<DVector<f64>> = prob
        .equalities
        .iter()
        .map(|e| {
            let mut r = DVector::zeros(n);
            for &(i, c) in &e.terms {
                r[i] += c;
            }
            r
        })
        .collect();
    let rhs: Vec<f64> = prob.equalities.iter().map(|e| e.rhs).collect();
    let reduced = reduce_equalities(&rows, &rhs)?;
    let m = reduced.rows.len();
    let mut a = DMatrix::zeros(m, n);
    for (k, r) in reduced.rows.iter().enumerate() {
        a.set_row(k, &r.transpose());
    }
    Ok(Standard {
        n,
        c: DVector::from_column_slice(&prob.objective),
        a,
        b: DVector::from_vec(reduced.rhs),
        g,
        h,
        cones,
        combos: reduced.combos,
        m_orig: prob.equalities.len(),
    })
}

fn block_duals_from(std: &Standard, z: &DVector<f64>) -> Vec<BlockDual> {
    std.cones
        .iter()
        .map(|cone| match *cone {
            Cone::Nonneg(o) => BlockDual::Nonneg(z[o]),
            Cone::Soc3(o) => {
                BlockDual::Psd2(Sym2::new(z[o] + z[o + 1], z[o + 2], z[o] - z[o + 1]))
            }
        })
        .collect()
}

fn equality_duals_from(std: &Standard, y: &DVector<f64>) -> Vec<f64> {
    // Internal y multiplies the orthonormalized rows with the opposite sign.
    let mut out = DVector::zeros(std.m_orig);
    for (k, combo) in std.combos.iter().enumerate() {
        out -= y[k] * combo;
    }
    out.iter().copied().collect()
}

/// Solve a [`ConicProblem`] to the requested tolerance.
pub fn solve_conic(prob: &ConicProblem, settings: &SolverSettings) -> ConicSolution {
    if let Err(msg) = prob.check_indices() {
        panic!("malformed conic problem: {msg}");
    }
    let std = match standardize(prob) {
        Ok(s) => s,
        Err(w) => {
            // Inconsistent equalities: Σ w_r a_r = 0 and Σ w_r b_r = 1.
            let report = SolverReport {
                status: SolveStatus::Infeasible,
                iterations: 0,
                primal_residual: f64::INFINITY,
                dual_residual: 0.0,
                gap: f64::NAN,
                primal_value: f64::INFINITY,
                dual_value: f64::INFINITY,
            };
            return ConicSolution {
                status: SolveStatus::Infeasible,
                x: vec![0.0; prob.n_vars],
                equality_duals: w.iter().copied().collect(),
                block_duals: prob
                    .blocks
                    .iter()
                    .map(|b| match b {
                        ConeBlock::Nonneg(_) => BlockDual::Nonneg(0.0),
                        ConeBlock::Psd2(_) => BlockDual::Psd2(Sym2::ZERO),
                    })
                    .collect(),
                primal_value: f64::INFINITY,
                dual_value: f64::INFINITY,
                certificate: Some(Certificate::Infeasible {
                    equality_duals: w.iter().copied().collect(),
                    block_duals: prob
                        .blocks
                        .iter()
                        .map(|b| match b {
                            ConeBlock::Nonneg(_) => BlockDual::Nonneg(0.0),
                            ConeBlock::Psd2(_) => BlockDual::Psd2(Sym2::ZERO),
                        })
                        .collect(),
                }),
                report,
            };
        }
    };
    Hsde::new(&std, settings).run(prob)
}

#[derive(Clone)]
struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

struct Hsde<'a> {
    std: &'a Standard,
    settings: SolverSettings,
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

struct Residuals {
    rx: DVector<f64>,
    ry: DVector<f64>,
    rz: DVector<f64>,
    rt: f64,
}

struct Direction {
    dx: DVector<f64>,
    dy: DVector<f64>,
    dz: DVector<f64>,
    ds: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

impl<'a> Hsde<'a> {
    fn new(std: &'a Standard, settings: &SolverSettings) -> Self {
        let p = std.h.len();
        let mut e = DVector::zeros(p);
        for cone in &std.cones {
            e[cone.offset()] = 1.0;
        }
        Self {
            std,
            settings: *settings,
            x: DVector::zeros(std.n),
            y: DVector::zeros(std.b.len()),
            z: e.clone(),
            s: e,
            tau: 1.0,
            kappa: 1.0,
        }
    }

    fn degree(&self) -> f64 {
        self.std.cones.len() as f64
    }

    fn snapshot(&self) -> Iterate {
        Iterate {
            x: self.x.clone(),
            y: self.y.clone(),
            z: self.z.clone(),
            s: self.s.clone(),
            tau: self.tau,
            kappa: self.kappa,
        }
    }

    fn restore(&mut self, it: Iterate) {
        self.x = it.x;
        self.y = it.y;
        self.z = it.z;
        self.s = it.s;
        self.tau = it.tau;
        self.kappa = it.kappa;
    }

    /// Normalized residuals and objective values at the current iterate.
    fn residuals_report(&self, iterations: usize, status: SolveStatus) -> SolverReport {
        let st = self.std;
        let tau = self.tau;
        let xh = &self.x / tau;
        let yh = &self.y / tau;
        let zh = &self.z / tau;
        let sh = &self.s / tau;
        let pres = ((&st.a * &xh - &st.b).norm() / st.b.norm().max(1.0))
            .max((&st.g * &xh + &sh - &st.h).norm() / st.h.norm().max(1.0));
        let dres = (st.a.tr_mul(&yh) + st.g.tr_mul(&zh) + &st.c).norm() / st.c.norm().max(1.0);
        SolverReport {
            status,
            iterations,
            primal_residual: pres,
            dual_residual: dres,
            gap: sh.dot(&zh),
            primal_value: st.c.dot(&xh),
            dual_value: -st.b.dot(&yh) - st.h.dot(&zh),
        }
    }

    fn residuals(&self) -> Residuals {
        let st = self.std;
        Residuals {
            rx: st.a.tr_mul(&self.y) + st.g.tr_mul(&self.z) + &st.c * self.tau,
            ry: -(&st.a * &self.x) + &st.b * self.tau,
            rz: -(&st.g * &self.x) + &st.h * self.tau - &self.s,
            rt: -st.c.dot(&self.x) - st.b.dot(&self.y) - st.h.dot(&self.z) - self.kappa,
        }
    }

    fn scalings(&self) -> (Vec<ConeScaling>, DVector<f64>) {
        let mut lambda = DVector::zeros(self.s.len());
        let sc = self
            .std
            .cones
            .iter()
            .map(|cone| match *cone {
                Cone::Nonneg(o) => {
                    let w = (self.s[o] / self.z[o]).sqrt();
                    lambda[o] = (self.s[o] * self.z[o]).sqrt();
                    ConeScaling::Nonneg { w }
                }
                Cone::Soc3(o) => {
                    let scaling = soc_scaling(&self.s.as_slice()[o..o + 3], &self.z.as_slice()[o..o + 3]);
                    if let ConeScaling::Soc3 { w, .. } = &scaling {
                        let l = mat3_vec(w, &self.z.as_slice()[o..o + 3]);
                        lambda.as_mut_slice()[o..o + 3].copy_from_slice(&l);
                    }
                    scaling
                }
            })
            .collect();
        (sc, lambda)
    }

    fn apply_w(&self, sc: &[ConeScaling], v: &DVector<f64>, inverse: bool) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (cone, scale) in self.std.cones.iter().zip(sc) {
            let o = cone.offset();
            match scale {
                ConeScaling::Nonneg { w } => {
                    out[o] = if inverse { v[o] / w } else { v[o] * w };
                }
                ConeScaling::Soc3 { w, winv } => {
                    let m = if inverse { winv } else { w };
                    let r = mat3_vec(m, &v.as_slice()[o..o + 3]);
                    out.as_mut_slice()[o..o + 3].copy_from_slice(&r);
                }
            }
        }
        out
    }

    fn cone_op(&self, u: &DVector<f64>, v: &DVector<f64>, divide: bool) -> DVector<f64> {
        let mut out = DVector::zeros(u.len());
        for cone in &self.std.cones {
            let (o, len) = match *cone {
                Cone::Nonneg(o) => (o, 1),
                Cone::Soc3(o) => (o, 3),
            };
            let (us, vs) = (&u.as_slice()[o..o + len], &v.as_slice()[o..o + len]);
            let dst = &mut out.as_mut_slice()[o..o + len];
            if divide {
                jordan_div(us, vs, dst);
            } else {
                jordan(us, vs, dst);
            }
        }
        out
    }

    fn identity_element(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.s.len());
        for cone in &self.std.cones {
            e[cone.offset()] = 1.0;
        }
        e
    }

    fn kkt_matrix(&self, sc: &[ConeScaling]) -> DMatrix<f64> {
        let st = self.std;
        let (n, m, p) = (st.n, st.b.len(), st.h.len());
        let dim = n + m + p + 1;
        let mut k = DMatrix::zeros(dim, dim);
        let (oy, oz, ot) = (n, n + m, n + m + p);
        k.view_mut((0, oy), (n, m)).copy_from(&st.a.transpose());
        k.view_mut((0, oz), (n, p)).copy_from(&st.g.transpose());
        k.view_mut((oy, 0), (m, n)).copy_from(&(-&st.a));
        k.view_mut((oz, 0), (p, n)).copy_from(&(-&st.g));
        for i in 0..n {
            k[(i, ot)] = st.c[i];
            k[(ot, i)] = -st.c[i];
        }
        for i in 0..m {
            k[(oy + i, ot)] = st.b[i];
            k[(ot, oy + i)] = -st.b[i];
        }
        for i in 0..p {
            k[(oz + i, ot)] = st.h[i];
            k[(ot, oz + i)] = -st.h[i];
        }
        for (cone, scale) in st.cones.iter().zip(sc) {
            let o = oz + cone.offset();
            match scale {
                ConeScaling::Nonneg { w } => k[(o, o)] = w * w,
                ConeScaling::Soc3 { w, .. } => {
                    for i in 0..3 {
                        for j in 0..3 {
                            k[(o + i, o + j)] = (0..3).map(|l| w[i][l] * w[l][j]).sum();
                        }
                    }
                }
            }
        }
        k[(ot, ot)] = self.kappa / self.tau;
        k
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        kkt: &DMatrix<f64>,
        lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        sc: &[ConeScaling],
        lambda: &DVector<f64>,
        res: &Residuals,
        gamma: f64,
        d_s: &DVector<f64>,
        d_kappa: f64,
    ) -> Option<Direction> {
        let st = self.std;
        let (n, m, p) = (st.n, st.b.len(), st.h.len());
        let dim = n + m + p + 1;
        let lam_div = self.cone_op(lambda, d_s, true);
        let w_lam_div = self.apply_w(sc, &lam_div, false);
        let mut rhs = DVector::zeros(dim);
        rhs.rows_mut(0, n).copy_from(&(-gamma * &res.rx));
        rhs.rows_mut(n, m).copy_from(&(-gamma * &res.ry));
        rhs.rows_mut(n + m, p).copy_from(&(-gamma * &res.rz + &w_lam_div));
        rhs[dim - 1] = -gamma * res.rt + d_kappa / self.tau;

        let mut sol = lu.solve(&rhs)?;
        for _ in 0..10 {
            let r = &rhs - kkt * &sol;
            if r.amax() <= 1e-15 * rhs.amax().max(1.0) {
                break;
            }
            sol += lu.solve(&r)?;
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let dx = sol.rows(0, n).into_owned();
        let dy = sol.rows(n, m).into_owned();
        let dz = sol.rows(n + m, p).into_owned();
        let dtau = sol[dim - 1];
        let w_dz = self.apply_w(sc, &dz, false);
        let ds = self.apply_w(sc, &(lam_div - w_dz), false);
        let dkappa = (d_kappa - self.kappa * dtau) / self.tau;
        Some(Direction { dx, dy, dz, ds, dtau, dkappa })
    }

    fn step_length(&self, d: &Direction) -> f64 {
        let mut alpha = f64::INFINITY;
        for cone in &self.std.cones {
            let (o, len) = match *cone {
                Cone::Nonneg(o) => (o, 1),
                Cone::Soc3(o) => (o, 3),
            };
            alpha = alpha.min(max_step(&self.s.as_slice()[o..o + len], &d.ds.as_slice()[o..o + len]));
            alpha = alpha.min(max_step(&self.z.as_slice()[o..o + len], &d.dz.as_slice()[o..o + len]));
        }
        if d.dtau < 0.0 {
            alpha = alpha.min(-self.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            alpha = alpha.min(-self.kappa / d.dkappa);
        }
        alpha
    }

    fn run(mut self, prob: &ConicProblem) -> ConicSolution {
        let st = self.std;
        let tol = self.settings.tol;
        let mut stalls = 0;
        let mut iterations = 0;
        // Worst normalized residual of the best iterate so far.
        let mut best: Option<(f64, Iterate)> = None;

        loop {
            let res = self.residuals();
            let current = self.residuals_report(iterations, SolveStatus::Solved);
            let SolverReport { primal_residual: pres, dual_residual: dres, gap, primal_value: pcost, dual_value: dcost, .. } =
                current;
            let scale = pcost.abs().max(dcost.abs()).max(1.0);
            let report = |status| SolverReport { status, ..current };

            if pres <= tol && dres <= tol && gap <= tol * scale && (pcost - dcost).abs() <= tol * scale {
                return self.finish(prob, report(SolveStatus::Solved), None);
            }

            // Infeasibility certificates.
            let hz_by = st.h.dot(&self.z) + st.b.dot(&self.y);
            if hz_by < 0.0 && self.tau < self.kappa {
                let pinf = (st.a.tr_mul(&self.y) + st.g.tr_mul(&self.z)).norm() / (-hz_by);
                if pinf <= tol {
                    let scale_c = -1.0 / hz_by;
                    let cert = Certificate::Infeasible {
                        equality_duals: equality_duals_from(st, &(&self.y * scale_c)),
                        block_duals: block_duals_from(st, &(&self.z * scale_c)),
                    };
                    return self.finish(prob, report(SolveStatus::Infeasible), Some(cert));
                }
            }
            let cx = st.c.dot(&self.x);
            if cx < 0.0 && self.tau < self.kappa {
                let dinf = (&st.a * &self.x).norm().max((&st.g * &self.x + &self.s).norm()) / (-cx);
                if dinf <= tol {
                    let dir = &self.x / (-cx);
                    let cert = Certificate::Unbounded { direction: dir.iter().copied().collect() };
                    return self.finish(prob, report(SolveStatus::Unbounded), Some(cert));
                }
            }

            // Reduced-accuracy measure. The complementarity term is left out:
            // as tau -> 0 on problems without a strict interior it is inflated
            // by 1/tau^2 while the objective gap keeps shrinking.
            let worst = pres.max(dres).max((pcost - dcost).abs() / scale);
            if worst.is_finite() && best.as_ref().is_none_or(|(w, _)| worst < *w) {
                best = Some((worst, self.snapshot()));
            }

            if iterations >= self.settings.max_iter || stalls >= 5 {
                let loose = self.settings.inaccurate_tol.max(tol);
                if let Some((w, it)) = best.take() {
                    if w < worst && w <= loose {
                        self.restore(it);
                        let res = self.residuals_report(iterations, SolveStatus::SolvedInaccurate);
                        return self.finish(prob, res, None);
                    }
                }
                let status = if worst <= loose {
                    SolveStatus::SolvedInaccurate
                } else {
                    SolveStatus::NumericalFailure
                };
                return self.finish(prob, report(status), None);
            }
            iterations += 1;

            let (sc, lambda) = self.scalings();
            let kkt = self.kkt_matrix(&sc);
            // A small diagonal shift keeps the factorization usable when the
            // constraint map has a null space; refinement against the exact
            // matrix removes its effect.
            let mut shifted = kkt.clone();
            for i in 0..st.n {
                shifted[(i, i)] += 1e-9;
            }
            let lu = shifted.lu();
            let mu = (self.s.dot(&self.z) + self.tau * self.kappa) / (self.degree() + 1.0);

            // Predictor.
            let d_s_aff = -self.cone_op(&lambda, &lambda, false);
            let d_k_aff = -self.kappa * self.tau;
            let Some(aff) = self.direction(&kkt, &lu, &sc, &lambda, &res, 1.0, &d_s_aff, d_k_aff)
            else {
                stalls = usize::MAX;
                continue;
            };
            let alpha_aff = self.step_length(&aff).min(1.0);
            let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

            // Corrector.
            let winv_ds = self.apply_w(&sc, &aff.ds, true);
            let w_dz = self.apply_w(&sc, &aff.dz, false);
            let e = self.identity_element();
            let d_s = -self.cone_op(&lambda, &lambda, false) + sigma * mu * &e
                - self.cone_op(&winv_ds, &w_dz, false);
            let d_k = -self.kappa * self.tau + sigma * mu - aff.dkappa * aff.dtau;
            let Some(dir) = self.direction(&kkt, &lu, &sc, &lambda, &res, 1.0 - sigma, &d_s, d_k)
            else {
                stalls = usize::MAX;
                continue;
            };
            let alpha = (0.99 * self.step_length(&dir)).min(1.0);
            if alpha < 1e-8 {
                stalls += 1;
            } else {
                stalls = 0;
            }
            self.x += alpha * &dir.dx;
            self.y += alpha * &dir.dy;
            self.z += alpha * &dir.dz;
            self.s += alpha * &dir.ds;
            self.tau += alpha * dir.dtau;
            self.kappa += alpha * dir.dkappa;
            if !(self.tau.is_finite() && self.kappa.is_finite()) {
                stalls = usize::MAX;
            }
        }
    }

    fn finish(&self, prob: &ConicProblem, report: SolverReport, cert: Option<Certificate>) -> ConicSolution {
        let st = self.std;
        let tau = if report.status.is_solved() { self.tau } else { self.tau.max(1e-300) };
        let x: Vec<f64> = (&self.x / tau).iter().copied().collect();
        let y = &self.y / tau;
        let z = &self.z / tau;
        ConicSolution {
            status: report.status,
            primal_value: prob.objective_value(&x),
            dual_value: report.dual_value,
            equality_duals: equality_duals_from(st, &y),
            block_duals: block_duals_from(st, &z),
            x,
            report,
            certificate: cert,
        }
    }
}
