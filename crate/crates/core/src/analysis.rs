//! Parameter sweeps: white-noise robustness, the most robust symmetric
//! measurement, USD noise tolerance and certified min-entropy under noise.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qmat::{
    make_preparation, mix_with_noise, simulate_behavior, symmetric_povm, Behavior, Povm,
};
use crate::sdp::{
    guessing_probability_with, omega_star_with, OmegaStar, SolveStatus, SolverSettings, Verdict,
};
use crate::usd::p_succ2_bound;

/// Knobs shared by all sweeps.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    pub solver: SolverSettings,
    /// Step of the coarse `φ` scan, in radians.
    pub phi_step: f64,
    /// Final bracket width of the golden-section refinement.
    pub phi_tol: f64,
    /// Angle step of the general extremal-POVM search; `None` skips it.
    pub general_step: Option<f64>,
    /// Bisection tolerance on the noise weight.
    pub xi_tol: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            phi_step: 0.01,
            phi_tol: 1e-4,
            general_step: Some(PI / 12.0),
            xi_tol: 1e-5,
        }
    }
}

/// `start, start + step, …` up to `stop` inclusive.
pub fn grid_points(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::Domain(format!("bad grid {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

pub fn default_delta_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub parameter: f64,
    pub metric: f64,
    pub delta: f64,
    pub extras: Vec<f64>,
}

/// Sweep output with a metadata block. Points keep grid order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub parameter: String,
    pub metric: String,
    pub extra_columns: Vec<String>,
    pub metadata: Vec<(String, String)>,
    pub tol: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    fn new(parameter: &str, metric: &str, tol: f64) -> Self {
        Self {
            parameter: parameter.into(),
            metric: metric.into(),
            extra_columns: Vec::new(),
            metadata: Vec::new(),
            tol,
            points: Vec::new(),
        }
    }

    fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.push((key.into(), value.to_string()));
        self
    }

    pub fn metrics(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.metric).collect()
    }

    /// `# key: value` lines, then `parameter,metric,delta,tol[,extras]`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# parameter: {}", self.parameter)?;
        writeln!(out, "# metric: {}", self.metric)?;
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["parameter".to_string(), "metric".into(), "delta".into(), "tol".into()];
        header.extend(self.extra_columns.iter().cloned());
        w.write_record(&header)?;
        for p in &self.points {
            let mut row = vec![fmt(p.parameter), fmt(p.metric), fmt(p.delta), fmt(self.tol)];
            row.extend(p.extras.iter().map(|v| fmt(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

fn solver_tol_line(opts: &AnalysisOptions) -> String {
    format!("tol={:e} max_iter={}", opts.solver.tol, opts.solver.max_iter)
}

fn finite_omega(b: &Behavior, delta: f64, settings: &SolverSettings) -> Result<f64> {
    let r = omega_star_with(b, delta, &Behavior::uniform(), settings)?;
    match (r.verdict, r.omega_star) {
        (Verdict::Inconclusive, _) => Err(Error::Solver(
            r.solver.expect("solver report present for numerical solves"),
        )),
        (_, OmegaStar::Unbounded) => Ok(f64::INFINITY),
        (_, OmegaStar::Finite(w)) => Ok(w),
    }
}

/// White-noise robustness `1 − ω*` against the uniform behavior, clipped to `[0, 1]`.
pub fn robustness(b: &Behavior, delta: f64) -> Result<f64> {
    robustness_with(b, delta, &SolverSettings::default())
}

pub fn robustness_with(b: &Behavior, delta: f64, settings: &SolverSettings) -> Result<f64> {
    Ok((1.0 - finite_omega(b, delta, settings)?).clamp(0.0, 1.0))
}

/// Behavior of the symmetric family at angle `phi`.
pub fn symmetric_behavior(delta: f64, phi: f64) -> Result<Behavior> {
    simulate_behavior(&make_preparation(delta)?, &symmetric_povm(phi)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiOptimum {
    /// Minimizing angle on the `[−π/2, 0]` branch; `ω*` is even in `φ`.
    pub phi: f64,
    pub omega: f64,
}

fn omega_of_phi(delta: f64, phi: f64, settings: &SolverSettings) -> Result<f64> {
    finite_omega(&symmetric_behavior(delta, phi)?, delta, settings)
}

/// Most robust symmetric measurement: scan, then golden-section refinement.
pub fn optimal_phi(delta: f64, opts: &AnalysisOptions) -> Result<PhiOptimum> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("overlap {delta} must lie in (0, 1)")));
    }
    let f = |phi: f64| omega_of_phi(delta, phi, &opts.solver);
    let scan = grid_points(-FRAC_PI_2, 0.0, opts.phi_step)?;
    let values = scan.iter().map(|&p| f(p)).collect::<Result<Vec<_>>>()?;
    let (k, _) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("scan grid is nonempty");
    let mut lo = (scan[k] - opts.phi_step).max(-FRAC_PI_2);
    let mut hi = (scan[k] + opts.phi_step).min(0.0);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    while hi - lo > opts.phi_tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b)?;
        }
    }
    let mut best = PhiOptimum { phi: scan[k], omega: values[k] };
    for (phi, omega) in [(a, fa), (b, fb)] {
        if omega < best.omega {
            best = PhiOptimum { phi, omega };
        }
    }
    Ok(best)
}

/// Bloch angles (from +z towards +x) of the symmetric family's elements.
pub fn symmetric_angles(phi: f64) -> [f64; 3] {
    [PI + phi, PI - phi, 0.0]
}

/// Extremal three-outcome POVMs from all angle triples on a uniform grid.
fn extremal_candidates(step: f64) -> Vec<[f64; 3]> {
    let n = (2.0 * PI / step).round() as usize;
    let angle = |k: usize| k as f64 * 2.0 * PI / n as f64;
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let a = [angle(i), angle(j), angle(k)];
                if Povm::extremal_from_angles(a).is_ok() {
                    out.push(a);
                }
            }
        }
    }
    out
}

/// Smallest `ω*` over extremal three-outcome POVMs on an angle grid.
pub fn general_min_omega(delta: f64, step: f64, settings: &SolverSettings) -> Result<f64> {
    let prep = make_preparation(delta)?;
    let mut best = f64::INFINITY;
    for a in extremal_candidates(step) {
        let b = simulate_behavior(&prep, &Povm::extremal_from_angles(a)?)?;
        best = best.min(finite_omega(&b, delta, settings)?);
    }
    Ok(best)
}

/// `ω*_min(δ)` over the symmetric family, with the general extremal search as
/// a cross-check column.
pub fn min_omega_sweep(delta_grid: &[f64], opts: &AnalysisOptions) -> Result<SweepResult> {
    let rows: Vec<Result<SweepPoint>> = delta_grid
        .par_iter()
        .map(|&delta| {
            let best = optimal_phi(delta, opts)?;
            let mut extras = vec![best.phi];
            if let Some(step) = opts.general_step {
                extras.push(general_min_omega(delta, step, &opts.solver)?);
            }
            Ok(SweepPoint { parameter: delta, metric: best.omega, delta, extras })
        })
        .collect();
    let mut out = SweepResult::new("delta", "omega_star_min", opts.solver.tol)
        .meta("family", "symmetric extremal POVM, phi scan + golden-section refinement")
        .meta("phi_step", opts.phi_step)
        .meta("phi_tol", opts.phi_tol)
        .meta("solver", solver_tol_line(opts));
    out.extra_columns.push("phi_star".into());
    if let Some(step) = opts.general_step {
        out.extra_columns.push("general_min".into());
        out = out.meta("general_step", step);
    }
    out.points = rows.into_iter().collect::<Result<_>>()?;
    Ok(out)
}

/// `φ*(δ)` over a grid.
pub fn optimal_phi_sweep(delta_grid: &[f64], opts: &AnalysisOptions) -> Result<SweepResult> {
    let rows: Vec<Result<SweepPoint>> = delta_grid
        .par_iter()
        .map(|&delta| {
            let best = optimal_phi(delta, opts)?;
            Ok(SweepPoint { parameter: delta, metric: best.phi, delta, extras: vec![best.omega] })
        })
        .collect();
    let mut out = SweepResult::new("delta", "phi_star", opts.solver.tol)
        .meta("branch", "phi in [-pi/2, 0]; omega_star is even in phi")
        .meta("phi_step", opts.phi_step)
        .meta("phi_tol", opts.phi_tol)
        .meta("solver", solver_tol_line(opts));
    out.extra_columns.push("omega_star".into());
    out.points = rows.into_iter().collect::<Result<_>>()?;
    Ok(out)
}

fn usd_certified_at(delta: f64, xi: f64, settings: &SolverSettings) -> Result<bool> {
    let mixed = mix_with_noise(&Behavior::usd(delta)?, xi, &Behavior::uniform())?;
    let r = omega_star_with(&mixed, delta, &Behavior::uniform(), settings)?;
    match r.verdict {
        Verdict::Inconclusive => Err(Error::Solver(r.solver.expect("numerical solve"))),
        v => Ok(v == Verdict::Genuine3Outcome),
    }
}

/// Largest white-noise weight keeping the USD behavior certifiable.
pub fn usd_noise_tolerance_at(delta: f64, opts: &AnalysisOptions) -> Result<f64> {
    if !usd_certified_at(delta, 0.0, &opts.solver)? {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > opts.xi_tol {
        let mid = 0.5 * (lo + hi);
        if usd_certified_at(delta, mid, &opts.solver)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub fn usd_noise_tolerance(delta_grid: &[f64], opts: &AnalysisOptions) -> Result<SweepResult> {
    let rows: Vec<Result<SweepPoint>> = delta_grid
        .par_iter()
        .map(|&delta| {
            let xi = usd_noise_tolerance_at(delta, opts)?;
            Ok(SweepPoint { parameter: delta, metric: xi, delta, extras: vec![] })
        })
        .collect();
    let mut out = SweepResult::new("delta", "usd_noise_tolerance", opts.solver.tol)
        .meta("bisection_tol", opts.xi_tol)
        .meta("solver", solver_tol_line(opts));
    out.points = rows.into_iter().collect::<Result<_>>()?;
    Ok(out)
}

/// `1 − δ` and the two-outcome bound per overlap.
pub fn usd_bounds_sweep(delta_grid: &[f64]) -> Result<SweepResult> {
    let mut out = SweepResult::new("delta", "p_succ3", 0.0)
        .meta("columns", "p_succ3 = 1 - delta; p_succ2 = (1 - delta^2)/2, 1 at delta = 0");
    out.extra_columns.push("p_succ2".into());
    for &delta in delta_grid {
        out.points.push(SweepPoint {
            parameter: delta,
            metric: 1.0 - delta,
            delta,
            extras: vec![p_succ2_bound(delta)?],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PovmFamily {
    /// Most robust symmetric measurement at `φ*(δ)`.
    Rob,
    /// Numerical maximizer of noiseless certified min-entropy.
    Opt,
}

/// Certified min-entropy of `b`, with unreproducible behaviors counted as 0.
pub fn hmin_of(b: &Behavior, delta: f64, settings: &SolverSettings) -> Result<f64> {
    match guessing_probability_with(b, delta, 0, settings) {
        Ok(r) => Ok(r.h_min),
        Err(Error::InfeasibleBehavior { .. }) => Ok(0.0),
        Err(Error::Solver(rep)) if rep.status == SolveStatus::Infeasible => Ok(0.0),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandomnessOptimum {
    pub angles: [f64; 3],
    pub h_min: f64,
}

/// Grid plus pattern search for the extremal POVM with the largest
/// noiseless certified min-entropy. The robust symmetric measurement is
/// always a candidate.
pub fn optimal_randomness_povm(delta: f64, opts: &AnalysisOptions) -> Result<RandomnessOptimum> {
    let prep = make_preparation(delta)?;
    let score = |a: [f64; 3]| -> Result<f64> {
        match Povm::extremal_from_angles(a) {
            Ok(povm) => hmin_of(&simulate_behavior(&prep, &povm)?, delta, &opts.solver),
            Err(_) => Ok(f64::NEG_INFINITY),
        }
    };
    let rob = optimal_phi(delta, opts)?;
    let mut candidates = extremal_candidates(opts.general_step.unwrap_or(PI / 12.0));
    candidates.push(symmetric_angles(rob.phi));
    let scores: Vec<Result<f64>> = candidates.par_iter().map(|&a| score(a)).collect();
    let mut best = RandomnessOptimum { angles: candidates[0], h_min: f64::NEG_INFINITY };
    for (a, s) in candidates.iter().zip(scores) {
        let s = s?;
        if s > best.h_min {
            best = RandomnessOptimum { angles: *a, h_min: s };
        }
    }
    let mut h = PI / 48.0;
    while h > 1e-3 {
        let mut improved = false;
        for i in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut a = best.angles;
                a[i] += sign * h;
                let s = score(a)?;
                if s > best.h_min + 1e-9 {
                    best = RandomnessOptimum { angles: a, h_min: s };
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    Ok(best)
}

/// `H_min(ξ)` for a measurement family mixed with white noise.
pub fn hmin_noise_curves(
    delta: f64,
    xi_grid: &[f64],
    family: PovmFamily,
    opts: &AnalysisOptions,
) -> Result<SweepResult> {
    let prep = make_preparation(delta)?;
    let (povm, label) = match family {
        PovmFamily::Rob => {
            let best = optimal_phi(delta, opts)?;
            (symmetric_povm(best.phi)?, format!("rob: symmetric POVM at phi* = {:.6}", best.phi))
        }
        PovmFamily::Opt => {
            let best = optimal_randomness_povm(delta, opts)?;
            let a = best.angles;
            (
                Povm::extremal_from_angles(a)?,
                format!(
                    "opt: numerical maximizer of noiseless H_min over extremal POVMs, angles = [{:.6}, {:.6}, {:.6}]",
                    a[0], a[1], a[2]
                ),
            )
        }
    };
    let base = simulate_behavior(&prep, &povm)?;
    let rows: Vec<Result<SweepPoint>> = xi_grid
        .par_iter()
        .map(|&xi| {
            let mixed = mix_with_noise(&base, xi, &Behavior::uniform())?;
            let h = hmin_of(&mixed, delta, &opts.solver)?;
            Ok(SweepPoint { parameter: xi, metric: h, delta, extras: vec![] })
        })
        .collect();
    let mut out = SweepResult::new("xi", "h_min_bits", opts.solver.tol)
        .meta("family", label)
        .meta("x_star", 0)
        .meta("adversary", "three classical symbols, one per outcome")
        .meta("solver", solver_tol_line(opts));
    out.points = rows.into_iter().collect::<Result<_>>()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_endpoint() {
        let g = grid_points(0.0, 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 11);
        assert!((g[10] - 1.0).abs() < 1e-12);
        assert!(grid_points(0.0, 1.0, 0.0).is_err());
        assert_eq!(default_delta_grid().len(), 19);
    }

    #[test]
    fn robustness_is_clipped_inside_p2() {
        assert_eq!(robustness(&Behavior::uniform(), 0.5).unwrap(), 0.0);
        let r = robustness(&Behavior::usd(0.46).unwrap(), 0.46).unwrap();
        assert!((r - 0.04).abs() < 0.005, "{r}");
    }

    #[test]
    fn symmetric_angles_reproduce_family() {
        let phi = -0.8;
        let a = Povm::extremal_from_angles(symmetric_angles(phi)).unwrap();
        let s = symmetric_povm(phi).unwrap();
        for b in 0..3 {
            let d = a.element(b) - s.element(b);
            assert!(d.a0.abs() < 1e-12 && d.bloch_norm() < 1e-12);
        }
    }

    #[test]
    fn csv_layout() {
        let s = usd_bounds_sweep(&[0.0, 0.5]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# parameter: delta"));
        let header = lines.iter().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(*header, "parameter,metric,delta,tol,p_succ2");
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
    }
}
