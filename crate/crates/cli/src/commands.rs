use std::path::{Path, PathBuf};

use serde::Serialize;

use semidi_core::analysis::{
    default_delta_grid, grid_points, hmin_noise_curves, min_omega_sweep, optimal_phi_sweep, usd_bounds_sweep,
    usd_noise_tolerance, AnalysisOptions, SweepResult,
};
use semidi_core::boundary::{p2_region, p3_region, ConvexRegion2D};
use semidi_core::qmat::{
    make_preparation, mix_with_noise, simulate_behavior, symmetric_povm, Behavior, BehaviorFile, Povm,
};
use semidi_core::sdp::{
    dual_witness_with, guessing_probability_with, omega_star_with, verify_witness, CertificationResult, DualWitness,
    GuessingResult, Verdict, WitnessCheck, WitnessVerdict,
};
use semidi_core::usd::{
    ideal_usd_realization, usd_report, verify_selftest, xz_rotation, PhysicalRealization, SelfTestVerdict,
    UsdVerdict,
};
use semidi_core::Error as CoreError;

use crate::config::{Family, Format, Settings};
use crate::error::{CliError, CliResult, EXIT_INCONCLUSIVE};
use crate::io::{prepare_dir, read_behavior_file, write_atomic, write_json};

pub const FIG2_DELTAS: [f64; 4] = [0.0, 0.7, 0.9, 1.0];
pub const FIG7_DELTAS: [f64; 3] = [0.5, 0.7, 0.9];

fn need_delta(s: &Settings) -> CliResult<f64> {
    s.delta.ok_or_else(|| CliError::Usage("--delta is required".into()))
}

/// The behavior and its overlap. `--delta` overrides the file's value.
fn load_behavior(s: &Settings) -> CliResult<(Behavior, f64)> {
    let path = s.behavior.as_deref().ok_or_else(|| CliError::Usage("--behavior is required".into()))?;
    let file = read_behavior_file(path)?;
    let b = file.behavior().map_err(|e| CliError::input(path, e))?;
    Ok((b, s.delta.unwrap_or(file.delta)))
}

fn reports_only_json(s: &Settings, cmd: &str) -> CliResult<()> {
    match s.format {
        Some(Format::Csv) => Err(CliError::Usage(format!("{cmd} writes JSON reports; --format csv applies to tables"))),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn out_dir(s: &Settings) -> PathBuf {
    s.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn options(s: &Settings) -> AnalysisOptions {
    AnalysisOptions { solver: s.solver, ..AnalysisOptions::default() }
}

#[derive(Serialize)]
struct CertifyReport {
    delta: f64,
    /// Dual optimum `η* = 1/ω*`, when finite.
    eta: Option<f64>,
    certification: CertificationResult,
    witness: Option<DualWitness>,
}

pub fn certify(s: &Settings) -> CliResult<i32> {
    reports_only_json(s, "certify")?;
    let (b, delta) = load_behavior(s)?;
    let p0 = s.p0.behavior()?;
    if let Some(dir) = &s.out {
        prepare_dir(dir)?;
    }
    let cert = omega_star_with(&b, delta, &p0, &s.solver)?;
    let witness = if cert.verdict == Verdict::Genuine3Outcome && cert.status.is_solved() {
        match dual_witness_with(&b, delta, &p0, &s.solver) {
            Ok(w) => Some(w),
            Err(CoreError::Solver(_)) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let eta = cert.status.is_solved().then_some(cert.primal_value);
    let report = CertifyReport { delta, eta, certification: cert, witness };
    if let Some(dir) = &s.out {
        write_json(&dir.join("certification.json"), &report.certification)?;
        if let Some(w) = &report.witness {
            write_json(&dir.join("witness.json"), w)?;
        }
    }
    print_json(&report);
    Ok(match report.certification.verdict {
        Verdict::Genuine3Outcome => 0,
        Verdict::InP2 => 1,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

pub fn witness(s: &Settings, check: Option<&Path>) -> CliResult<i32> {
    reports_only_json(s, "witness")?;
    let (b, delta) = load_behavior(s)?;
    let p0 = s.p0.behavior()?;
    let result: WitnessCheck = match check {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
            let w = DualWitness::from_json(&text).map_err(|e| CliError::input(path, e))?;
            let c = verify_witness(&w, &b, delta, &p0).map_err(|e| CliError::input(path, e))?;
            print_json(&c);
            c
        }
        None => {
            if let Some(dir) = &s.out {
                prepare_dir(dir)?;
            }
            let w = dual_witness_with(&b, delta, &p0, &s.solver)?;
            let c = verify_witness(&w, &b, delta, &p0)?;
            if let Some(dir) = &s.out {
                write_json(&dir.join("witness.json"), &w)?;
            }
            #[derive(Serialize)]
            struct Out<'a> {
                check: &'a WitnessCheck,
                witness: &'a DualWitness,
            }
            print_json(&Out { check: &c, witness: &w });
            c
        }
    };
    Ok(if result.verdict == WitnessVerdict::Violated { 0 } else { 1 })
}

fn region_name(kind: &str, delta: f64, format: Format) -> String {
    let ext = if format == Format::Json { "json" } else { "csv" };
    format!("{kind}_region_delta_{delta}.{ext}")
}

fn write_region(path: &Path, region: &ConvexRegion2D, format: Format) -> CliResult<()> {
    match format {
        Format::Json => write_json(path, &region.vertices()),
        Format::Csv => {
            let mut buf = Vec::new();
            region.write_csv(&mut buf)?;
            write_atomic(path, &buf)
        }
    }
}

fn boundary_files(dir: &Path, delta: f64, format: Format) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (kind, region) in [("p2", p2_region(delta)?), ("p3", p3_region(delta)?)] {
        let path = dir.join(region_name(kind, delta, format));
        write_region(&path, &region, format)?;
        written.push(path);
    }
    Ok(written)
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

pub fn boundary(s: &Settings) -> CliResult<i32> {
    let delta = need_delta(s)?;
    let dir = out_dir(s);
    prepare_dir(&dir)?;
    announce(&boundary_files(&dir, delta, s.format.unwrap_or(Format::Csv))?);
    Ok(0)
}

pub fn usd(s: &Settings) -> CliResult<i32> {
    reports_only_json(s, "usd")?;
    let (b, delta) = match &s.behavior {
        Some(_) => load_behavior(s)?,
        None => {
            let d = need_delta(s)?;
            (Behavior::usd(d)?, d)
        }
    };
    let report = usd_report(&b, delta)?;
    print_json(&report);
    Ok(match report.verdict {
        UsdVerdict::Genuine3Outcome => 0,
        UsdVerdict::NotCertified => 1,
        UsdVerdict::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

pub fn selftest(s: &Settings, rotation: f64) -> CliResult<i32> {
    reports_only_json(s, "selftest")?;
    let delta = need_delta(s)?;
    let (prep, povm) = ideal_usd_realization(delta)?;
    let real = PhysicalRealization::from_model(&prep, &povm).conjugated(&xz_rotation(rotation));
    let report = verify_selftest(&real, delta)?;
    print_json(&report);
    Ok(match report.verdict {
        SelfTestVerdict::Pass => 0,
        SelfTestVerdict::Fail => 1,
        SelfTestVerdict::NotApplicable => EXIT_INCONCLUSIVE,
    })
}

fn write_table(dir: &Path, stem: &str, sweep: &SweepResult, format: Format) -> CliResult<PathBuf> {
    let path = match format {
        Format::Csv => dir.join(format!("{stem}.csv")),
        Format::Json => dir.join(format!("{stem}.json")),
    };
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            sweep.write_csv(&mut buf)?;
            write_atomic(&path, &buf)?;
        }
        Format::Json => write_json(&path, sweep)?,
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    /// Minimal ω* over the symmetric family per overlap.
    MinOmega,
    /// Most robust symmetric-family angle per overlap.
    PhiStar,
    /// White-noise tolerance of the USD behavior per overlap.
    UsdNoise,
    /// Three- and two-outcome USD success bounds per overlap.
    UsdBounds,
}

fn run_sweep(kind: SweepKind, grid: &[f64], opts: &AnalysisOptions) -> CliResult<(&'static str, SweepResult)> {
    Ok(match kind {
        SweepKind::MinOmega => ("min_omega", min_omega_sweep(grid, opts)?),
        SweepKind::PhiStar => ("phi_star", optimal_phi_sweep(grid, opts)?),
        SweepKind::UsdNoise => ("usd_noise", usd_noise_tolerance(grid, opts)?),
        SweepKind::UsdBounds => ("usd_bounds", usd_bounds_sweep(grid)?),
    })
}

pub fn sweep(s: &Settings, kind: SweepKind) -> CliResult<i32> {
    let dir = out_dir(s);
    prepare_dir(&dir)?;
    let grid = s.grid.clone().unwrap_or_else(default_delta_grid);
    let (stem, result) = run_sweep(kind, &grid, &options(s))?;
    announce(&[write_table(&dir, stem, &result, s.format.unwrap_or(Format::Csv))?]);
    Ok(0)
}

fn default_xi_grid() -> Vec<f64> {
    grid_points(0.0, 1.0, 0.05).expect("static grid")
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Rob => "rob",
        Family::Opt => "opt",
    }
}

pub fn randomness(s: &Settings) -> CliResult<i32> {
    if s.behavior.is_some() {
        reports_only_json(s, "randomness --behavior")?;
        let (b, delta) = load_behavior(s)?;
        let r: GuessingResult = guessing_probability_with(&b, delta, 0, &s.solver)?;
        print_json(&r);
        return Ok(0);
    }
    let delta = need_delta(s)?;
    let family = s.family.unwrap_or(Family::Rob);
    let dir = out_dir(s);
    prepare_dir(&dir)?;
    let grid = s.grid.clone().unwrap_or_else(default_xi_grid);
    let curve = hmin_noise_curves(delta, &grid, family.into(), &options(s))?;
    let stem = format!("hmin_{}_delta_{delta}", family_name(family));
    announce(&[write_table(&dir, &stem, &curve, s.format.unwrap_or(Format::Csv))?]);
    Ok(0)
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct SimulateArgs {
    /// Extremal POVM Bloch angles `a,b,c` in radians.
    #[arg(long, value_delimiter = ',', num_args = 3, conflicts_with_all = ["phi", "usd"])]
    pub angles: Option<Vec<f64>>,
    /// Symmetric-family angle in radians.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "usd")]
    pub phi: Option<f64>,
    /// Use the optimal unambiguous-discrimination measurement.
    #[arg(long)]
    pub usd: bool,
    /// White-noise weight mixed into the result.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

pub fn simulate(s: &Settings, args: &SimulateArgs) -> CliResult<i32> {
    reports_only_json(s, "simulate")?;
    let delta = need_delta(s)?;
    let povm = match (&args.angles, args.phi, args.usd) {
        (Some(a), _, _) => Povm::extremal_from_angles([a[0], a[1], a[2]])?,
        (None, Some(phi), _) => symmetric_povm(phi)?,
        (None, None, true) => ideal_usd_realization(delta)?.1,
        (None, None, false) => return Err(CliError::Usage("one of --angles, --phi or --usd is required".into())),
    };
    if !(0.0..=1.0).contains(&args.noise) {
        return Err(CliError::Usage(format!("noise weight {} must lie in [0, 1]", args.noise)));
    }
    if let Some(dir) = &s.out {
        prepare_dir(dir)?;
    }
    let b = simulate_behavior(&make_preparation(delta)?, &povm)?;
    let b = mix_with_noise(&b, args.noise, &Behavior::uniform())?;
    let file = BehaviorFile { p: *b.p(), delta };
    if let Some(dir) = &s.out {
        write_json(&dir.join("behavior.json"), &file)?;
    }
    print_json(&file);
    Ok(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig2,
    Fig5a,
    Fig5b,
    Fig6,
    Fig7,
}

pub fn reproduce(s: &Settings, figure: Figure) -> CliResult<i32> {
    let dir = out_dir(s);
    prepare_dir(&dir)?;
    let format = s.format.unwrap_or(Format::Csv);
    let opts = options(s);
    let fine = || grid_points(0.05, 0.99, 0.01).expect("static grid");
    let mut written = Vec::new();
    match figure {
        Figure::Fig2 => {
            for delta in FIG2_DELTAS {
                written.extend(boundary_files(&dir, delta, format)?);
            }
        }
        Figure::Fig5a => {
            let grid = s.grid.clone().unwrap_or_else(fine);
            written.push(write_table(&dir, "fig5a", &min_omega_sweep(&grid, &opts)?, format)?);
        }
        Figure::Fig5b => {
            let grid = s.grid.clone().unwrap_or_else(fine);
            written.push(write_table(&dir, "fig5b", &optimal_phi_sweep(&grid, &opts)?, format)?);
        }
        Figure::Fig6 => {
            let grid = s.grid.clone().unwrap_or_else(|| grid_points(0.0, 1.0, 0.01).expect("static grid"));
            written.push(write_table(&dir, "fig6", &usd_bounds_sweep(&grid)?, format)?);
        }
        Figure::Fig7 => {
            let deltas = s.delta.map(|d| vec![d]).unwrap_or_else(|| FIG7_DELTAS.to_vec());
            let grid = s.grid.clone().unwrap_or_else(default_xi_grid);
            for delta in deltas {
                for family in [Family::Rob, Family::Opt] {
                    let curve = hmin_noise_curves(delta, &grid, family.into(), &opts)?;
                    let stem = format!("fig7_{}_delta_{delta}", family_name(family));
                    written.push(write_table(&dir, &stem, &curve, format)?);
                }
            }
        }
    }
    announce(&written);
    Ok(0)
}
