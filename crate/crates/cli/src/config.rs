use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use semidi_core::analysis::{grid_points, PovmFamily};
use semidi_core::qmat::{Behavior, JSON_ROW_TOLERANCE};
use semidi_core::sdp::SolverSettings;

use crate::error::{CliError, CliResult};

pub const TOL_ENV: &str = "SEMIDI_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Rob,
    Opt,
}

impl From<Family> for PovmFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Rob => PovmFamily::Rob,
            Family::Opt => PovmFamily::Opt,
        }
    }
}

/// Contents of a `--config` TOML file. Every key mirrors a flag.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub delta: Option<f64>,
    pub behavior: Option<PathBuf>,
    pub p0: Option<String>,
    pub tol: Option<f64>,
    pub grid: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub family: Option<Family>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::input(path, e.to_string().trim_end()))?;
        // Relative paths in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new(""));
        Ok(RunConfig {
            behavior: cfg.behavior.map(|p| base.join(p)),
            out: cfg.out.map(|p| base.join(p)),
            p0: cfg.p0.map(|s| if s == "uniform" { s } else { base.join(s).to_string_lossy().into_owned() }),
            ..cfg
        })
    }

    /// Fill unset fields of `self` from `lower`.
    pub fn or(self, lower: RunConfig) -> RunConfig {
        RunConfig {
            delta: self.delta.or(lower.delta),
            behavior: self.behavior.or(lower.behavior),
            p0: self.p0.or(lower.p0),
            tol: self.tol.or(lower.tol),
            grid: self.grid.or(lower.grid),
            out: self.out.or(lower.out),
            format: self.format.or(lower.format),
            family: self.family.or(lower.family),
        }
    }
}

/// Flags, config file and defaults merged, with every value validated.
#[derive(Debug, Clone)]
pub struct Settings {
    pub delta: Option<f64>,
    pub behavior: Option<PathBuf>,
    pub p0: P0,
    pub solver: SolverSettings,
    pub grid: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub family: Option<Family>,
}

#[derive(Debug, Clone)]
pub enum P0 {
    Uniform,
    File(PathBuf),
}

/// Solver tolerance when neither a flag nor the config sets one.
fn default_tol() -> CliResult<f64> {
    match std::env::var(TOL_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{TOL_ENV}={v:?} is not a number"))),
        Err(_) => Ok(SolverSettings::DEFAULT_TOL),
    }
}

pub fn resolve(merged: RunConfig) -> CliResult<Settings> {
    let tol = match merged.tol {
        Some(t) => t,
        None => default_tol()?,
    };
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(CliError::Usage(format!("tolerance {tol} must lie in (0, 1e-2]")));
    }
    if let Some(d) = merged.delta {
        if !(0.0..=1.0).contains(&d) {
            return Err(CliError::Usage(format!("delta {d} must lie in [0, 1]")));
        }
    }
    if let Some(b) = &merged.behavior {
        if !b.is_file() {
            return Err(CliError::input(b, "behavior file not found"));
        }
    }
    let p0 = match merged.p0.as_deref() {
        None | Some("uniform") => P0::Uniform,
        Some(path) => {
            let path = PathBuf::from(path);
            if !path.is_file() {
                return Err(CliError::input(&path, "p0 must be `uniform` or an existing behavior file"));
            }
            P0::File(path)
        }
    };
    let grid = merged.grid.as_deref().map(parse_grid).transpose()?;
    Ok(Settings {
        delta: merged.delta,
        behavior: merged.behavior,
        p0,
        solver: SolverSettings::with_tol(tol),
        grid,
        out: merged.out,
        format: merged.format,
        family: merged.family,
    })
}

/// `start:stop:step`, inclusive of `stop`.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Usage(format!("grid {spec:?} is not start:stop:step"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    let [start, stop, step] = parts[..] else { return Err(bad()) };
    grid_points(start, stop, step).map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct P0File {
    p: [[f64; 3]; 2],
    #[serde(default)]
    #[allow(dead_code)]
    delta: Option<f64>,
}

impl P0 {
    pub fn behavior(&self) -> CliResult<Behavior> {
        match self {
            P0::Uniform => Ok(Behavior::uniform()),
            P0::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
                let file: P0File = serde_json::from_str(&text)
                    .map_err(|e| CliError::input(path, format!("line {} column {}: {e}", e.line(), e.column())))?;
                Behavior::with_row_tolerance(file.p, JSON_ROW_TOLERANCE).map_err(|e| CliError::input(path, e))
            }
        }
    }
}
