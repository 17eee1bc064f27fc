//! Run configuration: thread count, family and disk-metric specifications,
//! and the error classes that decide the exit status.

use serde::{Deserialize, Serialize};
use std::path::Path;
use wplab::family::{default_seam_steps, schiffer_family, Family, SchifferSeam};
use wplab::{DiskMetric64, C64};

pub const EXIT_VERDICT: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(String),
    /// A model or input violates a structural invariant.
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Invariant(_) => EXIT_VERDICT,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Invariant(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

impl From<wplab::Error> for CliError {
    fn from(e: wplab::Error) -> Self {
        use wplab::Error::*;
        match e {
            NoConvergence { .. } | Positivity(_) => CliError::Solver(e.to_string()),
            SpectrumGap { .. } | Invariant(_) | Degenerate(_) => CliError::Invariant(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Worker threads from `WPLAB_THREADS`, default 1.
pub fn threads() -> CliResult<usize> {
    match std::env::var("WPLAB_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Config(format!("WPLAB_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

pub fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

/// Genus-2 Schiffer family around a point of the base.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    #[serde(default = "default_genus")]
    pub genus: usize,
    pub level: usize,
    #[serde(default)]
    pub seam_steps: Option<usize>,
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_half")]
    pub half: usize,
    #[serde(default = "default_ke_tol")]
    pub ke_tol: f64,
}

fn default_genus() -> usize {
    2
}
fn default_spacing() -> f64 {
    1e-3
}
fn default_half() -> usize {
    2
}
fn default_ke_tol() -> f64 {
    1e-12
}

impl FamilySpec {
    pub fn at_level(level: usize) -> FamilySpec {
        FamilySpec {
            genus: 2,
            level,
            seam_steps: None,
            center: [0.0, 0.0],
            spacing: default_spacing(),
            half: default_half(),
            ke_tol: default_ke_tol(),
        }
    }

    pub fn seam(&self) -> usize {
        self.seam_steps.unwrap_or_else(|| default_seam_steps(self.level))
    }

    pub fn build(&self, threads: usize) -> CliResult<(Family, SchifferSeam)> {
        let center = C64::new(self.center[0], self.center[1]);
        Ok(schiffer_family(self.genus, self.level, self.seam(), center, self.spacing, self.half, self.ke_tol, threads)?)
    }
}

/// Density on the unit disk for the curvature comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiskSpec {
    /// `2 / (a (1 - |t|²)²)`, curvature exactly `a`.
    Poincare { a: f64, nr: usize, n_theta: usize, r_max: f64 },
    /// `|t|^{2k} · 2 / (a (1 - |t|²)²)`, a density whose rank drops at 0.
    Vanishing { a: f64, order: u32, nr: usize, n_theta: usize, r_max: f64 },
    Samples { metric: DiskMetric64 },
}

impl DiskSpec {
    pub fn build(&self) -> CliResult<DiskMetric64> {
        Ok(match self {
            DiskSpec::Poincare { a, nr, n_theta, r_max } => {
                let a = *a;
                DiskMetric64::from_fn(*nr, *n_theta, *r_max, move |x, y| 2.0 / (a * (1.0 - x * x - y * y).powi(2)))?
            }
            DiskSpec::Vanishing { a, order, nr, n_theta, r_max } => {
                let (a, k) = (*a, *order as i32);
                DiskMetric64::from_fn(*nr, *n_theta, *r_max, move |x, y| {
                    let r2 = x * x + y * y;
                    r2.powi(k) * 2.0 / (a * (1.0 - r2).powi(2))
                })?
            }
            DiskSpec::Samples { metric } => {
                metric.validate()?;
                metric.clone()
            }
        })
    }
}

/// Parses `name:value` shorthands or reads a JSON file.
pub fn family_arg(arg: &str) -> CliResult<(FamilySpec, Option<Vec<u8>>)> {
    if let Some(level) = arg.strip_prefix("schiffer:") {
        let level = level.parse().map_err(|_| CliError::Config(format!("bad family level in {arg:?}")))?;
        return Ok((FamilySpec::at_level(level), None));
    }
    let bytes = read_input(Path::new(arg))?;
    let spec = serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{arg}: {e}")))?;
    Ok((spec, Some(bytes)))
}

pub fn disk_arg(arg: &str) -> CliResult<(DiskSpec, Option<Vec<u8>>)> {
    let shorthand = |rest: &str, vanishing: bool| -> CliResult<DiskSpec> {
        let a: f64 = rest.parse().map_err(|_| CliError::Config(format!("bad curvature constant in {arg:?}")))?;
        let (nr, n_theta, r_max) = (200, 200, 0.99);
        Ok(if vanishing {
            DiskSpec::Vanishing { a, order: 1, nr, n_theta: 128, r_max: 0.9 }
        } else {
            DiskSpec::Poincare { a, nr, n_theta, r_max }
        })
    };
    if let Some(rest) = arg.strip_prefix("poincare:") {
        return Ok((shorthand(rest, false)?, None));
    }
    if let Some(rest) = arg.strip_prefix("vanishing:") {
        return Ok((shorthand(rest, true)?, None));
    }
    let bytes = read_input(Path::new(arg))?;
    let spec = serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{arg}: {e}")))?;
    Ok((spec, Some(bytes)))
}
