//! End-to-end oracle suite.

use crate::commands::*;
use crate::config::{CliResult, DiskSpec, FamilySpec};
use crate::report::{Check, Report};
use serde_json::{json, Map, Value};

/// Sections every validation run must produce.
pub const MANIFEST: &[&str] = &[
    "ke",
    "wp",
    "curvature_geometric",
    "curvature_spectral",
    "finsler",
    "schwarz_extremal",
    "schwarz_vanishing",
];

pub const SPECTRAL_MODELS: u64 = 200;
pub const FINSLER_TRIALS: usize = 10_000;

/// The five family points: the centre of a 7×7 grid and the four
/// diagonal neighbours.
pub const WP_POINTS: [GridPoint; 5] =
    [GridPoint::Center, GridPoint::At(2, 2), GridPoint::At(4, 2), GridPoint::At(2, 4), GridPoint::At(4, 4)];

pub fn validate(level: usize, seed: u64, threads: usize) -> CliResult<Outcome> {
    let mut out = Outcome { report: Report::new("validate", json!({ "level": level, "seed": seed })), tables: Vec::new() };
    let mut results = Map::new();
    let mut run = |name: &str, o: CliResult<Outcome>, out: &mut Outcome| -> CliResult<()> {
        let r = out.absorb(name, o?);
        results.insert(name.to_string(), r);
        Ok(())
    };

    run("ke", ke_solve(&format!("fixture:{level}"), 1e-10, 20, 0.5), &mut out)?;
    let wp_spec = FamilySpec { half: 3, ..FamilySpec::at_level(level) };
    run("wp", wp(&wp_spec, None, &WP_POINTS, threads), &mut out)?;
    run("curvature_geometric", curvature_geometric(&FamilySpec::at_level(level), None, seed, threads, None), &mut out)?;
    run("curvature_spectral", curvature_spectral(SpectralInput::Random { count: SPECTRAL_MODELS, seed }, seed), &mut out)?;
    let mut cases = Outcome { report: Report::new("finsler", Value::Null), tables: Vec::new() };
    for n in 1..=5 {
        for c in [0.01, 0.1, 1.0] {
            cases.absorb(&format!("n{n}_c{c}"), finsler(n, c, FINSLER_TRIALS, seed)?);
        }
    }
    run("finsler", Ok(cases), &mut out)?;
    let extremal = DiskSpec::Poincare { a: 1.0, nr: 200, n_theta: 200, r_max: 0.99 };
    run("schwarz_extremal", schwarz(&extremal, None), &mut out)?;
    let vanishing = DiskSpec::Vanishing { a: 1.0, order: 1, nr: 200, n_theta: 128, r_max: 0.9 };
    run("schwarz_vanishing", schwarz(&vanishing, None), &mut out)?;

    let missing: Vec<&str> = MANIFEST
        .iter()
        .copied()
        .filter(|s| !out.report.checks.iter().any(|c| c.name.starts_with(&format!("{s}."))))
        .collect();
    out.report.check(Check::holds("manifest.complete", missing.is_empty(), "every listed section ran"));
    results.insert("manifest".into(), json!({ "sections": MANIFEST, "missing": missing }));
    out.report.results = Value::Object(results);
    Ok(out)
}
