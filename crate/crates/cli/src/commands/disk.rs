use super::Outcome;
use crate::config::{CliError, CliResult, DiskSpec};
use crate::report::{Check, Cmp, Report, Table};
use serde_json::json;
use wplab::finsler::{select_alphas, verify_certificate, verify_firstineq, verify_secineq};
use wplab::schwarz::{curvature_constant, poincare_compare, subharmonic_extension};

/// Largest exponent `p` for the scalar inequality grid.
const FIRST_INEQ_P: u32 = 20;
const FIRST_INEQ_GRID: usize = 20_000;

pub fn finsler(n: usize, c: f64, trials: usize, seed: u64) -> CliResult<Outcome> {
    if n == 0 || !(c > 0.0) || trials == 0 {
        return Err(CliError::Config("finsler needs n >= 1, c > 0 and at least one trial".into()));
    }
    let mut report = Report::new("finsler", json!({ "n": n, "c": c, "trials": trials, "seed": seed }));
    let profile = select_alphas(n, c, None)?;
    let min_gamma = profile.gammas.iter().cloned().fold(f64::INFINITY, f64::min);
    report.check(Check::new("gammas_positive", min_gamma, Cmp::AtLeast, f64::MIN_POSITIVE, "γ_p from the selected α_p"));
    let literal = verify_certificate(&profile, profile.k_min_gamma, trials, seed);
    report.check(Check::new("certificate_min_gamma", literal.worst_excess, Cmp::AtMost, 1e-12, "-Σγ_p G_p² <= -K H² with K = min γ_p / n"));
    let sharp = verify_certificate(&profile, profile.k_sharp, trials, seed);
    report.check(Check::new("certificate_sharp", sharp.worst_excess, Cmp::AtMost, 1e-12, "-Σγ_p G_p² <= -K H² with the sharp K"));
    let first = verify_firstineq::<f64>(FIRST_INEQ_P, FIRST_INEQ_GRID)?;
    report.check(Check::new("scalar_inequality_min", first.min_value, Cmp::AtLeast, -1e-12, "grid minimum for p <= 20"));
    let second = verify_secineq(&profile.alphas, trials, seed)?;
    report.check(Check::new("summed_inequality_slack", second.min_relative_slack, Cmp::AtLeast, -1e-12, "random positive tuples and the equality probe"));
    let mut table = Table::new("profile", &["p", "alpha", "gamma"]);
    for p in 0..n {
        table.push(vec![(p + 1) as f64, profile.alphas[p], profile.gammas[p]]);
    }
    report.results = json!({
        "profile": profile,
        "certificate_min_gamma": literal,
        "certificate_sharp": sharp,
        "scalar_inequality": first,
        "summed_inequality": second,
    });
    Ok(Outcome { report, tables: vec![table] })
}

pub fn schwarz(spec: &DiskSpec, input: Option<&[u8]>) -> CliResult<Outcome> {
    let mut report = Report::new("schwarz", json!({ "metric": spec_summary(spec) }));
    if let Some(bytes) = input {
        report.input("metric", bytes);
    }
    let m = spec.build()?;
    let curv = curvature_constant(&m, 1e-6)?;
    report.check(Check::holds("curvature_positive", curv.positive, "mollified pointwise ∂∂̄ log γ₀ >= A γ₀"));
    let cmp = poincare_compare(&m, curv.a, 0.01)?;
    report.check(Check::new("poincare_bound", cmp.max_ratio, Cmp::AtMost, 1.01, "γ₀ <= 2 / (A (1 - |t|²)²)"));
    let mut extension = None;
    match spec {
        DiskSpec::Poincare { a, .. } => {
            report.check(Check::new("constant_recovered", (curv.a - a).abs() / a, Cmp::AtMost, 2e-2, "closed-form curvature of the extremal density"));
            report.check(Check::new("saturation", (cmp.max_ratio - 1.0).abs(), Cmp::AtMost, 1e-2, "extremal density meets the bound"));
        }
        DiskSpec::Vanishing { .. } | DiskSpec::Samples { .. } => {
            let (ext, rep) = subharmonic_extension(&m, None, 0.02, 24)?;
            report.check(Check::holds("extension_bounded", ext.center.is_some_and(f64::is_finite), "limsup extension across the centre"));
            report.check(Check::new("weak_current", rep.weak.min_relative, Cmp::AtLeast, -1e-8, "∫ log γ₀ Δφ/4 >= K ∫ γ₀ φ on bump test functions"));
            extension = Some(rep);
        }
    }
    let mut profile = Table::new("profile", &["r", "gamma0", "poincare_bound"]);
    for (i, r) in m.radii.iter().enumerate() {
        profile.push(vec![*r, m.at(i, 0), 2.0 / (curv.a * (1.0 - r * r).powi(2))]);
    }
    report.results = json!({ "curvature": curv, "comparison": cmp, "extension": extension });
    Ok(Outcome { report, tables: vec![profile] })
}

/// Configuration echo without the raw samples.
fn spec_summary(spec: &DiskSpec) -> serde_json::Value {
    match spec {
        DiskSpec::Samples { metric } => json!({ "kind": "samples", "nr": metric.nr(), "n_theta": metric.n_theta, "r_max": metric.r_max }),
        other => serde_json::to_value(other).unwrap_or_default(),
    }
}
