use super::Outcome;
use crate::config::{CliResult, FamilySpec};
use crate::report::{Check, Cmp, Report, Table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::time::Instant;
use wplab::family::{horizontal_lift, ks_form, HARMONIC_PROBE};
use wplab::hodge::geometric::{boxdbox_check, cup, cup_bar, face_form, fd_hessian_oracle, wolpert_p1_bound};
use wplab::hodge::spectral::{random_harmonic, random_model, RandomModelSpec, SpectralModel};
use wplab::linalg::mdot;
use wplab::surface::{Bundle, FormField, Operators};
use wplab::C64;

/// Low modes compared in the Bochner-Kodaira check.
pub const BOX_MODES: usize = 12;

/// Noise floor of the gauge checks: eigenvector tolerance 1e-10 amplified
/// by the parameter differences (spacing 1e-3, second derivatives).
pub const GAUGE_TOL: f64 = 1e-4;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

/// Largest relative mismatch of `⟨A∪ψ, χ⟩ = ⟨ψ, Ā∪χ⟩` over random fields.
fn cup_adjointness(ops: &Operators, a: &[C64], trials: usize, seed: u64) -> CliResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for t in 0..trials {
        let k = 1 + (t % 3) as i32;
        let psi = FormField::new(0, 0, Bundle(k), random_vec(&mut rng, ops.nv()))?;
        let chi = FormField::new(0, 1, Bundle(k - 1), random_vec(&mut rng, ops.nf()))?;
        let lowered = cup(ops, a, &psi)?;
        let lhs = mdot(&ops.face_mass(lowered.holomorphic_weight(), 1), &lowered.coeffs, &chi.coeffs);
        let lifted = face_form(ops, &psi)?;
        let rhs = mdot(&ops.face_mass(lifted.holomorphic_weight(), 0), &lifted.coeffs, &cup_bar(ops, a, &chi)?.coeffs);
        worst = worst.max((lhs - rhs).norm() / rhs.norm());
    }
    Ok(worst)
}

fn complex_rows(m: &[Vec<C64>]) -> serde_json::Value {
    json!(m.iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

/// Curvature checks on the fiber at the centre of a Schiffer family.
/// `time_limit` adds a wall-clock check on the Hessian oracle; it is left
/// out of reports that must be reproducible byte for byte.
pub fn curvature_geometric(
    spec: &FamilySpec,
    input: Option<&[u8]>,
    seed: u64,
    threads: usize,
    time_limit: Option<f64>,
) -> CliResult<Outcome> {
    let mut report = Report::new(
        "curvature",
        json!({ "backend": "geometric", "family": spec, "seam_steps": spec.seam(), "seed": seed }),
    );
    if let Some(bytes) = input {
        report.input("family", bytes);
    }
    let start = Instant::now();
    let (fam, _) = spec.build(threads)?;
    let at = fam.center_index();
    let nv = fam.fibers[at].nv();
    let hessian = fd_hessian_oracle(&fam, at, &[nv / 5, 2 * nv / 5, 3 * nv / 5], HARMONIC_PROBE)?;
    let elapsed = start.elapsed().as_secs_f64();
    report.check(Check::new("hessian_vs_formula", hessian.relative_error, Cmp::AtMost, 5e-2, "finite-difference Chern curvature of the Gram matrix of f_*K²"));
    report.check(Check::new("normal_gauge_first_derivative", hessian.normal_gauge_first_derivative, Cmp::AtMost, GAUGE_TOL, "∂s of the Gram matrix after gauge normalization"));
    report.check(Check::new("normal_gauge_consistency", hessian.normal_gauge_consistency, Cmp::AtMost, GAUGE_TOL, "-∂s∂s̄H in normal gauge against the Chern form"));
    if let Some(limit) = time_limit {
        report.check(Check::new("hessian_seconds", elapsed, Cmp::Below, limit, "wall clock"));
    }

    let lift = horizontal_lift(&fam, at, C64::new(1.0, 0.0))?;
    let ks = ks_form(&fam, &lift)?;
    let ops = Operators::new(&fam.fibers[at], &fam.metrics[at])?;
    let wolpert = wolpert_p1_bound(&ops, &ks.harmonic)?;
    report.check(Check::new("wolpert_margin", wolpert.margin / wolpert.bound.abs(), Cmp::AtLeast, -1e-6, "R(A,Ā,A,Ā) <= -(2/vol)‖A‖⁴"));
    let adj = cup_adjointness(&ops, &ks.harmonic, 12, seed)?;
    report.check(Check::new("cup_adjointness", adj, Cmp::AtMost, 1e-10, "⟨A∪ψ, χ⟩ = ⟨ψ, Ā∪χ⟩ on random fields"));
    let mut boxes = Vec::new();
    for (p, q) in [(0, 0), (1, 0)] {
        let b = boxdbox_check(&ops, p, q, BOX_MODES)?;
        report.check(Check::new(&format!("bochner_kodaira_{p}{q}"), b.residual, Cmp::Below, 1e-2, "□_∂ - □_∂̄ - (1-p-q) on low modes"));
        boxes.push(b);
    }
    let mut terms = Table::new("hessian", &["k", "l", "fd_re", "fd_im", "formula_re", "formula_im", "term1_re", "term2_re"]);
    for k in 0..hessian.rank {
        for l in 0..hessian.rank {
            let (f, r) = (hessian.fd_curvature[k][l], hessian.formula[k][l]);
            terms.push(vec![k as f64, l as f64, f.re, f.im, r.re, r.im, hessian.term1[k][l].re, hessian.term2[k][l].re]);
        }
    }
    report.results = json!({
        "vertices": nv,
        "hessian": {
            "rank": hessian.rank,
            "relative_error": hessian.relative_error,
            "fd_curvature": complex_rows(&hessian.fd_curvature),
            "formula": complex_rows(&hessian.formula),
            "gram": complex_rows(&hessian.gram),
        },
        "wolpert": wolpert,
        "bochner_kodaira": boxes,
        "cup_adjointness": adj,
    });
    Ok(Outcome { report, tables: vec![terms] })
}

pub enum SpectralInput<'a> {
    File { name: &'a str, text: &'a str },
    Random { count: u64, seed: u64 },
}

/// Formula-level checks on spectral models: adjointness, the two lower
/// estimates and the sign of the term-3 remainder.
pub fn curvature_spectral(input: SpectralInput, seed: u64) -> CliResult<Outcome> {
    let config = match &input {
        SpectralInput::File { name, .. } => json!({ "backend": "spectral", "input": name, "seed": seed }),
        SpectralInput::Random { count, seed: s } => json!({ "backend": "spectral", "random_models": count, "model_seed": s, "seed": seed }),
    };
    let mut report = Report::new("curvature", config);
    let models: Vec<SpectralModel> = match input {
        SpectralInput::File { name, text } => {
            report.input(name, text.as_bytes());
            vec![SpectralModel::from_json(text, 0.0)?]
        }
        SpectralInput::Random { count, seed: s } => (0..count)
            .map(|i| SpectralModel::from_file(&random_model(s + i, &RandomModelSpec::default()), 0.0))
            .collect::<wplab::Result<_>>()?,
    };
    let (mut adj, mut twisted, mut lambda, mut remainder) = (0.0f64, f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut table = Table::new("models", &["model", "p", "total", "estimate_slack", "term3_remainder", "lambda_slack"]);
    for (i, m) in models.iter().enumerate() {
        adj = adj.max(m.cup.adjointness_residual()).max(m.wedge.adjointness_residual());
        for p in 0..=m.n {
            let s = seed.wrapping_mul(1_000_003).wrapping_add(i as u64 * 31 + p as u64);
            let r = m.curvature_twisted_hodge(p, &random_harmonic(&m.cup.spaces[p], s))?;
            let scale = 1.0 + r.term1.abs() + r.term2.abs() + r.term3.abs();
            twisted = twisted.min(r.estimate_slack / scale);
            remainder = remainder.min(r.term3_remainder / scale);
            let l = m.curvature_lambda_t(p, &random_harmonic(&m.wedge.spaces[p], s ^ 0x5bd1))?;
            let lscale = 1.0 + l.term1.abs() + l.term2.abs() + l.term3.abs();
            lambda = lambda.min(l.estimate_slack / lscale);
            table.push(vec![i as f64, p as f64, r.total, r.estimate_slack, r.term3_remainder, l.estimate_slack]);
        }
    }
    report.check(Check::new("adjointness", adj, Cmp::AtMost, 1e-12, "conjugate products against matrix adjoints"));
    report.check(Check::new("twisted_estimate_slack", twisted, Cmp::AtLeast, -1e-12, "R >= ‖H(A∪ψ)‖² - ‖H(Ā∪ψ)‖²"));
    report.check(Check::new("lambda_estimate_slack", lambda, Cmp::AtLeast, -1e-12, "R <= -‖H(A∧ν̄)‖² + ‖H(A∧ν)‖²"));
    report.check(Check::new("term3_remainder", remainder, Cmp::AtLeast, -1e-12, "term3 + ‖H(Ā∪ψ)‖² >= 0"));
    report.results = json!({
        "models": models.len(),
        "worst_adjointness": adj,
        "worst_twisted_slack": twisted,
        "worst_lambda_slack": lambda,
        "worst_term3_remainder": remainder,
    });
    Ok(Outcome { report, tables: vec![table] })
}
