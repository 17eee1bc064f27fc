use super::Outcome;
use crate::config::{read_input, CliError, CliResult, FamilySpec};
use crate::report::{Check, Cmp, Report, Table};
use serde_json::json;
use std::f64::consts::PI;
use std::path::Path;
use wplab::family::*;
use wplab::fixtures::hyperbolic_fixture;
use wplab::ke::solve_ke;
use wplab::surface::{load_fiber, Fiber, Metric, Operators};
use wplab::C64;

/// Seed metric: the Poincaré density (or a flat one when the home chart
/// leaves the disk) multiplied by a smooth bump of amplitude `perturb`.
fn bump_seed(fiber: &Fiber, perturb: f64) -> CliResult<Metric> {
    let base = Metric::poincare(fiber).or_else(|_| Metric::new(fiber, vec![1.0; fiber.nv()]))?;
    let centre = C64::new(0.2, 0.1);
    let g = fiber
        .home
        .iter()
        .zip(&base.g)
        .map(|(z, g)| g * (perturb * (-(*z - centre).norm_sqr() / 0.05).exp()).exp())
        .collect();
    Ok(Metric::new(fiber, g)?)
}

/// `fixture:<level>` selects the built-in genus-2 surface.
fn load_mesh(mesh: &str, report: &mut Report) -> CliResult<Fiber> {
    if let Some(level) = mesh.strip_prefix("fixture:") {
        let level = level.parse().map_err(|_| CliError::Config(format!("bad fixture level in {mesh:?}")))?;
        return Ok(hyperbolic_fixture(2, level)?.fiber);
    }
    let path = Path::new(mesh);
    let bytes = read_input(path)?;
    report.input(mesh, &bytes);
    Ok(load_fiber(path)?)
}

pub fn ke_solve(mesh: &str, tol: f64, max_iter: usize, perturb: f64) -> CliResult<Outcome> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(CliError::Config("--tol must be positive and --max-iter at least 1".into()));
    }
    let mut report = Report::new(
        "ke-solve",
        json!({ "mesh": mesh, "tol": tol, "max_iter": max_iter, "perturb": perturb }),
    );
    let fiber = load_mesh(mesh, &mut report)?;
    let seed = bump_seed(&fiber, perturb)?;
    let ke = solve_ke(&fiber, &seed, tol, max_iter)?;
    let order = ke.convergence_order();
    report.check(Check::new("residual", ke.residual, Cmp::Below, tol, "sup-norm residual of the weak Einstein equation"));
    if let Some(order) = order {
        report.check(Check::new("order", order, Cmp::AtLeast, 1.8, "ratio of successive log residuals"));
    }
    let volume_err = (ke.volume - ke.target_volume).abs() / ke.target_volume;
    report.check(Check::new("volume", volume_err, Cmp::AtMost, 1e-6, "Gauss-Bonnet volume 4π(g-1)"));
    let newton = ke.history.iter().filter_map(|h| h.newton_matrix_error).fold(0.0, f64::max);
    report.check(Check::new("newton_matrix", newton, Cmp::AtMost, 1e-12, "independent assembly of M(□+1)"));
    let mut history = Table::new("history", &["iteration", "residual", "step"]);
    for h in &ke.history {
        history.push(vec![h.iteration as f64, h.residual, h.step]);
    }
    report.results = json!({
        "vertices": fiber.nv(),
        "faces": fiber.nf(),
        "genus": fiber.genus,
        "mesh_size": fiber.mesh_size(),
        "newton_steps": ke.newton_steps,
        "residual": ke.residual,
        "order": order,
        "volume": ke.volume,
        "target_volume": ke.target_volume,
        "history": ke.history,
    });
    Ok(Outcome { report, tables: vec![history] })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridPoint {
    Center,
    At(usize, usize),
}

impl std::str::FromStr for GridPoint {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "center" {
            return Ok(GridPoint::Center);
        }
        let (i, j) = s.split_once(',').ok_or_else(|| format!("expected `center` or `i,j`, got {s:?}"))?;
        let parse = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("bad grid index in {s:?}"));
        Ok(GridPoint::At(parse(i)?, parse(j)?))
    }
}

fn weighted_rel_diff(m: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = m.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * (x - y).powi(2)).sum();
    let den: f64 = m.iter().zip(a).map(|(w, x)| w * x * x).sum();
    (num / den).sqrt()
}

pub fn wp(spec: &FamilySpec, input: Option<&[u8]>, at: &[GridPoint], threads: usize) -> CliResult<Outcome> {
    let points: Vec<String> = at
        .iter()
        .map(|p| match p {
            GridPoint::Center => "center".to_string(),
            GridPoint::At(i, j) => format!("{i},{j}"),
        })
        .collect();
    let mut report = Report::new("wp", json!({ "family": spec, "seam_steps": spec.seam(), "at": points }));
    if let Some(bytes) = input {
        report.input("family", bytes);
    }
    let (fam, seam) = spec.build(threads)?;
    let mut table = Table::new(
        "points",
        &["i", "j", "s_re", "s_im", "wp_harmonic", "wp_fiber", "phi_min_direct", "phi_min_pde", "phi_route_diff", "harmonicity"],
    );
    let mut results = Vec::new();
    for p in at {
        let (i, j) = match *p {
            GridPoint::Center => (fam.n_re / 2, fam.n_im / 2),
            GridPoint::At(i, j) => (i, j),
        };
        if i >= fam.n_re || j >= fam.n_im {
            return Err(CliError::Config(format!("grid point {i},{j} outside the {}×{} family", fam.n_re, fam.n_im)));
        }
        let k = fam.index(i, j);
        fam.interior(k)?;
        let lift = horizontal_lift(&fam, k, C64::new(1.0, 0.0))?;
        let ks = ks_form(&fam, &lift)?;
        let direct = phi_field_direct(&fam, &lift)?;
        let pde = phi_field_pde(&fam, k, &ks)?;
        let wp_h = wp_norm(&ks);
        let wp_fiber = wp_via_fiber_integral(&fam, k, &direct)?;
        let ops = Operators::new(&fam.fibers[k], &fam.metrics[k])?;
        let route_diff = weighted_rel_diff(&ops.vertex_mass(0), &pde.values, &direct.values);
        let tag = format!("s{i}_{j}");
        let name = |n: &str| format!("{tag}.{n}");
        report.check(Check::new(&name("harmonicity"), ks.harmonicity_residual, Cmp::Below, 1e-3, "‖∂̄*A‖/‖A‖ of the lifted Kodaira-Spencer form"));
        report.check(Check::new(&name("symmetry"), ks.symmetry_residual, Cmp::Below, 1e-3, "antisymmetric part of the lowered form"));
        report.check(Check::new(&name("wp_two_routes"), (wp_h - wp_fiber).abs() / wp_h, Cmp::AtMost, 1e-3, "fiber integral of the direct φ"));
        report.check(Check::holds(&name("phi_direct_positive"), direct.positive, "φ at every vertex, direct route"));
        report.check(Check::holds(&name("phi_pde_positive"), pde.positive, "φ at every vertex, (1+□)φ = |A|² route"));
        report.check(Check::new(&name("phi_routes"), route_diff, Cmp::AtMost, 2e-3, "(1+□)φ = |A|² against the direct finite-difference φ"));
        let s = fam.parameter(i, j);
        let mut bergman = None;
        if s.norm() == 0.0 {
            // Schiffer variation at the seam centre: 4π² Σ|σ_i(p)|²
            let sections = ops.harmonic_sections(2, HARMONIC_PROBE)?;
            let kernel: f64 = sections.basis.iter().map(|q| q[seam.center].norm_sqr()).sum();
            let value = 4.0 * PI * PI * kernel;
            report.check(Check::new(&name("wp_bergman"), (wp_h - value).abs() / value, Cmp::AtMost, 2e-2, "reproducing kernel of quadratic differentials"));
            bergman = Some(value);
        }
        table.push(vec![i as f64, j as f64, s.re, s.im, wp_h, wp_fiber, direct.min, pde.min, route_diff, ks.harmonicity_residual]);
        results.push(json!({
            "i": i, "j": j, "s": [s.re, s.im],
            "wp_harmonic": wp_h,
            "wp_fiber_integral": wp_fiber,
            "wp_bergman": bergman,
            "ks_norm_sq": ks.norm_sq,
            "harmonicity_residual": ks.harmonicity_residual,
            "harmonic_defect": ks.harmonic_defect,
            "symmetry_residual": ks.symmetry_residual,
            "phi_direct_min": direct.min,
            "phi_pde_min": pde.min,
            "phi_route_difference": route_diff,
            "determinant_residual": direct.determinant_residual,
        }));
    }
    report.results = json!({ "vertices": fam.fibers[0].nv(), "points": results });
    Ok(Outcome { report, tables: vec![table] })
}
