use std::f64::consts::PI;
use std::sync::OnceLock;
use wplab::family::*;
use wplab::fixtures::hyperbolic_fixture;
use wplab::surface::*;
use wplab::{Error, C64};

const LEVEL: usize = 3;
const SEAM: usize = 5;

fn family() -> &'static (Family, SchifferSeam) {
    static FAM: OnceLock<(Family, SchifferSeam)> = OnceLock::new();
    FAM.get_or_init(|| schiffer_family(2, LEVEL, SEAM, C64::new(0.0, 0.0), 1e-3, 2, 1e-12, 1).unwrap())
}

fn ops_at(fam: &Family, k: usize) -> Operators<'_> {
    Operators::new(&fam.fibers[k], &fam.metrics[k]).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Reproducing-kernel value: the regluing at a point `p` pairs with a
/// quadratic differential `q` to `2π q(p)`, so its harmonic
/// representative has squared norm `4π² Σ |σ_i(p)|²` for any orthonormal
/// basis `σ_i` of quadratic differentials.
#[test]
fn wp_norm_matches_the_bergman_kernel() {
    let (fam, seam) = family();
    let at = fam.center_index();
    let lift = horizontal_lift(fam, at, C64::new(1.0, 0.0)).unwrap();
    let ks = ks_form(fam, &lift).unwrap();
    let sections = ops_at(fam, at).harmonic_sections(2, HARMONIC_PROBE).unwrap();
    let kernel: f64 = sections.basis.iter().map(|s| s[seam.center].norm_sqr()).sum();
    let oracle = 4.0 * PI * PI * kernel;
    assert!(rel(wp_norm(&ks), oracle) < 0.02, "{} vs {oracle}", wp_norm(&ks));
}

#[test]
fn both_representatives_define_the_same_class() {
    let (fam, _) = family();
    let lift = horizontal_lift(fam, fam.center_index(), C64::new(1.0, 0.0)).unwrap();
    let a = ks_form(fam, &lift).unwrap();
    let b = ks_from_trivialization(fam, &lift).unwrap();
    let scale = a.harmonic.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let diff = a.harmonic.iter().zip(&b.harmonic).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(diff < 1e-8 * scale, "{diff}");
    for k in [&a, &b] {
        assert!(k.norm_sq >= k.harmonic_norm_sq);
        assert!(k.harmonic_defect > 0.0 && k.harmonic_defect < 1.0);
        assert_eq!(k.symmetry_residual, 0.0);
        // lowering the index with G
        assert!(k.lowered.iter().zip(&k.coeffs).all(|(l, c)| l.norm() >= 0.0 && (l.norm() == 0.0) == (c.norm() == 0.0)));
    }
}

#[test]
fn lift_is_complex_linear_in_the_direction() {
    let (fam, _) = family();
    let at = fam.center_index();
    let one = horizontal_lift(fam, at, C64::new(1.0, 0.0)).unwrap();
    let lam = C64::new(0.0, 2.0);
    let two = horizontal_lift(fam, at, lam).unwrap();
    for v in 0..one.psi.len() {
        assert!((two.psi[v] - lam * one.psi[v]).norm() <= 1e-12 * (1.0 + one.psi[v].norm()));
        assert!((two.g_ss[v] - 4.0 * one.g_ss[v]).abs() <= 1e-12 * (1.0 + one.g_ss[v].abs()));
        assert!((two.lift_vertex[v] - lam * one.lift_vertex[v]).norm() <= 1e-12 * (1.0 + one.lift_vertex[v].norm()));
    }
    let w1 = wp_norm(&ks_form(fam, &one).unwrap());
    let w2 = wp_norm(&ks_form(fam, &two).unwrap());
    assert!(rel(w2, 4.0 * w1) < 1e-10);
}

#[test]
fn analytic_corner_motion_matches_the_grid() {
    let (fam, seam) = family();
    let fx = hyperbolic_fixture(2, LEVEL).unwrap();
    let at = fam.center_index();
    let lift = horizontal_lift(fam, at, C64::new(1.0, 0.0)).unwrap();
    let exact = seam.motion(&fx, fam.parameter(fam.n_re / 2, fam.n_im / 2));
    let moving = exact.iter().flatten().filter(|d| d.norm() > 0.0).count();
    assert!(moving > 0);
    for (a, b) in exact.iter().zip(&lift.motion) {
        for c in 0..3 {
            assert!((a[c] - b[c]).norm() < 1e-5, "{} vs {}", a[c], b[c]);
        }
    }
}

#[test]
fn phi_routes() {
    let (fam, _) = family();
    let at = fam.center_index();
    let lift = horizontal_lift(fam, at, C64::new(1.0, 0.0)).unwrap();
    let ks = ks_form(fam, &lift).unwrap();
    let pde = phi_field_pde(fam, at, &ks).unwrap();
    assert!(pde.positive && pde.min > 0.0);
    // integrating (1 + □)φ = |A|² against 1 gives ∫φ = ‖A‖²
    let total = wp_via_fiber_integral(fam, at, &pde).unwrap();
    assert!(rel(total, wp_norm(&ks)) < 1e-10);
    let direct = phi_field_direct(fam, &lift).unwrap();
    assert!(direct.determinant_residual.unwrap() < 1e-12);
    // the finite-difference route converges slowly; at this level it is
    // within 20 percent
    let total = wp_via_fiber_integral(fam, at, &direct).unwrap();
    assert!(rel(total, wp_norm(&ks)) < 0.2, "{total} vs {}", wp_norm(&ks));
}

#[test]
fn serre_pairing_is_holomorphic_and_evaluates_at_the_seam_centre() {
    let (fam, seam) = family();
    let fx = hyperbolic_fixture(2, LEVEL).unwrap();
    let at = fam.center_index();
    let nv = fam.fibers[0].nv();
    let anchors = [nv / 5, 2 * nv / 5, 3 * nv / 5];
    let (mut psi, mut chi, mut harmonic) = (Vec::new(), Vec::new(), Vec::new());
    let mut q_centre = C64::default();
    for k in 0..fam.fibers.len() {
        let s = fam.parameter(k % fam.n_re, k / fam.n_re);
        let ops = ops_at(fam, k);
        let q = normalized_frame(&ops.harmonic_sections(2, HARMONIC_PROBE).unwrap(), &anchors).unwrap();
        for (j, &a) in anchors.iter().enumerate() {
            assert!((q[0][a] - if j == 0 { 1.0 } else { 0.0 }).norm() < 1e-10);
        }
        let b = trivialization_ks(&fam.fibers[k], &seam.motion(&fx, s));
        if k == at {
            q_centre = q[0][seam.center];
            harmonic = ops.harmonic_forms(-1, HARMONIC_PROBE).unwrap().project(&b);
        }
        psi.push(q[0].clone());
        chi.push(b);
    }
    let p = serre_pairing(fam, at, 2, &psi, &chi).unwrap();
    assert!((p.values[at] - 2.0 * PI * q_centre).norm() < 0.02 * p.values[at].norm(), "{} vs {}", p.values[at], q_centre);
    assert!(p.relative_dbar_s < 0.1, "{}", p.relative_dbar_s);
    // exact forms pair to zero with holomorphic sections, up to the
    // discretization error of the discrete sections
    let mut chi_h = chi.clone();
    chi_h[at] = harmonic;
    let ph = serre_pairing(fam, at, 2, &psi, &chi_h).unwrap();
    let gap = (ph.values[at] - p.values[at]).norm() / p.values[at].norm();
    assert!(gap < 1e-2, "{gap}");
}

#[test]
fn product_family_is_flat() {
    let f = hyperbolic_fixture(2, 2).unwrap().fiber;
    let ke = wplab::ke::solve_ke(&f, &Metric::poincare(&f).unwrap(), 1e-12, 20).unwrap();
    let fam = Family::new(C64::new(0.0, 0.0), 1e-3, 5, 5, vec![f.clone(); 25], vec![ke.metric.clone(); 25]).unwrap();
    let lift = horizontal_lift(&fam, 12, C64::new(1.0, 0.0)).unwrap();
    assert!(lift.psi.iter().all(|p| p.norm() < 1e-9));
    assert!(lift.g_ss.iter().all(|p| p.abs() < 1e-6));
    assert!(lift.motion.iter().flatten().all(|p| p.norm() < 1e-9));
    let ks = ks_form(&fam, &lift).unwrap();
    assert!(wp_norm(&ks) < 1e-12);
    let phi = phi_field_direct(&fam, &lift).unwrap();
    assert!(phi.values.iter().all(|p| p.abs() < 1e-6));
}

#[test]
fn grid_validation() {
    let f = hyperbolic_fixture(2, 1).unwrap().fiber;
    let m = Metric::poincare(&f).unwrap();
    let small = Family::new(C64::new(0.0, 0.0), 1e-3, 4, 5, vec![f.clone(); 20], vec![m.clone(); 20]);
    assert!(matches!(small, Err(Error::Stencil(_))));
    let count = Family::new(C64::new(0.0, 0.0), 1e-3, 5, 5, vec![f.clone(); 24], vec![m.clone(); 24]);
    assert!(matches!(count, Err(Error::Mismatch(_))));
    let spacing = Family::new(C64::new(0.0, 0.0), 0.0, 5, 5, vec![f.clone(); 25], vec![m.clone(); 25]);
    assert!(matches!(spacing, Err(Error::Invalid(_))));
    let other = hyperbolic_fixture(2, 2).unwrap().fiber;
    let mut fibers = vec![f.clone(); 25];
    fibers[3] = other.clone();
    let mut metrics = vec![m.clone(); 25];
    metrics[3] = Metric::poincare(&other).unwrap();
    assert!(matches!(Family::new(C64::new(0.0, 0.0), 1e-3, 5, 5, fibers, metrics), Err(Error::Topology(_))));
    let fam = Family::new(C64::new(0.0, 0.0), 1e-3, 5, 5, vec![f.clone(); 25], vec![m; 25]).unwrap();
    assert!(matches!(fam.interior(11), Err(Error::Stencil(_))));
    assert!(matches!(fam.interior(25), Err(Error::Invalid(_))));
    assert_eq!(fam.interior(12).unwrap(), (2, 2));
    let fx = hyperbolic_fixture(2, 2).unwrap();
    assert!(matches!(SchifferSeam::new(&fx, fx.ray_steps - 1), Err(Error::Invalid(_))));
    assert!(matches!(SchifferSeam::new(&fx, 0), Err(Error::Invalid(_))));
}
