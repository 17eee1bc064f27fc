use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use wplab::family::*;
use wplab::fixtures::hyperbolic_fixture;
use wplab::hodge::geometric::*;
use wplab::ke::solve_ke;
use wplab::linalg::{mdot, mnorm};
use wplab::surface::*;
use wplab::{Error, C64};

struct Setup {
    fiber: Fiber,
    metric: Metric,
}

fn setup(level: usize) -> Setup {
    let fiber = hyperbolic_fixture(2, level).unwrap().fiber;
    let metric = solve_ke(&fiber, &Metric::poincare(&fiber).unwrap(), 1e-12, 20).unwrap().metric;
    Setup { fiber, metric }
}

fn level2() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| setup(2))
}

fn random_vec(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn rel_err(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cup_products_are_adjoint(seed in 0u64..10_000, k in 1i32..4) {
        let s = level2();
        let ops = Operators::new(&s.fiber, &s.metric).unwrap();
        let a = random_vec(ops.nf(), seed);
        let psi = FormField::new(0, 0, Bundle(k), random_vec(ops.nv(), seed + 1)).unwrap();
        let chi = FormField::new(0, 1, Bundle(k - 1), random_vec(ops.nf(), seed + 2)).unwrap();
        let lowered = cup(&ops, &a, &psi).unwrap();
        let raised = cup_bar(&ops, &a, &chi).unwrap();
        let lhs = mdot(&ops.face_mass(lowered.holomorphic_weight(), 1), &lowered.coeffs, &chi.coeffs);
        let lifted = face_form(&ops, &psi).unwrap();
        let rhs = mdot(&ops.face_mass(lifted.holomorphic_weight(), 0), &lifted.coeffs, &raised.coeffs);
        prop_assert!(rel_err(lhs, rhs) < 1e-12);
    }

    #[test]
    fn wolpert_quantities_scale_quartically(seed in 0u64..10_000, re in 0.2f64..3.0, im in -2.0f64..2.0) {
        let s = level2();
        let ops = Operators::new(&s.fiber, &s.metric).unwrap();
        let a = random_vec(ops.nf(), seed);
        let lambda = C64::new(re, im);
        let scaled: Vec<C64> = a.iter().map(|x| x * lambda).collect();
        let b = wolpert_p1_bound(&ops, &a).unwrap();
        let bs = wolpert_p1_bound(&ops, &scaled).unwrap();
        let f = lambda.norm_sqr().powi(2);
        prop_assert!((bs.bound - f * b.bound).abs() <= 1e-10 * bs.bound.abs());
        prop_assert!((bs.curvature - f * b.curvature).abs() <= 1e-8 * bs.curvature.abs());
        prop_assert!(b.margin >= -1e-6 * b.bound.abs(), "margin {}", b.margin);
    }
}

#[test]
fn zero_deformation_gives_zero_curvature() {
    let s = level2();
    let ops = Operators::new(&s.fiber, &s.metric).unwrap();
    let zero = vec![C64::new(0.0, 0.0); ops.nf()];
    let sections = ops.harmonic_sections(2, HARMONIC_PROBE).unwrap();
    let psi: Vec<FormField> =
        sections.basis.iter().map(|q| FormField::new(0, 0, Bundle(2), q.clone()).unwrap()).collect();
    let t = twisted_hodge_matrices(&ops, &zero, &psi).unwrap();
    assert!(t.total().iter().flatten().all(|z| z.norm() == 0.0));
    let w = wolpert_p1_bound(&ops, &zero).unwrap();
    assert_eq!((w.bound, w.curvature), (0.0, 0.0));
}

#[test]
fn green_operators_invert_the_shifted_laplacians() {
    let s = level2();
    let ops = Operators::new(&s.fiber, &s.metric).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f: Vec<f64> = (0..ops.nf()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let u = green_plus_function(&ops, &f).unwrap();
    // nodal form (S + M) u = M b, b the mass-weighted dual-cell average of f
    let fm = ops.face_mass(0, 0);
    let (mut num, mut den) = (vec![0.0; ops.nv()], vec![0.0; ops.nv()]);
    for (fi, face) in s.fiber.faces.iter().enumerate() {
        let d = face.dual_areas();
        for c in 0..3 {
            let w = fm[fi] * d[c] / face.area();
            num[face.v[c]] += w * f[fi];
            den[face.v[c]] += w;
        }
    }
    let uc: Vec<C64> = u.iter().map(|x| C64::new(*x, 0.0)).collect();
    let su = ops.stiffness_dbar(0).mul_vec(&uc);
    let m = ops.vertex_mass(0);
    let load: Vec<f64> = (0..ops.nv()).map(|v| m[v] * num[v] / den[v]).collect();
    let scale = load.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for v in 0..ops.nv() {
        assert!((su[v].re + m[v] * u[v] - load[v]).abs() < 1e-9 * scale, "vertex {v}");
    }
    let constant = green_plus_function(&ops, &vec![2.5; ops.nf()]).unwrap();
    assert!(constant.iter().all(|x| (x - 2.5).abs() < 1e-9));

    let form = FormField::new(0, 1, Bundle(1), random_vec(ops.nf(), 9)).unwrap();
    let w = green_plus_form(&ops, &form).unwrap();
    let back = ops.box_face(1).mul_vec(&w.coeffs);
    let mass = ops.face_mass(1, 1);
    let diff: Vec<C64> = back.iter().zip(&w.coeffs).zip(&form.coeffs).map(|((b, w), u)| b + w - u).collect();
    assert!(mnorm(&mass, &diff) < 1e-9 * mnorm(&mass, &form.coeffs));
}

#[test]
fn wolpert_constant_follows_the_volume() {
    let s = level2();
    let ops = Operators::new(&s.fiber, &s.metric).unwrap();
    let doubled_metric = s.metric.scaled(2.0);
    let doubled = Operators::new(&s.fiber, &doubled_metric).unwrap();
    let a = random_vec(ops.nf(), 3);
    let b = wolpert_p1_bound(&ops, &a).unwrap();
    let d = wolpert_p1_bound(&doubled, &a).unwrap();
    assert!((d.volume / b.volume - 2.0).abs() < 1e-12);
    assert!((d.c / b.c - 0.5).abs() < 1e-12);
}

#[test]
fn harmonic_kodaira_spencer_class_obeys_the_wolpert_bound() {
    let fam_fiber = hyperbolic_fixture(2, 2).unwrap().fiber;
    let ops_metric = level2();
    let ops = Operators::new(&fam_fiber, &ops_metric.metric).unwrap();
    for form in ops.harmonic_forms(-1, 8).unwrap().basis {
        let w = wolpert_p1_bound(&ops, &form).unwrap();
        assert!(w.curvature < 0.0 && w.margin >= -1e-6 * w.bound.abs(), "{w:?}");
        assert!(w.estimate >= w.curvature - 1e-9 * w.curvature.abs());
    }
}

#[test]
fn twisted_hodge_terms_satisfy_the_structural_inequalities() {
    let s = level2();
    let ops = Operators::new(&s.fiber, &s.metric).unwrap();
    let a = ops.harmonic_forms(-1, 8).unwrap().basis[0].clone();
    let quadratic = ops.harmonic_sections(2, HARMONIC_PROBE).unwrap();
    for q in &quadratic.basis {
        let psi = FormField::new(0, 0, Bundle(2), q.clone()).unwrap();
        let r = curvature_twisted_hodge(&ops, &a, &psi, HARMONIC_PROBE).unwrap();
        assert!(r.term1 > 0.0 && r.term2 >= 0.0 && r.term3 == 0.0);
        assert!(r.total >= r.harmonic_lowered - r.harmonic_raised - 1e-9 * r.total);
    }
    // The discrete kernel of □ on K² sits at small eigenvalues λ_h > 0, each
    // contributing -|c|²/(1 - λ_h) to term 3 instead of -|c|².
    let lambda_h = quadratic.eigenvalues[..quadratic.basis.len()].iter().cloned().fold(0.0, f64::max);
    let slack = lambda_h / (1.0 - lambda_h);
    let k_forms = ops.harmonic_forms(1, 8).unwrap();
    for chi in &k_forms.basis {
        let psi = FormField::new(0, 1, Bundle(1), chi.clone()).unwrap();
        let r = curvature_twisted_hodge(&ops, &a, &psi, HARMONIC_PROBE).unwrap();
        assert!(r.term2 == 0.0 && r.term3 < 0.0);
        assert!(r.term3_remainder >= -slack * r.harmonic_raised, "{r:?}");
    }
}

#[test]
fn bochner_kodaira_shift_converges() {
    let residual = |level: usize, p: usize| {
        let s = setup(level);
        let ops = Operators::new(&s.fiber, &s.metric).unwrap();
        boxdbox_check(&ops, p, 0, 12).unwrap().residual
    };
    let r00 = [residual(2, 0), residual(3, 0)];
    assert!(r00[1] < 1e-2 && r00[1] < r00[0] / 3.0, "{r00:?}");
    let r10 = [residual(2, 1), residual(3, 1)];
    assert!(r10[1] < r10[0] / 3.0, "{r10:?}");
    let ops = Operators::new(&level2().fiber, &level2().metric).unwrap();
    assert!(matches!(boxdbox_check(&ops, 0, 1, 12), Err(Error::Bidegree(_))));
}

#[test]
fn curvature_hessian_is_hermitian_and_gauge_consistent() {
    let (fam, _) = schiffer_family(2, 3, 5, C64::new(0.0, 0.0), 1e-3, 2, 1e-12, 1).unwrap();
    let nv = fam.fibers[0].nv();
    let r = fd_hessian_oracle(&fam, fam.center_index(), &[nv / 5, 2 * nv / 5, 3 * nv / 5], HARMONIC_PROBE).unwrap();
    assert_eq!(r.rank, 3);
    for i in 0..3 {
        assert!(r.fd_curvature[i][i].re > 0.0 && r.formula[i][i].re > 0.0);
        for j in 0..3 {
            assert!((r.formula[i][j] - r.formula[j][i].conj()).norm() < 1e-9);
            assert!((r.fd_curvature[i][j] - r.fd_curvature[j][i].conj()).norm() < 1e-6);
        }
    }
    assert!(r.normal_gauge_first_derivative < 1e-6 && r.normal_gauge_consistency < 1e-6, "{r:?}");
    // first-order discretization error; the level-3 value is a regression bound
    assert!(r.relative_error < 1.0, "{}", r.relative_error);
}
