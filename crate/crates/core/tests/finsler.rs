use proptest::prelude::*;
use wplab::finsler::*;

#[test]
fn selected_profiles_are_positive() {
    for n in 1..=5 {
        for c in [0.01, 0.1, 1.0] {
            let p = select_alphas(n, c, None).unwrap();
            assert!(p.certified(), "n={n} c={c} gammas {:?}", p.gammas);
            assert_eq!(p.alphas[0], 1.0);
            assert!(p.alphas.windows(2).all(|w| w[1] > w[0]));
            let rep = verify_certificate(&p, p.k_sharp, 20_000, 3);
            assert!(rep.pass, "{rep:?}");
        }
    }
}

/// Dense search over power-of-two grids: the chosen coefficients must be
/// admissible, and any admissible grid point must be at least as large
/// as the selected one in the first coordinate where they differ.
#[test]
fn brute_force_admissibility_n3() {
    let c = 0.1f64;
    let chosen = select_alphas(3, c, None).unwrap();
    let mut admissible = Vec::new();
    for i in 1..12 {
        for j in i + 1..24 {
            let a = vec![1.0, 2f64.powi(i), 2f64.powi(j)];
            let g = gammas(c, &a);
            if g.iter().all(|x| *x > 0.0) {
                admissible.push(a);
            }
        }
    }
    assert!(admissible.contains(&chosen.alphas));
    let meets_target = |a: &Vec<f64>| gammas(c, a)[0] >= c / 2.0;
    let smallest_a2 = admissible
        .iter()
        .filter(|a| meets_target(a))
        .map(|a| a[1])
        .fold(f64::INFINITY, f64::min);
    assert_eq!(chosen.alphas[1], smallest_a2);
}

#[test]
fn doubling_c_does_not_decrease_k() {
    let p = select_alphas(3, 0.1f64, None).unwrap();
    let q = FinslerProfile::from_alphas(0.2, p.alphas.clone()).unwrap();
    assert!(q.k_min_gamma >= p.k_min_gamma);
    assert!(q.k_sharp >= p.k_sharp);
}

#[test]
fn only_first_seminorm() {
    let p = select_alphas(3, 0.1f64, None).unwrap();
    let b = curvature_cascade(&p, &[2.0, 0.0, 0.0], None).unwrap();
    assert_eq!(b.k, 1);
    assert!((b.kp_bound + 0.1).abs() < 1e-14);
    assert!(curvature_cascade(&p, &[0.0, 0.0, 0.0], None).is_err());
}

#[test]
fn kp_estimates_reproduce_cascade() {
    let p = select_alphas(4, 0.1f64, None).unwrap();
    let g = [1.3, 0.7, 0.4, 0.2];
    let kp: Vec<f64> = (1..=4)
        .map(|q| {
            let prev = if q == 1 { 0.0 } else { g[q - 2] };
            let next = if q == 4 { 0.0 } else { g[q] };
            kp_estimate(prev, g[q - 1], next, q, p.c).unwrap()
        })
        .collect();
    let b = curvature_cascade(&p, &g, Some(&kp)).unwrap();
    assert!((b.convex_sum.unwrap() - b.kp_bound).abs() < 1e-12);
    assert!(b.kp_bound <= b.quadratic + 1e-12);
    assert!(b.quadratic <= b.certified + 1e-12);
}

#[test]
fn summed_inequality_randomized() {
    for n in 2..=5 {
        let p = select_alphas(n, 0.1f64, None).unwrap();
        let r = verify_secineq(&p.alphas, 100_000, 11).unwrap();
        assert!(r.pass, "{r:?}");
    }
    let r = verify_secineq(&[1.0, 3.0, 0.5, 7.0], 20_000, 5).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn scalar_inequality_grid() {
    let r = verify_firstineq::<f64>(20, 20_000).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.min_value.abs() < 1e-12);
}

/// Curvature `-(1/G) ∂∂̄ log G` of a hermitian metric on a disk, by a
/// five-point Laplacian (∂∂̄ = Δ/4).
fn fd_curvature(g: &dyn Fn(f64, f64) -> f64, x: f64, y: f64) -> f64 {
    let h = 1e-4;
    let l = |x: f64, y: f64| g(x, y).ln();
    let lap = (l(x + h, y) + l(x - h, y) + l(x, y + h) + l(x, y - h) - 4.0 * l(x, y)) / (h * h);
    -lap / 4.0 / g(x, y)
}

#[test]
fn convex_sum_lemma_on_explicit_metrics() {
    let metrics: Vec<Box<dyn Fn(f64, f64) -> f64>> = vec![
        Box::new(|x, y| 2.0 / (1.0 - x * x - y * y).powi(2)),
        Box::new(|x, y| (0.3 * x - 0.2 * y + 0.5 * (x * x + y * y)).exp()),
        Box::new(|x, y| 1.0 + x * x + 3.0 * y * y),
    ];
    for &(x, y) in &[(0.1, 0.2), (-0.3, 0.05), (0.4, -0.4)] {
        let gs: Vec<f64> = metrics.iter().map(|m| m(x, y)).collect();
        let ks: Vec<f64> = metrics.iter().map(|m| fd_curvature(m.as_ref(), x, y)).collect();
        let sum = |x: f64, y: f64| metrics.iter().map(|m| m(x, y)).sum::<f64>();
        let k_sum = fd_curvature(&sum, x, y);
        let bound = convex_sum_bound(&gs, &ks);
        assert!(k_sum <= bound + 1e-5, "{k_sum} > {bound}");
    }
}

proptest! {
    #[test]
    fn cascade_is_scale_invariant(g in prop::collection::vec(0.01f64..10.0, 3), lam in 0.1f64..10.0) {
        let p = select_alphas(3, 0.1f64, None).unwrap();
        let a = curvature_cascade(&p, &g, None).unwrap();
        let gs: Vec<f64> = g.iter().map(|x| x * lam).collect();
        let b = curvature_cascade(&p, &gs, None).unwrap();
        prop_assert!((a.kp_bound - b.kp_bound).abs() <= 1e-9 * a.kp_bound.abs().max(1.0));
        prop_assert!((a.quadratic - b.quadratic).abs() <= 1e-9 * a.quadratic.abs().max(1.0));
    }

    #[test]
    fn sharp_constant_holds(g in prop::collection::vec(0.0f64..10.0, 4)) {
        let p = select_alphas(4, 0.01f64, None).unwrap();
        let h = p.finsler_h(&g);
        prop_assume!(h > 1e-9);
        prop_assert!(p.quadratic_bound(&g) <= -p.k_sharp * h * h * (1.0 - 1e-12));
    }
}
