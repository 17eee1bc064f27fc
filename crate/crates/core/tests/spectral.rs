use nalgebra::DVector;
use wplab::hodge::spectral::*;
use wplab::hodge::Formula;
use wplab::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn rank_one(a: f64, alpha: C64, beta: C64, lambda: f64) -> ModelFile {
    let space = || SpaceFile {
        rank: 1,
        eigenvalues: vec![lambda],
        eigenvectors: vec![vec![c(1.0, 0.0)]],
    };
    let ladder = LadderFile {
        spaces: vec![space(), space(), space()],
        lower: vec![vec![vec![alpha]], vec![vec![beta]]],
        raise: vec![vec![vec![alpha.conj()]], vec![vec![beta.conj()]]],
    };
    ModelFile {
        n: 2,
        weights: vec![1.0],
        graph: vec![],
        a_norm_sq: vec![a],
        cup: ladder.clone(),
        wedge: ladder,
    }
}

#[test]
fn rank_one_closed_form() {
    let (alpha, beta, lam) = (c(0.5, -1.0), c(2.0, 0.3), 3.0);
    let m = SpectralModel::from_file(&rank_one(0.7, alpha, beta, lam), 0.0).unwrap();
    let psi = DVector::from_vec(vec![c(1.5, 0.5)]);
    let r = m.curvature_twisted_hodge(1, &psi).unwrap();
    let p2 = psi[0].norm_sqr();
    assert!((r.term1 - 0.7 * p2).abs() < 1e-14);
    assert!((r.term2 - alpha.norm_sqr() * p2 / (lam + 1.0)).abs() < 1e-14);
    assert!((r.term3 - beta.norm_sqr() * p2 / (lam - 1.0)).abs() < 1e-14);
    let l = m.curvature_lambda_t(1, &psi).unwrap();
    assert!((l.total + r.total).abs() < 1e-14);
}

#[test]
fn zero_direction_gives_zero() {
    let m = SpectralModel::from_file(&rank_one(0.0, c(0.0, 0.0), c(0.0, 0.0), 3.0), 0.0).unwrap();
    let psi = DVector::from_vec(vec![c(1.0, 2.0)]);
    let r = m.curvature_twisted_hodge(1, &psi).unwrap();
    assert_eq!((r.term1, r.term2, r.term3, r.total), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn gap_violation_is_rejected() {
    let f = rank_one(1.0, c(1.0, 0.0), c(1.0, 0.0), 0.5);
    assert!(SpectralModel::from_file(&f, 0.0).is_err());
}

#[test]
fn non_adjoint_conjugate_is_rejected() {
    let mut f = rank_one(1.0, c(1.0, 0.0), c(1.0, 0.0), 3.0);
    f.cup.raise[0][0][0] = c(1.0, 1e-6);
    assert!(SpectralModel::from_file(&f, 0.0).is_err());
}

#[test]
fn green_round_trip_and_eigenvectors() {
    let f = random_model(17, &RandomModelSpec::default());
    let m = SpectralModel::from_file(&f, 0.0).unwrap();
    for s in &m.cup.spaces {
        let x = DVector::from_fn(s.dim(), |i, _| c((i as f64).sin(), (i as f64 * 0.7).cos()));
        let y = s.green(1.0, &x).unwrap();
        let back = s.laplacian(&y) + &y;
        assert!((back - &x).norm() < 1e-10 * x.norm());
        let v = s.eigenvectors.column(0).into_owned();
        let gv = s.green(1.0, &v).unwrap();
        assert!((gv - v * c(1.0 / (s.eigenvalues[0] + 1.0), 0.0)).norm() < 1e-12);
    }
    // constants under (□+1)⁻¹
    let ones = DVector::from_element(m.weights.len(), c(1.0, 0.0));
    let g = m.functions.green(1.0, &ones).unwrap();
    assert!((g - &ones).norm() < 1e-12);
}

#[test]
fn thousand_random_models() {
    let spec = RandomModelSpec::default();
    let mut worst_adj = 0.0f64;
    let mut worst_twisted = f64::INFINITY;
    let mut worst_lambda = f64::INFINITY;
    let mut worst_rem = f64::INFINITY;
    for seed in 0..1000u64 {
        let f = random_model(seed, &spec);
        let m = SpectralModel::from_file(&f, 0.0).unwrap();
        worst_adj = worst_adj.max(m.cup.adjointness_residual()).max(m.wedge.adjointness_residual());
        for p in 0..=m.n {
            let psi = random_harmonic(&m.cup.spaces[p], seed * 31 + p as u64);
            let r = m.curvature_twisted_hodge(p, &psi).unwrap();
            let scale = 1.0 + r.term1.abs() + r.term2.abs() + r.term3.abs();
            worst_twisted = worst_twisted.min(r.estimate_slack / scale);
            worst_rem = worst_rem.min(r.term3_remainder / scale);
            if p == 0 {
                assert_eq!(r.term2, 0.0);
            }
            if p == m.n {
                assert_eq!(r.term3, 0.0);
                assert!(r.total >= 0.0);
            }
            let nu = random_harmonic(&m.wedge.spaces[p], seed * 37 + p as u64);
            let l = m.curvature_lambda_t(p, &nu).unwrap();
            assert_eq!(l.formula, Formula::LambdaT);
            let scale = 1.0 + l.term1.abs() + l.term2.abs() + l.term3.abs();
            worst_lambda = worst_lambda.min(l.estimate_slack / scale);
        }
    }
    assert!(worst_adj <= 1e-12, "adjointness {worst_adj}");
    assert!(worst_twisted >= -1e-12, "twisted estimate slack {worst_twisted}");
    assert!(worst_lambda >= -1e-12, "lambda estimate slack {worst_lambda}");
    assert!(worst_rem >= -1e-12, "term3 remainder {worst_rem}");
}

#[test]
fn cauchy_schwarz_random_and_tight() {
    let mut checked = 0;
    for seed in 0..1000u64 {
        let m = SpectralModel::from_file(&random_model(seed, &RandomModelSpec::default()), 0.0).unwrap();
        let p = 1 + (seed as usize % m.n);
        let nu = random_harmonic(&m.wedge.spaces[p], seed);
        let mu = random_harmonic(&m.wedge.spaces[p - 1], seed + 7);
        let (lhs, rhs) = m.cauchy_schwarz_slack(p, &nu, &mu).unwrap();
        assert!(lhs - rhs >= -1e-12 * (1.0 + lhs), "{lhs} < {rhs}");
        // equality when μ is the harmonic part of Ā∧ν
        let sq = &m.wedge.spaces[p - 1];
        let best = sq.harmonic(&(&m.wedge.lower[p - 1] * &nu));
        if sq.norm_sq(&best) > 1e-10 {
            let (l2, r2) = m.cauchy_schwarz_slack(p, &nu, &best).unwrap();
            assert!((l2 - r2).abs() <= 1e-8 * l2.max(1.0), "{l2} vs {r2}");
            checked += 1;
        }
        let zero = DVector::zeros(nu.len());
        let (l0, r0) = m.cauchy_schwarz_slack(p, &zero, &mu).unwrap();
        assert_eq!((l0, r0), (0.0, 0.0));
    }
    assert!(checked > 100);
}

#[test]
fn untwisted_limit_is_griffiths() {
    // with the function term switched off and all sections harmonic the
    // evaluator reduces to ‖H(A∪ψ)‖² − ‖H(Ā∪ψ)‖²
    let mut f = random_model(5, &RandomModelSpec::default());
    f.a_norm_sq.iter_mut().for_each(|a| *a = 0.0);
    for s in &mut f.cup.spaces {
        s.eigenvalues.iter_mut().for_each(|l| *l = 0.0);
    }
    let m = SpectralModel::from_file(&f, 0.0).unwrap();
    for p in 0..=m.n {
        let psi = random_harmonic(&m.cup.spaces[p], 99);
        let r = m.curvature_twisted_hodge(p, &psi).unwrap();
        let g = m.griffiths(p, &psi);
        assert!((r.total - g).abs() < 1e-10 * (1.0 + g.abs()), "{} vs {g}", r.total);
    }
}

#[test]
fn bilinear_scaling() {
    let m = SpectralModel::from_file(&random_model(8, &RandomModelSpec::default()), 0.0).unwrap();
    let psi = random_harmonic(&m.cup.spaces[0], 1);
    let r1 = m.curvature_twisted_hodge(0, &psi).unwrap();
    let r2 = m.curvature_twisted_hodge(0, &(&psi * c(0.0, 2.0))).unwrap();
    assert!((r2.total - 4.0 * r1.total).abs() < 1e-10 * (1.0 + r1.total.abs()));
}
