//! Finsler metric `H = Σ p α_p G_p` built from the higher Kodaira-Spencer
//! seminorms, the choice of the coefficients `α_p`, and the certificate of
//! a strictly negative holomorphic curvature bound.
//!
//! Everything here is plain arithmetic on the seminorm values, so the
//! module is generic over the scalar type.

use crate::{Error, Real, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Relative threshold below which a seminorm is treated as vanishing when
/// choosing the number of active terms.
pub const ACTIVE_THRESHOLD: f64 = 1e-12;

/// Coefficients of the Finsler metric together with the derived constants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinslerProfile<T: Real> {
    pub n: usize,
    /// Lower bound constant of the first seminorm's curvature.
    pub c: T,
    /// `alphas[p-1] = α_p`.
    pub alphas: Vec<T>,
    /// `gammas[p-1] = γ_p`.
    pub gammas: Vec<T>,
    /// Constant obtained as `min γ_p / n`.
    pub k_min_gamma: T,
    /// Sharp constant with `Σ γ_p G_p² >= k_sharp · H²` for all `G >= 0`.
    pub k_sharp: T,
}

impl<T: Real> FinslerProfile<T> {
    /// Build a profile from explicit coefficients.
    pub fn from_alphas(c: T, alphas: Vec<T>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::Invalid("at least one coefficient is required".into()));
        }
        if alphas.iter().any(|a| *a <= T::zero()) || c <= T::zero() {
            return Err(Error::Invalid("coefficients and c must be positive".into()));
        }
        let gammas = gammas(c, &alphas);
        let n = alphas.len();
        let gmin = gammas.iter().cloned().fold(T::infinity(), T::min);
        let k_min_gamma = gmin / T::lit(n as f64);
        let k_sharp = if gmin > T::zero() {
            let s = alphas
                .iter()
                .zip(&gammas)
                .enumerate()
                .map(|(i, (a, g))| {
                    let pa = T::lit((i + 1) as f64) * *a;
                    pa * pa / *g
                })
                .fold(T::zero(), |x, y| x + y);
            T::one() / s
        } else {
            T::zero()
        };
        Ok(Self {
            n,
            c,
            alphas,
            gammas,
            k_min_gamma,
            k_sharp,
        })
    }

    /// `H = Σ p α_p G_p`.
    pub fn finsler_h(&self, g: &[T]) -> T {
        self.alphas
            .iter()
            .zip(g)
            .enumerate()
            .fold(T::zero(), |acc, (i, (a, gp))| {
                acc + T::lit((i + 1) as f64) * *a * *gp
            })
    }

    /// `-Σ γ_p G_p²`, the quadratic upper bound for `H² K_H`.
    pub fn quadratic_bound(&self, g: &[T]) -> T {
        -self
            .gammas
            .iter()
            .zip(g)
            .fold(T::zero(), |acc, (gm, gp)| acc + *gm * *gp * *gp)
    }

    pub fn certified(&self) -> bool {
        self.gammas.iter().all(|g| *g > T::zero())
    }
}

/// The coefficients `γ_p` of the quadratic reduction.
pub fn gammas<T: Real>(c: T, alphas: &[T]) -> Vec<T> {
    let n = alphas.len();
    let half = T::lit(0.5);
    let a = |p: usize| alphas[p - 1];
    (1..=n)
        .map(|p| {
            if n == 1 {
                c * a(1)
            } else if p == 1 {
                a(1) * (c - half * a(1) * a(1) / (a(2) * a(2)))
            } else if p < n {
                half * (a(p - 1).powi(p as i32 - 1) / a(p).powi(p as i32 - 2)
                    - a(p).powi(p as i32 + 2) / a(p + 1).powi(p as i32 + 1))
            } else {
                half * a(p - 1).powi(p as i32 - 1) / a(p).powi(p as i32 - 2)
            }
        })
        .collect()
}

/// Choose `α_1 = 1` and each next coefficient as the smallest power-of-two
/// multiple of the previous one that makes the preceding `γ_p` at least
/// `gamma_target` (default `c / 2`).
///
/// `γ_p` can never exceed its leading term (`α_1 c` for `p = 1`, otherwise
/// `½ α_{p-1}^{p-1} / α_p^{p-2}`), so the target for each step is capped at
/// half of that supremum.
pub fn select_alphas<T: Real>(n: usize, c: T, gamma_target: Option<T>) -> Result<FinslerProfile<T>> {
    if n == 0 {
        return Err(Error::Invalid("dimension must be positive".into()));
    }
    if c <= T::zero() {
        return Err(Error::Invalid("c must be positive".into()));
    }
    let half = T::lit(0.5);
    let target = gamma_target.unwrap_or(c * half);
    let mut alphas = vec![T::one()];
    for p in 1..n {
        let ap = alphas[p - 1];
        let lead = if p == 1 {
            ap * c
        } else {
            half * alphas[p - 2].powi(p as i32 - 1) / ap.powi(p as i32 - 2)
        };
        let goal = target.min(half * lead);
        // γ_p = lead - penalty(α_{p+1}), penalty decreasing in α_{p+1}
        let penalty = |next: T| {
            if p == 1 {
                half * ap * ap * ap / (next * next)
            } else {
                half * ap.powi(p as i32 + 2) / next.powi(p as i32 + 1)
            }
        };
        let mut next = ap;
        let mut steps = 0;
        loop {
            next *= T::lit(2.0);
            steps += 1;
            if lead - penalty(next) >= goal {
                break;
            }
            if steps > 120 || !next.is_finite() {
                return Err(Error::Invalid(format!(
                    "no representable coefficient for p = {}",
                    p + 1
                )));
            }
        }
        alphas.push(next);
    }
    FinslerProfile::from_alphas(c, alphas)
}

/// Number of active terms: the largest `k` with `G_k > threshold · G_1`
/// such that all earlier terms are active too.
pub fn active_terms<T: Real>(g: &[T]) -> usize {
    if g.is_empty() || g[0] <= T::zero() {
        return 0;
    }
    let thr = T::lit(ACTIVE_THRESHOLD) * g[0];
    g.iter().take_while(|x| **x > thr).count()
}

/// Curvature bound of the `p`-th seminorm in terms of its neighbours:
/// for `p = 1` this is `-c + G_2²/G_1²`, otherwise
/// `(1/p)(-G_p^{p-1}/G_{p-1}^{p-1} + G_{p+1}^{p+1}/G_p^{p+1})`.
pub fn kp_estimate<T: Real>(g_prev: T, g: T, g_next: T, p: usize, c: T) -> Result<T> {
    if p == 0 {
        return Err(Error::Invalid("order p starts at 1".into()));
    }
    if g <= T::zero() || (p > 1 && g_prev <= T::zero()) {
        return Err(Error::Degenerate(p));
    }
    if p == 1 {
        return Ok(-c + g_next * g_next / (g * g));
    }
    let pi = p as i32;
    let neg = g.powi(pi - 1) / g_prev.powi(pi - 1);
    let pos = g_next.powi(pi + 1) / g.powi(pi + 1);
    Ok((pos - neg) / T::lit(p as f64))
}

/// The successive upper bounds for `K_H` at one tangent direction.
#[derive(Clone, Debug, Serialize)]
pub struct CascadeBound {
    /// Active terms.
    pub k: usize,
    pub h: f64,
    /// Convex-sum bound from the supplied `K_p` values, if any.
    pub convex_sum: Option<f64>,
    /// Bound after inserting the `K_p` estimates.
    pub kp_bound: f64,
    /// Quadratic reduction `-Σ γ_p G_p² / H²`.
    pub quadratic: f64,
    /// Certified constant bound `-k_sharp`.
    pub certified: f64,
}

/// Evaluate the chain convex-sum ≥ K_p-estimate ≥ quadratic ≥ certified
/// constant for one direction. `kp` optionally supplies measured `K_p`.
pub fn curvature_cascade<T: Real>(
    profile: &FinslerProfile<T>,
    g: &[T],
    kp: Option<&[T]>,
) -> Result<CascadeBound> {
    let k = active_terms(g).min(profile.n);
    if k == 0 {
        return Err(Error::Degenerate(0));
    }
    let g = &g[..k];
    let h = profile.finsler_h(g);
    let h2 = h * h;
    let a = &profile.alphas;
    let c = profile.c;
    let convex_sum = kp.map(|kp| {
        let s = (0..k).fold(T::zero(), |acc, i| {
            acc + T::lit((i + 1) as f64) * a[i] * g[i] * g[i] * kp[i]
        });
        (s / h2).to_f64_lossy()
    });
    let mut s = -c * a[0] * g[0] * g[0];
    for p in 2..=k {
        let pi = p as i32;
        let gp = g[p - 1];
        let gq = g[p - 2];
        s -= a[p - 1] * gp.powi(pi + 1) / gq.powi(pi - 1) - a[p - 2] * gp.powi(pi) / gq.powi(pi - 2);
    }
    Ok(CascadeBound {
        k,
        h: h.to_f64_lossy(),
        convex_sum,
        kp_bound: (s / h2).to_f64_lossy(),
        quadratic: (profile.quadratic_bound(g) / h2).to_f64_lossy(),
        certified: (-profile.k_sharp).to_f64_lossy(),
    })
}

/// Right-hand side of the convex-sum curvature inequality:
/// `Σ G_j² K_j / (Σ G_j)²`.
pub fn convex_sum_bound<T: Real>(g: &[T], k: &[T]) -> T {
    let total = g.iter().fold(T::zero(), |a, x| a + *x);
    g.iter()
        .zip(k)
        .fold(T::zero(), |acc, (gj, kj)| acc + *gj * *gj * *kj)
        / (total * total)
}

/// `f(x) = x^{p+1} - x^p - x²/2 + 1/2`.
pub fn first_ineq_f<T: Real>(p: u32, x: T) -> T {
    let half = T::lit(0.5);
    x.powi(p as i32 + 1) - x.powi(p as i32) - half * x * x + half
}

/// Grid report for the scalar inequality `f >= 0` on `[0, 10]`.
#[derive(Clone, Debug, Serialize)]
pub struct FirstIneqReport {
    pub p_max: u32,
    pub grid_points: usize,
    pub min_value: f64,
    pub argmin_p: u32,
    pub argmin_x: f64,
    pub pass: bool,
}

pub fn verify_firstineq<T: Real>(p_max: u32, grid_points: usize) -> Result<FirstIneqReport> {
    if p_max == 0 {
        return Err(Error::Invalid("p_max must be at least 1".into()));
    }
    let mut best = (f64::INFINITY, 0u32, 0.0f64);
    for p in 1..=p_max {
        let coarse = (0..=grid_points).map(|i| 10.0 * i as f64 / grid_points as f64);
        // the minimum sits at x = 1 where f vanishes to second order
        let fine = (0..=2000).map(|i| 0.9 + 0.2 * i as f64 / 2000.0);
        for x in coarse.chain(fine) {
            let v = first_ineq_f(p, T::lit(x)).to_f64_lossy();
            if v < best.0 {
                best = (v, p, x);
            }
        }
    }
    Ok(FirstIneqReport {
        p_max,
        grid_points,
        min_value: best.0,
        argmin_p: best.1,
        argmin_x: best.2,
        pass: best.0 >= -1e-12,
    })
}

/// Left side minus right side of the summed inequality at `x`.
pub fn second_ineq_slack<T: Real>(alphas: &[T], x: &[T]) -> T {
    let n = alphas.len();
    let half = T::lit(0.5);
    let a = |p: usize| alphas[p - 1];
    let prod_sq = |p: usize| x[..p].iter().fold(T::one(), |acc, v| acc * *v * *v);
    let mut lhs = T::zero();
    for p in 2..=n {
        let pi = p as i32;
        let xp = x[p - 1];
        lhs += (a(p) * xp.powi(pi + 1) - a(p - 1) * xp.powi(pi)) * prod_sq(p - 1);
    }
    if n < 2 {
        return lhs;
    }
    let mut rhs = -a(1).powi(3) / (a(2) * a(2)) * x[0] * x[0];
    rhs += a(n - 1).powi(n as i32 - 1) / a(n).powi(n as i32 - 2) * prod_sq(n);
    for p in 2..n {
        let pi = p as i32;
        rhs += (a(p - 1).powi(pi - 1) / a(p).powi(pi - 2) - a(p).powi(pi + 2) / a(p + 1).powi(pi + 1))
            * prod_sq(p);
    }
    lhs - half * rhs
}

/// Randomized and probe report for the summed inequality.
#[derive(Clone, Debug, Serialize)]
pub struct SecIneqReport {
    pub samples: usize,
    pub min_relative_slack: f64,
    pub witness: Vec<f64>,
    pub pass: bool,
}

pub fn verify_secineq<T: Real>(alphas: &[T], samples: usize, seed: u64) -> Result<SecIneqReport> {
    if alphas.iter().any(|a| *a <= T::zero()) {
        return Err(Error::Invalid("coefficients must be positive".into()));
    }
    let n = alphas.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (f64::INFINITY, vec![0.0; n]);
    let mut check = |x: Vec<f64>| {
        let xt: Vec<T> = x.iter().map(|v| T::lit(*v)).collect();
        let slack = second_ineq_slack(alphas, &xt).to_f64_lossy();
        let scale = 1.0 + scale_of(alphas, &xt);
        let rel = slack / scale;
        if rel < worst.0 {
            worst = (rel, x);
        }
    };
    check(vec![0.0; n]);
    // equality probe: every f vanishes at x_p = α_{p-1}/α_p
    let mut probe = vec![1.0; n];
    for p in 2..=n {
        probe[p - 1] = alphas[p - 2].to_f64_lossy() / alphas[p - 1].to_f64_lossy();
    }
    check(probe);
    for _ in 0..samples {
        let x: Vec<f64> = (0..n).map(|_| 10.0 * (1.0 - rng.gen::<f64>())).collect();
        check(x);
    }
    let tol = if std::mem::size_of::<T>() < 8 { 1e-5 } else { 1e-12 };
    Ok(SecIneqReport {
        samples,
        min_relative_slack: worst.0,
        witness: worst.1,
        pass: worst.0 >= -tol,
    })
}

fn scale_of<T: Real>(alphas: &[T], x: &[T]) -> f64 {
    let n = alphas.len();
    let mut s = 0.0f64;
    let mut prod = 1.0f64;
    for p in 1..=n {
        let xp = x[p - 1].to_f64_lossy();
        let ap = alphas[p - 1].to_f64_lossy();
        s = s.max(ap * xp.powi(p as i32 + 1).abs() * prod);
        prod *= xp * xp;
        s = s.max(prod * ap);
    }
    s
}

/// Randomized check of `-Σ γ_p G_p² <= -K H²` for a given constant.
#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub trials: usize,
    pub constant: f64,
    pub violations: usize,
    /// Largest value of `(-Σ γ_p G_p² + K H²) / H²`.
    pub worst_excess: f64,
    pub witness: Vec<f64>,
    pub pass: bool,
}

/// Sample positive tuples (including some with trailing seminorms pushed
/// towards zero) and test the quadratic reduction against `constant`.
pub fn verify_certificate<T: Real>(
    profile: &FinslerProfile<T>,
    constant: T,
    trials: usize,
    seed: u64,
) -> CertificateReport {
    let n = profile.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (f64::NEG_INFINITY, vec![]);
    let mut violations = 0;
    for t in 0..trials {
        let mut g: Vec<f64> = (0..n).map(|_| 10.0 * (1.0 - rng.gen::<f64>())).collect();
        if t % 5 == 0 && n > 1 {
            let cut = rng.gen_range(1..n);
            for v in g.iter_mut().skip(cut) {
                *v *= 1e-9;
            }
        }
        let gt: Vec<T> = g.iter().map(|v| T::lit(*v)).collect();
        let h = profile.finsler_h(&gt);
        let excess = ((profile.quadratic_bound(&gt) + constant * h * h) / (h * h)).to_f64_lossy();
        if excess > 1e-12 {
            violations += 1;
        }
        if excess > worst.0 {
            worst = (excess, g);
        }
    }
    CertificateReport {
        trials,
        constant: constant.to_f64_lossy(),
        violations,
        worst_excess: worst.0,
        witness: worst.1,
        pass: violations == 0,
    }
}
