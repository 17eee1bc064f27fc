//! Kähler-Einstein metrics on fibers.
//!
//! With `u = log G` the Kähler-Einstein condition `∂∂̄ log G = G` is the
//! semilinear equation solved here by damped Newton iteration. The
//! Jacobian of the weak residual `F(u) = M(1 - ρ)` is `M(□ + 1)`, where
//! `ρ = (∂∂̄ log G)/G` is the discrete curvature ratio and `M` the lumped
//! mass of G; Newton therefore solves `(□ + 1) δ = -(1 - ρ)` each step.

use crate::linalg::{BandLdl, Csr};
use crate::surface::{Fiber, Metric, Operators};
use crate::{linalg, Error, Result, C64};
use serde::Serialize;

/// Pointwise curvature ratio `ρ = (∂∂̄ log G)/G`; ρ ≡ 1 for a
/// Kähler-Einstein metric.
pub fn ricci_ratio(fiber: &Fiber, metric: &Metric) -> Result<Vec<f64>> {
    let ops = Operators::new(fiber, metric)?;
    let k = ops.weak_ddbar_log_g();
    Ok(k.iter().zip(ops.vertex_mass(0)).map(|(a, m)| a / m).collect())
}

/// Curvature ratio from a least-squares quadratic fit of `log G` over each
/// vertex star (see [`Operators::log_g_jet`]). The nodal ratio of the weak
/// form is only consistent on symmetric stars; the fit is consistent
/// everywhere.
pub fn fitted_ricci_ratio(fiber: &Fiber, metric: &Metric) -> Result<Vec<f64>> {
    Ok(Operators::new(fiber, metric)?
        .log_g_jet()?
        .iter()
        .zip(&metric.g)
        .map(|(j, g)| j.ddbar / g)
        .collect())
}

/// `sup |Ric + ω|` measured in units of ω, i.e. `max |1 - ρ|`, with ρ from
/// the fitted curvature.
pub fn ricci_residual(fiber: &Fiber, metric: &Metric) -> Result<f64> {
    Ok(fitted_ricci_ratio(fiber, metric)?
        .iter()
        .map(|r| (1.0 - r).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub residual: f64,
    /// Accepted step length after halving (0 for the initial state).
    pub step: f64,
    /// Relative difference between the Newton matrix and `M(□ + 1)`
    /// assembled independently from the surface operators.
    pub newton_matrix_error: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct KeMetric {
    pub metric: Metric,
    pub seed: Metric,
    /// `log(G / G̃)`.
    pub conformal_factor: Vec<f64>,
    /// Kähler potential φ with `G = G̃ + ∂∂̄φ` and zero mean.
    pub potential: Vec<f64>,
    pub residual: f64,
    pub newton_steps: usize,
    pub history: Vec<IterationLog>,
    pub volume: f64,
    pub seed_volume: f64,
    /// Gauss-Bonnet volume `4π(g-1)` of a Kähler-Einstein metric.
    pub target_volume: f64,
}

impl KeMetric {
    /// Order estimate `log(r₃/r₂)/log(r₂/r₁)` from the last three
    /// residuals that are still above round-off.
    pub fn convergence_order(&self) -> Option<f64> {
        let r: Vec<f64> = self.history.iter().map(|h| h.residual).filter(|&r| r > 1e3 * f64::EPSILON).collect();
        if r.len() < 3 {
            return None;
        }
        let n = r.len();
        Some((r[n - 1] / r[n - 2]).ln() / (r[n - 2] / r[n - 3]).ln())
    }
}

fn residual_vector(ops: &Operators) -> (Vec<f64>, Vec<f64>) {
    let k = ops.weak_ddbar_log_g();
    let m = ops.vertex_mass(0);
    (m.iter().zip(&k).map(|(m, k)| m - k).collect(), m)
}

fn sup_relative(f: &[f64], m: &[f64]) -> f64 {
    f.iter().zip(m).map(|(f, m)| (f / m).abs()).fold(0.0, f64::max)
}

pub fn solve_ke(fiber: &Fiber, seed: &Metric, tol: f64, max_iter: usize) -> Result<KeMetric> {
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let seed = Metric::new(fiber, seed.g.clone())?;
    let stiffness = Operators::new(fiber, &seed)?.stiffness_dbar(0);
    let mut u: Vec<f64> = seed.g.iter().map(|g| g.ln()).collect();
    let metric_of = |u: &[f64]| Metric { g: u.iter().map(|x| x.exp()).collect() };
    let mut ops_metric = metric_of(&u);
    let (mut f, mut m) = residual_vector(&Operators::new(fiber, &ops_metric)?);
    let mut r = sup_relative(&f, &m);
    let mut history = vec![IterationLog { iteration: 0, residual: r, step: 0.0, newton_matrix_error: None }];
    let mut steps = 0;
    while r > tol {
        if steps == max_iter {
            return Err(Error::NoConvergence { what: "Kähler-Einstein Newton iteration".into(), residual: r, iterations: steps });
        }
        steps += 1;
        let jac = stiffness.add_scaled(C64::new(1.0, 0.0), &Csr::diag(&m));
        let ops = Operators::new(fiber, &ops_metric)?;
        let reference = ops.box_dbar(0).add_scaled(C64::new(1.0, 0.0), &Csr::identity(m.len())).scale_rows(&m);
        let matrix_error = jac.max_abs_diff(&reference) / jac.max_abs();
        let rhs: Vec<C64> = f.iter().map(|x| C64::new(*x, 0.0)).collect();
        let delta = BandLdl::factor(&jac)?.solve(&rhs);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(u, d)| u - t * d.re).collect();
            let tm = metric_of(&trial);
            let (tf, tmass) = residual_vector(&Operators::new(fiber, &tm)?);
            let tr = sup_relative(&tf, &tmass);
            if tr.is_finite() && tr < r {
                u = trial;
                ops_metric = tm;
                f = tf;
                m = tmass;
                r = tr;
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                return Err(Error::Positivity(format!("step halving exhausted at residual {r:e}")));
            }
        }
        history.push(IterationLog { iteration: steps, residual: r, step: t, newton_matrix_error: Some(matrix_error) });
    }
    let metric = ops_metric;
    let conformal_factor: Vec<f64> = metric.g.iter().zip(&seed.g).map(|(g, s)| (g / s).ln()).collect();
    let potential = kahler_potential(fiber, &seed, &metric, &stiffness)?;
    let volume = Operators::new(fiber, &metric)?.volume();
    let seed_volume = Operators::new(fiber, &seed)?.volume();
    Ok(KeMetric {
        metric,
        seed,
        conformal_factor,
        potential,
        residual: r,
        newton_steps: steps,
        history,
        volume,
        seed_volume,
        target_volume: 4.0 * std::f64::consts::PI * (fiber.genus as f64 - 1.0),
    })
}

/// Solves `∂∂̄φ = G - G̃` in weak form after removing the volume
/// difference, and normalizes φ to zero mean.
fn kahler_potential(fiber: &Fiber, seed: &Metric, metric: &Metric, stiffness: &Csr) -> Result<Vec<f64>> {
    let area = Operators::new(fiber, &Metric { g: vec![1.0; fiber.nv()] })?.vertex_mass(0);
    let mut rhs: Vec<f64> = area.iter().zip(metric.g.iter().zip(&seed.g)).map(|(a, (g, s))| -a * (g - s)).collect();
    let total_area: f64 = area.iter().sum();
    let mean = rhs.iter().sum::<f64>() / total_area;
    rhs.iter_mut().zip(&area).for_each(|(r, a)| *r -= mean * a);
    let b: Vec<C64> = rhs.iter().map(|x| C64::new(*x, 0.0)).collect();
    let (phi, _) = linalg::pcg(stiffness, &b, 1e-12, 20 * fiber.nv() + 1000)?;
    let avg = phi.iter().zip(&area).map(|(p, a)| p.re * a).sum::<f64>() / total_area;
    Ok(phi.iter().map(|p| p.re - avg).collect())
}
