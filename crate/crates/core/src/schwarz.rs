//! Ahlfors-Schwarz comparison for conformal densities on the unit disk.
//!
//! A density `γ₀(t)` is sampled on a polar grid whose radii are clustered
//! towards the outer edge `r_max < 1`. The curvature condition
//! `∂∂̄ log γ₀ >= A γ₀` is checked pointwise after a light mollification
//! and weakly against smooth bump test functions, which also sees the
//! positive mass that `log γ₀` carries at zeros.

use crate::{Error, Real, Result};
use serde::{Deserialize, Serialize};

/// Samples of a density on a polar grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskMetric<T: Real> {
    pub r_max: T,
    pub radii: Vec<T>,
    pub n_theta: usize,
    /// Row-major by radius: `values[i * n_theta + j]` at `(radii[i], θ_j)`.
    pub values: Vec<T>,
    /// Value assigned to the centre, if the density has been extended there.
    pub center: Option<T>,
}

/// Radii `r_max · sin(π s / 2)` at midpoints `s = (i + ½)/n`.
pub fn clustered_radii<T: Real>(n: usize, r_max: T) -> Vec<T> {
    let half_pi = T::lit(std::f64::consts::FRAC_PI_2);
    (0..n)
        .map(|i| r_max * (half_pi * T::lit((i as f64 + 0.5) / n as f64)).sin())
        .collect()
}

impl<T: Real> DiskMetric<T> {
    pub fn from_fn(nr: usize, n_theta: usize, r_max: T, f: impl Fn(T, T) -> T) -> Result<Self> {
        if nr < 4 || n_theta < 8 || n_theta % 2 != 0 {
            return Err(Error::Invalid(
                "polar grid needs at least 4 radii and an even number (>= 8) of angles".into(),
            ));
        }
        if !(r_max > T::zero() && r_max < T::one()) {
            return Err(Error::Invalid("r_max must lie in (0, 1)".into()));
        }
        let radii = clustered_radii(nr, r_max);
        let mut values = Vec::with_capacity(nr * n_theta);
        for r in &radii {
            for j in 0..n_theta {
                let th = theta::<T>(j, n_theta);
                values.push(f(*r * th.cos(), *r * th.sin()));
            }
        }
        let m = Self {
            r_max,
            radii,
            n_theta,
            values,
            center: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.radii.len() * self.n_theta {
            return Err(Error::Invalid("sample array does not match the grid".into()));
        }
        let expect = clustered_radii(self.radii.len(), self.r_max);
        if self
            .radii
            .iter()
            .zip(&expect)
            .any(|(a, b)| (*a - *b).abs() > T::lit(1e-6) * self.r_max)
        {
            return Err(Error::Invalid("radii must follow the clustered polar grid".into()));
        }
        if self.values.iter().any(|v| v.is_nan() || *v < T::zero()) {
            return Err(Error::Invalid("densities must be non-negative numbers".into()));
        }
        if self.values.iter().all(|v| *v == T::zero()) {
            return Err(Error::Invalid("density vanishes identically".into()));
        }
        Ok(())
    }

    pub fn nr(&self) -> usize {
        self.radii.len()
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[i * self.n_theta + j % self.n_theta]
    }

    pub fn scaled(&self, lambda: T) -> Self {
        let mut m = self.clone();
        for v in &mut m.values {
            *v *= lambda;
        }
        m.center = m.center.map(|c| c * lambda);
        m
    }

    fn log_values(&self) -> Vec<T> {
        self.values.iter().map(|v| v.ln()).collect()
    }
}

fn theta<T: Real>(j: usize, n: usize) -> T {
    T::lit(2.0 * std::f64::consts::PI * j as f64 / n as f64)
}

/// Five-point smoothing in index space; non-finite samples poison their
/// neighbourhood (they mark the zero set).
fn mollify<T: Real>(m: &DiskMetric<T>, u: &[T]) -> Vec<T> {
    let (nr, nt) = (m.nr(), m.n_theta);
    let mut out = vec![T::neg_infinity(); u.len()];
    for i in 0..nr {
        for j in 0..nt {
            let c = u[i * nt + j];
            let left = u[i * nt + (j + nt - 1) % nt];
            let right = u[i * nt + (j + 1) % nt];
            let inner = if i == 0 {
                u[(j + nt / 2) % nt]
            } else {
                u[(i - 1) * nt + j]
            };
            let outer = if i + 1 < nr { u[(i + 1) * nt + j] } else { c };
            let s = T::lit(4.0) * c + left + right + inner + outer;
            out[i * nt + j] = s / T::lit(8.0);
        }
    }
    out
}

/// Polar Laplacian at ring `i < nr - 2`, with fourth-order radial
/// differences in the uniform parameter `s` of the clustered radii. Rings
/// continue through the origin onto the opposite angle.
fn polar_laplacian<T: Real>(m: &DiskMetric<T>, u: &[T], i: usize, j: usize) -> T {
    let nt = m.n_theta;
    let nr = m.nr();
    // ring k < 0 is ring -k-1 seen from the opposite angle
    let radial = |k: isize| -> T {
        if k < 0 {
            u[(-k - 1) as usize * nt + (j + nt / 2) % nt]
        } else {
            u[k as usize * nt + j]
        }
    };
    let ii = i as isize;
    let (um2, um, u0, up, up2) = (
        radial(ii - 2),
        radial(ii - 1),
        radial(ii),
        radial(ii + 1),
        radial(ii + 2),
    );
    let two = T::lit(2.0);
    let ds = T::one() / T::lit(nr as f64);
    let half_pi = T::lit(std::f64::consts::FRAC_PI_2);
    let s = (T::lit(i as f64) + T::lit(0.5)) * ds;
    let r = m.radii[i];
    let r_s = m.r_max * half_pi * (half_pi * s).cos();
    let r_ss = -m.r_max * half_pi * half_pi * (half_pi * s).sin();
    let twelve = T::lit(12.0);
    let u_s = (um2 - up2 + T::lit(8.0) * (up - um)) / (twelve * ds);
    let u_ss = (-up2 + T::lit(16.0) * (up + um) - T::lit(30.0) * u0 - um2) / (twelve * ds * ds);
    let ur = u_s / r_s;
    let urr = (u_ss - ur * r_ss) / (r_s * r_s);
    let dth = T::lit(2.0 * std::f64::consts::PI / nt as f64);
    let ul = u[i * nt + (j + nt - 1) % nt];
    let ury = u[i * nt + (j + 1) % nt];
    let utt = (ul - two * u0 + ury) / (dth * dth);
    urr + ur / r + utt / (r * r)
}

/// Result of the pointwise curvature scan.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureReport {
    /// Largest `A` with `∂∂̄ log γ₀ >= A γ₀` at every checked grid point.
    pub a: f64,
    /// Whether `A > 0`, i.e. the comparison theorem applies.
    pub positive: bool,
    pub argmin_r: f64,
    pub argmin_theta: f64,
    pub argmin_index: (usize, usize),
    pub checked_points: usize,
    pub zero_set_points: usize,
    /// Most negative `∂∂̄ log γ₀` relative to its largest magnitude.
    pub min_laplacian_rel: f64,
}

/// Growth exponent of `max_ring γ₀` against `r` on the innermost rings.
fn inner_growth<T: Real>(m: &DiskMetric<T>) -> Result<f64> {
    let nr = m.nr();
    let r_max = m.r_max.to_f64_lossy();
    let ring_max: Vec<f64> = (0..nr)
        .map(|i| (0..m.n_theta).map(|j| m.at(i, j).to_f64_lossy()).fold(0.0, f64::max))
        .collect();
    if ring_max.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("density is unbounded near the puncture".into()));
    }
    let mut inner: Vec<usize> = (0..nr).filter(|&i| m.radii[i].to_f64_lossy() < 0.1 * r_max).collect();
    if inner.len() < 3 {
        inner = (0..(nr / 10).max(3)).collect();
    }
    let pts: Vec<(f64, f64)> = inner
        .iter()
        .filter(|&&i| ring_max[i] > 0.0)
        .map(|&i| (m.radii[i].to_f64_lossy().ln(), ring_max[i].ln()))
        .collect();
    if pts.len() < 2 {
        return Ok(0.0);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Order of vanishing at the centre, read off from the inner growth rate
/// `γ₀ ~ |t|^{2k}`.
pub fn center_order<T: Real>(m: &DiskMetric<T>) -> u32 {
    match inner_growth(m) {
        Ok(s) if s > 1.0 => (s / 2.0).round() as u32,
        _ => 0,
    }
}

/// Largest curvature constant certified by the mollified pointwise scan.
pub fn curvature_constant<T: Real>(m: &DiskMetric<T>, tol: f64) -> Result<CurvatureReport> {
    m.validate()?;
    let (nr, nt) = (m.nr(), m.n_theta);
    // a zero of order k at the centre is a harmonic `2k log r` term off the
    // origin; removing it keeps the finite differences away from the pole
    let order = T::lit(center_order(m) as f64);
    let two = T::lit(2.0);
    let mut u = m.log_values();
    for (i, r) in m.radii.iter().enumerate() {
        for v in &mut u[i * nt..(i + 1) * nt] {
            *v -= two * order * r.ln();
        }
    }
    let us = mollify(m, &u);
    // rounding level of a second difference on the finest cell
    let umax = us.iter().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.to_f64_lossy().abs()));
    let ds = std::f64::consts::FRAC_PI_2 / nr as f64;
    let r_max = m.r_max.to_f64_lossy();
    let h_min = (r_max * ds * (std::f64::consts::FRAC_PI_2 * (nr as f64 - 2.5) / nr as f64).cos())
        .min(m.radii[0].to_f64_lossy() * 2.0 * std::f64::consts::PI / nt as f64);
    let noise = 100.0 * T::epsilon().to_f64_lossy() * umax.max(1.0) / (h_min * h_min);
    let mut best = (f64::INFINITY, 0usize, 0usize);
    let mut lap_min = f64::INFINITY;
    let mut lap_max = 0.0f64;
    let mut checked = 0;
    let mut zero = 0;
    for i in 0..nr - 3 {
        for j in 0..nt {
            let lap = polar_laplacian(m, &us, i, j);
            let g = m.at(i, j);
            if !lap.is_finite() || g <= T::zero() {
                zero += 1;
                continue;
            }
            // ∂∂̄ = Δ/4
            let mut ddbar = lap.to_f64_lossy() / 4.0;
            if ddbar.abs() < noise {
                ddbar = 0.0;
            }
            lap_min = lap_min.min(ddbar);
            lap_max = lap_max.max(ddbar.abs());
            let ratio = ddbar / g.to_f64_lossy();
            checked += 1;
            if ratio < best.0 {
                best = (ratio, i, j);
            }
        }
    }
    if checked == 0 {
        return Err(Error::Invalid("no grid point off the zero set".into()));
    }
    let rel = lap_min / lap_max.max(1.0);
    if lap_min < 0.0 && rel < -tol {
        return Err(Error::Positivity(format!(
            "log density is not subharmonic: relative Laplacian {rel:.3e} below -{tol:.1e}"
        )));
    }
    let a = best.0.max(0.0);
    Ok(CurvatureReport {
        a,
        positive: a > 0.0,
        argmin_r: m.radii[best.1].to_f64_lossy(),
        argmin_theta: theta::<f64>(best.2, nt),
        argmin_index: (best.1, best.2),
        checked_points: checked,
        zero_set_points: zero,
        min_laplacian_rel: rel.min(0.0),
    })
}

/// Pointwise comparison with the Poincaré-type bound `2 / (A (1 - |t|²)²)`.
#[derive(Clone, Debug, Serialize)]
pub struct PoincareReport {
    pub a: f64,
    /// `max γ₀ / bound` over the grid.
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub max_violation: f64,
    pub pass: bool,
}

pub fn poincare_compare<T: Real>(m: &DiskMetric<T>, a: f64, grid_tol: f64) -> Result<PoincareReport> {
    if a <= 0.0 {
        return Err(Error::Invalid("comparison needs a positive curvature constant".into()));
    }
    let mut max_ratio = 0.0f64;
    let mut min_ratio = f64::INFINITY;
    for (i, r) in m.radii.iter().enumerate() {
        let r = r.to_f64_lossy();
        let bound = 2.0 / (a * (1.0 - r * r).powi(2));
        for j in 0..m.n_theta {
            let ratio = m.at(i, j).to_f64_lossy() / bound;
            max_ratio = max_ratio.max(ratio);
            min_ratio = min_ratio.min(ratio);
        }
    }
    Ok(PoincareReport {
        a,
        max_ratio,
        min_ratio,
        max_violation: (max_ratio - 1.0).max(0.0),
        pass: max_ratio <= 1.0 + grid_tol,
    })
}

/// Smooth bump `exp(1 - 1/(1 - s²))`, `s = |t - centre| / radius`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bump {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl Bump {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let s2 = ((x - self.cx).powi(2) + (y - self.cy).powi(2)) / (self.radius * self.radius);
        if s2 >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s2)).exp()
        }
    }

    /// Euclidean Laplacian of the bump.
    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        let s2 = ((x - self.cx).powi(2) + (y - self.cy).powi(2)) / (self.radius * self.radius);
        if s2 >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - s2;
        let psi = (1.0 - 1.0 / q).exp();
        (-4.0 * psi / (q * q) - 8.0 * s2 * psi / q.powi(3) + 4.0 * s2 * psi / q.powi(4))
            / (self.radius * self.radius)
    }
}

/// Test functions shrinking onto the centre plus a ring of off-centre
/// bumps; all supports lie inside `r_max`.
pub fn standard_bumps(r_max: f64, count: usize) -> Vec<Bump> {
    let mut out = Vec::with_capacity(count);
    let shrinking = count / 2;
    for k in 0..shrinking {
        out.push(Bump {
            cx: 0.0,
            cy: 0.0,
            radius: 0.5 * r_max * 0.8f64.powi(k as i32),
        });
    }
    let rest = count - shrinking;
    for k in 0..rest {
        let th = 2.0 * std::f64::consts::PI * k as f64 / rest as f64;
        let (rc, rad) = if k % 2 == 0 { (0.1 * r_max, 0.15 * r_max) } else { (0.45 * r_max, 0.3 * r_max) };
        out.push(Bump {
            cx: rc * th.cos(),
            cy: rc * th.sin(),
            radius: rad,
        });
    }
    out
}

/// Weak pairings `∫ log γ₀ Δφ/4 - K ∫ γ₀ φ` against bump test functions.
#[derive(Clone, Debug, Serialize)]
pub struct WeakReport {
    pub k: f64,
    pub pairings: Vec<f64>,
    pub scales: Vec<f64>,
    pub min_relative: f64,
    pub pass: bool,
}

pub fn weak_current_test<T: Real>(m: &DiskMetric<T>, k: f64, bumps: &[Bump], tol: f64) -> WeakReport {
    let (nr, nt) = (m.nr(), m.n_theta);
    let r_max = m.r_max.to_f64_lossy();
    let dth = 2.0 * std::f64::consts::PI / nt as f64;
    let mut pairings = Vec::with_capacity(bumps.len());
    let mut scales = Vec::with_capacity(bumps.len());
    for b in bumps {
        let mut lhs = 0.0;
        let mut mass = 0.0;
        let mut scale = 0.0;
        for i in 0..nr {
            let s = (i as f64 + 0.5) / nr as f64;
            let r = m.radii[i].to_f64_lossy();
            let dr = r_max * std::f64::consts::FRAC_PI_2 * (std::f64::consts::FRAC_PI_2 * s).cos() / nr as f64;
            let w = r * dr * dth;
            for j in 0..nt {
                let th = j as f64 * dth;
                let (x, y) = (r * th.cos(), r * th.sin());
                let lap = b.laplacian(x, y);
                let phi = b.value(x, y);
                if lap == 0.0 && phi == 0.0 {
                    continue;
                }
                let g = m.at(i, j).to_f64_lossy();
                let u = g.max(f64::MIN_POSITIVE).ln();
                lhs += w * u * lap / 4.0;
                mass += w * g * phi;
                scale += w * (u * lap / 4.0).abs();
            }
        }
        pairings.push(lhs - k * mass);
        scales.push(scale + k * mass);
    }
    let min_relative = pairings
        .iter()
        .zip(&scales)
        .map(|(p, s)| p / s.max(f64::MIN_POSITIVE))
        .fold(f64::INFINITY, f64::min);
    WeakReport {
        k,
        pairings,
        scales,
        min_relative,
        pass: min_relative >= -tol,
    }
}

/// Extension of a density across the (unsampled) centre of the disk.
#[derive(Clone, Debug, Serialize)]
pub struct ExtensionReport {
    pub center_value: f64,
    /// Slope of `log max_ring γ₀` against `log r` on the innermost rings.
    pub growth_exponent: f64,
    pub curvature: CurvatureReport,
    pub weak: WeakReport,
}

/// Largest growth rate towards the puncture still treated as bounded.
pub const GROWTH_LIMIT: f64 = -0.1;

/// Fill the puncture with the limsup of the samples and re-verify the
/// curvature inequality across it. `k` is the constant for the weak test;
/// when omitted, the pointwise constant discounted by `grid_margin` is used.
pub fn subharmonic_extension<T: Real>(
    m: &DiskMetric<T>,
    k: Option<f64>,
    grid_margin: f64,
    bumps: usize,
) -> Result<(DiskMetric<T>, ExtensionReport)> {
    m.validate()?;
    let r_max = m.r_max.to_f64_lossy();
    let slope = inner_growth(m)?;
    let ring0 = (0..m.n_theta).map(|j| m.at(0, j).to_f64_lossy()).fold(0.0, f64::max);
    if slope < GROWTH_LIMIT {
        return Err(Error::Invalid(format!(
            "density is unbounded near the puncture (growth exponent {slope:.3})"
        )));
    }
    let center_value = if slope > 0.5 { 0.0 } else { ring0 };
    let curvature = curvature_constant(m, 1e-6)?;
    let k = k.unwrap_or(curvature.a * (1.0 - grid_margin));
    let weak = weak_current_test(m, k, &standard_bumps(r_max, bumps), 1e-8);
    let mut extended = m.clone();
    extended.center = Some(T::lit(center_value));
    Ok((
        extended,
        ExtensionReport {
            center_value,
            growth_exponent: slope,
            curvature,
            weak,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radii_are_increasing_and_inside() {
        let r = clustered_radii(50, 0.99f64);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        assert!(r[0] > 0.0 && *r.last().unwrap() < 0.99);
    }

    #[test]
    fn bump_laplacian_matches_finite_differences() {
        let b = Bump { cx: 0.1, cy: -0.2, radius: 0.5 };
        let h = 1e-4;
        for &(x, y) in &[(0.1, -0.2), (0.3, -0.1), (-0.2, -0.3)] {
            let fd = (b.value(x + h, y) + b.value(x - h, y) + b.value(x, y + h) + b.value(x, y - h)
                - 4.0 * b.value(x, y))
                / (h * h);
            assert!((fd - b.laplacian(x, y)).abs() < 1e-5 * (1.0 + fd.abs()), "{fd}");
        }
    }
}
