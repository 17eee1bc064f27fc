//! One-parameter holomorphic families of fibers, horizontal lifts,
//! Kodaira-Spencer forms, the Weil-Petersson metric and the function φ.
//!
//! A family is a grid of parameter values `s` with one fiber and one
//! Kähler-Einstein metric each. All fibers share the mesh topology, and
//! vertex `v` of every fiber is the same point of a fixed holomorphic
//! coordinate chart of the total space (its home chart). Derivatives in
//! `s` are fourth-order centred differences of nodal data on the grid.
//!
//! With `L = log G` in a total-space chart `(z, s)`, the Kähler form of the
//! total space is `i∂∂̄L` and its entries are `g_{zz̄} = G`,
//! `g_{sz̄} = ∂s∂z̄ L`, `g_{ss̄} = ∂s∂s̄ L`. The horizontal lift of `∂s` is
//! `∂s + a ∂z` with `a = -g_{sz̄}/G`, the Kodaira-Spencer form is
//! `A = ∂̄a`, and `φ = g_{ss̄} - |g_{sz̄}|²/G`.

use crate::fixtures::{hyperbolic_fixture, HyperbolicFixture, Mobius};
use crate::ke::solve_ke;
use crate::linalg::{self, BandLdl, Csr};
use crate::surface::{CornerData, Fiber, HarmonicSpace, Metric, Operators};
use crate::{Error, Result, C64};
use serde::Serialize;

/// Half-width of the difference stencil along each axis.
pub const STENCIL_HALF: usize = 2;

/// A rectangular parameter grid `s = origin + spacing·(i + j√-1)` with a
/// fiber and metric per grid point, stored row-major in `i`.
#[derive(Clone, Debug)]
pub struct Family {
    pub origin: C64,
    pub spacing: f64,
    pub n_re: usize,
    pub n_im: usize,
    pub fibers: Vec<Fiber>,
    pub metrics: Vec<Metric>,
}

impl Family {
    pub fn new(origin: C64, spacing: f64, n_re: usize, n_im: usize, fibers: Vec<Fiber>, metrics: Vec<Metric>) -> Result<Family> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Invalid("grid spacing must be positive".into()));
        }
        if fibers.len() != n_re * n_im || metrics.len() != fibers.len() {
            return Err(Error::Mismatch(format!(
                "{} fibers and {} metrics for a {n_re}x{n_im} grid",
                fibers.len(),
                metrics.len()
            )));
        }
        let side = 2 * STENCIL_HALF + 1;
        if n_re < side || n_im < side {
            return Err(Error::Stencil(format!("grid {n_re}x{n_im} is smaller than the {side}x{side} stencil")));
        }
        let base = &fibers[0];
        for (k, f) in fibers.iter().enumerate() {
            let same = f.nv() == base.nv()
                && f.edges.len() == base.edges.len()
                && f.faces.iter().zip(&base.faces).all(|(a, b)| a.v == b.v && a.e == b.e)
                && f.faces.len() == base.faces.len();
            if !same {
                return Err(Error::Topology(format!("fiber {k} does not share the mesh topology of fiber 0")));
            }
            if metrics[k].g.len() != f.nv() {
                return Err(Error::Mismatch(format!("metric {k} has {} values for {} vertices", metrics[k].g.len(), f.nv())));
            }
        }
        Ok(Family { origin, spacing, n_re, n_im, fibers, metrics })
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n_re * j
    }

    pub fn parameter(&self, i: usize, j: usize) -> C64 {
        self.origin + C64::new(i as f64, j as f64) * self.spacing
    }

    /// Grid position of a flat index, checked to have a full stencil.
    pub fn interior(&self, at: usize) -> Result<(usize, usize)> {
        if at >= self.fibers.len() {
            return Err(Error::Invalid(format!("grid index {at} out of range")));
        }
        let (i, j) = (at % self.n_re, at / self.n_re);
        let h = STENCIL_HALF;
        if i < h || j < h || i + h >= self.n_re || j + h >= self.n_im {
            return Err(Error::Stencil(format!("grid point {at} = ({i}, {j}) has no full {}-point stencil", 2 * h + 1)));
        }
        Ok((i, j))
    }

    /// Flat index of the grid centre.
    pub fn center_index(&self) -> usize {
        self.index(self.n_re / 2, self.n_im / 2)
    }
}

/// Parameter derivatives `(∂s f, ∂s∂s̄ f)` at grid point `(i, j)` of a
/// quantity sampled on the grid, by fourth-order centred differences.
pub fn parameter_derivatives(fam: &Family, i: usize, j: usize, f: impl Fn(usize) -> C64) -> (C64, C64) {
    const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
    const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
    let h = fam.spacing;
    let (mut dx, mut dy, mut dxx, mut dyy) = (C64::default(), C64::default(), C64::default(), C64::default());
    for k in 0..5 {
        let fx = f(fam.index(i + k - 2, j));
        let fy = f(fam.index(i, j + k - 2));
        dx += fx * D1[k];
        dy += fy * D1[k];
        dxx += fx * D2[k];
        dyy += fy * D2[k];
    }
    let ds = (dx - C64::new(0.0, 1.0) * dy) / (2.0 * h);
    let lap = (dxx + dyy) / (4.0 * h * h);
    (ds, lap)
}

/// Schiffer-type family: the disk around the polygon centre is reglued by
/// `ζ = z + s/z` along a closed loop of mesh edges.
#[derive(Clone, Debug, Serialize)]
pub struct SchifferSeam {
    /// Vertex at the centre of the reglued disk (`ζ = 0`).
    pub center: usize,
    /// Graph distance of the seam loop from the centre.
    pub steps: usize,
    /// 0 inside, 1 on the seam, 2 outside.
    pub region: Vec<u8>,
    /// Weight of the outer-vertex motion: 1 up to the seam radius, then
    /// a smooth radial decay to 0 well inside the polygon.
    pub cutoff: Vec<f64>,
}

impl SchifferSeam {
    /// Faces with a vertex outside the seam live in the outer chart `z`;
    /// all others in the inner chart `ζ`.
    pub fn outer_face(&self, f: &crate::surface::Face) -> bool {
        f.v.iter().any(|&v| self.region[v] == 2)
    }
}

fn graph_distance(fiber: &Fiber, from: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; fiber.nv()];
    let mut adj = vec![Vec::new(); fiber.nv()];
    for e in &fiber.edges {
        adj[e.v[0]].push(e.v[1]);
        adj[e.v[1]].push(e.v[0]);
    }
    dist[from] = 0;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(a) = queue.pop_front() {
        for &b in &adj[a] {
            if dist[b] == usize::MAX {
                dist[b] = dist[a] + 1;
                queue.push_back(b);
            }
        }
    }
    dist
}

impl SchifferSeam {
    pub fn new(fx: &HyperbolicFixture, steps: usize) -> Result<SchifferSeam> {
        if steps == 0 || steps + 2 >= fx.ray_steps {
            return Err(Error::Invalid(format!(
                "seam distance must lie in 1..{} at this level",
                fx.ray_steps.saturating_sub(2)
            )));
        }
        let dist = graph_distance(&fx.fiber, fx.center);
        let region: Vec<u8> = dist.iter().map(|&d| (d > steps) as u8 + (d >= steps) as u8).collect();
        let home = &fx.fiber.home;
        let r1 = (0..home.len()).filter(|&v| region[v] == 1).map(|v| home[v].norm()).fold(0.0, f64::max);
        let r2 = (0..home.len())
            .filter(|&v| dist[v] + 1 >= fx.ray_steps)
            .map(|v| home[v].norm())
            .fold(f64::INFINITY, f64::min);
        if !(r2 > r1) {
            return Err(Error::Invalid("seam leaves no room for the cutoff inside the polygon".into()));
        }
        let cutoff = home
            .iter()
            .zip(&region)
            .map(|(w, &r)| {
                if r != 2 {
                    return 0.0;
                }
                let t = ((w.norm() - r1) / (r2 - r1)).clamp(0.0, 1.0);
                // C² smoothstep from 1 to 0
                1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
            })
            .collect();
        Ok(SchifferSeam { center: fx.center, steps, region, cutoff })
    }

    /// Home position at parameter `s` of an outer vertex. Outer vertices
    /// follow the inverse regluing `z ≈ ζ - s/ζ` near the seam, so that
    /// faces next to it are not stretched.
    pub fn outer_position(&self, w: C64, v: usize, s: C64) -> C64 {
        w - s * self.cutoff[v] / w
    }

    /// Fiber at parameter `s`. Inner and seam vertices keep their `ζ`
    /// coordinates and outer vertices their `z` coordinates; only seam
    /// corners of outer faces move, to `z = g_s⁻¹(ζ)` with
    /// `g_s(z) = z + s/z`.
    pub fn fiber(&self, fx: &HyperbolicFixture, s: C64) -> Result<Fiber> {
        let base = &fx.fiber;
        let mut faces = Vec::with_capacity(base.nf());
        for (f, maps) in base.faces.iter().zip(&fx.corner_maps) {
            let mut cd = CornerData { v: f.v, z: f.z, dz: f.dz, d2z: f.d2z };
            if self.outer_face(f) {
                for c in 0..3 {
                    let v = f.v[c];
                    if self.region[v] == 1 {
                        let (z, dz, d2z) = seam_corner(&maps[c], base.home[v], s)?;
                        cd.z[c] = z;
                        cd.dz[c] = dz;
                        cd.d2z[c] = d2z;
                    } else if self.cutoff[v] > 0.0 {
                        let p = self.outer_position(base.home[v], v, s);
                        cd.z[c] = maps[c].apply(p);
                        cd.dz[c] = maps[c].derivative(p);
                        cd.d2z[c] = maps[c].second_derivative(p);
                    }
                }
            }
            faces.push(cd);
        }
        let home = (0..base.nv())
            .map(|v| if self.cutoff[v] > 0.0 { self.outer_position(base.home[v], v, s) } else { base.home[v] })
            .collect();
        Fiber::from_faces(home, faces, 2)
    }
}

impl SchifferSeam {
    /// Velocity `∂s` of every face corner in its face chart at parameter
    /// `s`, with vertices held fixed in their (translated) home charts.
    pub fn motion(&self, fx: &HyperbolicFixture, s: C64) -> Vec<[C64; 3]> {
        let base = &fx.fiber;
        base.faces
            .iter()
            .zip(&fx.corner_maps)
            .map(|(f, maps)| {
                let mut dt = [C64::default(); 3];
                if self.outer_face(f) {
                    for c in 0..3 {
                        let (v, w) = (f.v[c], base.home[f.v[c]]);
                        if self.region[v] == 1 {
                            let disc = (C64::new(1.0, 0.0) - 4.0 * s / (w * w)).sqrt();
                            let z = w * (1.0 + disc) / 2.0;
                            // g_s(z) = ζ fixed: g'(z) ż + 1/z = 0
                            dt[c] = maps[c].derivative(z) * (-1.0 / z) / (1.0 - s / (z * z));
                        } else if self.cutoff[v] > 0.0 {
                            dt[c] = maps[c].derivative(self.outer_position(w, v, s)) * (-self.cutoff[v] / w);
                        }
                    }
                }
                dt
            })
            .collect()
    }
}

/// The `∂̄` of the trivialization vector field with corner velocities
/// `motion`, on the faces of `fiber`.
pub fn trivialization_ks(fiber: &Fiber, motion: &[[C64; 3]]) -> Vec<C64> {
    fiber
        .faces
        .iter()
        .zip(motion)
        .map(|(f, dt)| {
            let g = f.grads();
            (0..3).map(|c| g[c] * 0.5 * dt[c]).sum()
        })
        .collect()
}

/// Basis `q_k` of a space of holomorphic sections with `q_k(anchor_j) =
/// δ_jk`. Over a family this frame is holomorphic in the parameter.
pub fn normalized_frame(space: &HarmonicSpace, anchors: &[usize]) -> Result<Vec<Vec<C64>>> {
    let r = space.basis.len();
    if anchors.len() != r {
        return Err(Error::Mismatch(format!("{} anchors for a rank-{r} space", anchors.len())));
    }
    let e = nalgebra::DMatrix::from_fn(r, r, |j, i| space.basis[i][anchors[j]]);
    let inv = e.try_inverse().ok_or_else(|| Error::Invalid("anchor vertices do not separate the sections".into()))?;
    Ok((0..r)
        .map(|k| {
            let mut q = linalg::zeros(space.basis[0].len());
            for i in 0..r {
                linalg::axpy(inv[(i, k)], &space.basis[i], &mut q);
            }
            q
        })
        .collect())
}

/// Position and 2-jet in the face chart of a seam vertex with inner
/// coordinate `zeta`, seen from an outer face with chart map `chart` (a
/// map of the outer coordinate `z`).
fn seam_corner(chart: &Mobius, zeta: C64, s: C64) -> Result<(C64, C64, C64)> {
    let disc = (C64::new(1.0, 0.0) - 4.0 * s / (zeta * zeta)).sqrt();
    let z = zeta * (1.0 + disc) / 2.0;
    let g1 = 1.0 - s / (z * z);
    if g1.norm() < 0.5 {
        return Err(Error::Invalid(format!("parameter {s} is too large for a seam at radius {:.3}", zeta.norm())));
    }
    let g2 = 2.0 * s / (z * z * z);
    let z1 = 1.0 / g1;
    let z2 = -g2 * z1 * z1 * z1;
    let x = chart.apply(z);
    let dx = chart.derivative(z) * z1;
    let d2x = chart.second_derivative(z) * z1 * z1 + chart.derivative(z) * z2;
    Ok((x, dx, d2x))
}

/// Seam radius in graph steps for a refinement level. Larger seams keep
/// the regluing resolved; the cutoff annulus must still fit inside the
/// polygon.
pub fn default_seam_steps(level: usize) -> usize {
    match level {
        0..=2 => 4,
        3 => 5,
        _ => 10,
    }
}

/// Builds a Schiffer family on a `(2·half+1)²` grid around `center` and
/// solves for the Kähler-Einstein metric on every fiber, using `threads`
/// worker threads.
pub fn schiffer_family(
    genus: usize,
    level: usize,
    seam_steps: usize,
    center: C64,
    spacing: f64,
    half: usize,
    ke_tol: f64,
    threads: usize,
) -> Result<(Family, SchifferSeam)> {
    let fx = hyperbolic_fixture(genus, level)?;
    let seam = SchifferSeam::new(&fx, seam_steps)?;
    let n = 2 * half + 1;
    let origin = center - C64::new(half as f64, half as f64) * spacing;
    let params: Vec<C64> = (0..n * n).map(|k| origin + C64::new((k % n) as f64, (k / n) as f64) * spacing).collect();
    let fibers = params.iter().map(|&s| seam.fiber(&fx, s)).collect::<Result<Vec<_>>>()?;
    let seed = Metric::poincare(&fx.fiber)?;
    let metrics = parallel_map(&fibers, threads, |f| solve_ke(f, &seed, ke_tol, 30).map(|k| k.metric))?;
    Ok((Family::new(origin, spacing, n, n, fibers, metrics)?, seam))
}

/// Order-preserving map over a slice on up to `threads` scoped threads.
pub fn parallel_map<T: Sync, U: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> Result<U> + Sync) -> Result<Vec<U>> {
    let threads = threads.max(1).min(items.len().max(1));
    let chunk = items.len().div_ceil(threads);
    let mut parts: Vec<Result<Vec<U>>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk.max(1))
            .map(|c| scope.spawn(|| c.iter().map(&f).collect::<Result<Vec<U>>>()))
            .collect();
        parts = handles.into_iter().map(|h| h.join().expect("worker thread panicked")).collect();
    });
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Horizontal lift of `λ∂s` at one grid point.
#[derive(Clone, Debug, Serialize)]
pub struct HorizontalLift {
    pub at: usize,
    pub direction: C64,
    /// `∂s log G` per vertex, home chart.
    pub psi: Vec<C64>,
    /// `g_{ss̄} = ∂s∂s̄ log G` per vertex, home chart.
    pub g_ss: Vec<f64>,
    /// `g_{sz̄}` per face, face chart.
    pub g_sz: Vec<C64>,
    /// Velocity of each face corner in its face chart.
    pub motion: Vec<[C64; 3]>,
    /// `a = -g_{sz̄}/G` per face, face chart.
    pub lift: Vec<C64>,
    /// Section part of `a` per vertex in the home chart, i.e. `a` minus the
    /// corner velocity, recovered by dual-area averaging.
    pub lift_vertex: Vec<C64>,
}

pub fn horizontal_lift(fam: &Family, at: usize, direction: C64) -> Result<HorizontalLift> {
    let (i, j) = fam.interior(at)?;
    let fiber = &fam.fibers[at];
    let metric = &fam.metrics[at];
    let ops = Operators::new(fiber, metric)?;
    let jet = ops.log_g_jet()?;
    let lam2 = direction.norm_sqr();
    let mut psi = Vec::with_capacity(fiber.nv());
    let mut g_ss = Vec::with_capacity(fiber.nv());
    for v in 0..fiber.nv() {
        let (d, dd) = parameter_derivatives(fam, i, j, |k| C64::new(fam.metrics[k].g[v].ln(), 0.0));
        psi.push(d * direction);
        g_ss.push(dd.re * lam2);
    }
    let nf = fiber.nf();
    let (mut motion, mut g_sz, mut lift) = (Vec::with_capacity(nf), Vec::with_capacity(nf), Vec::with_capacity(nf));
    let mut acc = vec![(C64::default(), 0.0); fiber.nv()];
    for (fi, f) in fiber.faces.iter().enumerate() {
        let grads = f.grads();
        let mut dt = [C64::default(); 3];
        let mut d = C64::default();
        for c in 0..3 {
            let (v_dt, _) = parameter_derivatives(fam, i, j, |k| fam.fibers[k].faces[fi].z[c]);
            let (v_dlog, _) = parameter_derivatives(fam, i, j, |k| (fam.fibers[k].faces[fi].dz[c] / f.dz[c]).ln());
            dt[c] = v_dt * direction;
            // ∂s log G at fixed face-chart position
            let dl_face = (jet[f.v[c]].d - f.d2z[c] / f.dz[c]) / f.dz[c];
            let psi_face = psi[f.v[c]] - v_dlog * direction - dl_face * dt[c];
            d += grads[c] * 0.5 * psi_face;
        }
        let a = -d / ops.g_face[fi];
        let w = f.dual_areas();
        for c in 0..3 {
            let home_w = w[c] / f.dz[c].norm_sqr();
            let e = &mut acc[f.v[c]];
            e.0 += (a - dt[c]) / f.dz[c] * home_w;
            e.1 += home_w;
        }
        motion.push(dt);
        g_sz.push(d);
        lift.push(a);
    }
    let lift_vertex = acc.iter().map(|(s, w)| s / *w).collect();
    Ok(HorizontalLift { at, direction, psi, g_ss, g_sz, motion, lift, lift_vertex })
}

/// A Kodaira-Spencer form `A`, a (0,1)-form with values in the tangent
/// bundle, on faces in face charts.
#[derive(Clone, Debug, Serialize)]
pub struct KsForm {
    pub coeffs: Vec<C64>,
    /// `A_{z̄z̄} = G A^z_{z̄}`.
    pub lowered: Vec<C64>,
    /// Harmonic projection `H(A)`.
    pub harmonic: Vec<C64>,
    pub norm_sq: f64,
    pub harmonic_norm_sq: f64,
    /// `‖∂̄*A‖ / ‖A‖` in the discrete L² norms.
    pub harmonicity_residual: f64,
    /// `‖A - H(A)‖ / ‖A‖`, the distance to the harmonic forms.
    pub harmonic_defect: f64,
    /// `sup |A_{β̄δ̄} - A_{δ̄β̄}| / sup |A|`; zero on curves.
    pub symmetry_residual: f64,
}

/// Number of low eigenpairs probed for harmonic spaces.
pub const HARMONIC_PROBE: usize = 8;

fn ks_from_coeffs(ops: &Operators, coeffs: Vec<C64>, forms: &HarmonicSpace) -> KsForm {
    let fm = ops.face_mass(-1, 1);
    let vm = ops.vertex_mass(-1);
    let norm_sq = linalg::mnorm(&fm, &coeffs).powi(2);
    let harmonic = forms.project(&coeffs);
    let harmonic_norm_sq = linalg::mnorm(&fm, &harmonic).powi(2);
    let rel = |x: f64| if norm_sq > 0.0 { x / norm_sq.sqrt() } else { 0.0 };
    let star = ops.dbar_star(-1).mul_vec(&coeffs);
    let rest: Vec<C64> = coeffs.iter().zip(&harmonic).map(|(a, h)| a - h).collect();
    KsForm {
        lowered: coeffs.iter().zip(&ops.g_face).map(|(a, g)| a * *g).collect(),
        harmonicity_residual: rel(linalg::mnorm(&vm, &star)),
        harmonic_defect: rel(linalg::mnorm(&fm, &rest)),
        symmetry_residual: 0.0,
        coeffs,
        harmonic,
        norm_sq,
        harmonic_norm_sq,
    }
}

/// `A = ∂̄a` from the horizontal lift; the corner velocities carry the
/// chart changes of `a`.
pub fn ks_form(fam: &Family, lift: &HorizontalLift) -> Result<KsForm> {
    let fiber = &fam.fibers[lift.at];
    let ops = Operators::new(fiber, &fam.metrics[lift.at])?;
    let forms = ops.harmonic_forms(-1, HARMONIC_PROBE)?;
    let section = ops.dbar(-1).mul_vec(&lift.lift_vertex);
    let coeffs = section.iter().zip(trivialization_form(fiber, lift)).map(|(a, b)| a + b).collect();
    Ok(ks_from_coeffs(&ops, coeffs, &forms))
}

fn trivialization_form(fiber: &Fiber, lift: &HorizontalLift) -> Vec<C64> {
    trivialization_ks(fiber, &lift.motion)
}

/// The representative `∂̄` of the trivialization vector field, which in
/// each face chart interpolates the corner velocities.
pub fn ks_from_trivialization(fam: &Family, lift: &HorizontalLift) -> Result<KsForm> {
    let fiber = &fam.fibers[lift.at];
    let ops = Operators::new(fiber, &fam.metrics[lift.at])?;
    let forms = ops.harmonic_forms(-1, HARMONIC_PROBE)?;
    Ok(ks_from_coeffs(&ops, trivialization_form(fiber, lift), &forms))
}

/// Weil-Petersson norm: the L² norm of the harmonic representative.
pub fn wp_norm(ks: &KsForm) -> f64 {
    ks.harmonic_norm_sq
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiRoute {
    Direct,
    Pde,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhiField {
    pub route: PhiRoute,
    pub values: Vec<f64>,
    pub min: f64,
    pub positive: bool,
    /// Largest difference between `g_{ss̄} - |g_{sz̄}|²/G` and the
    /// determinant ratio of the 2×2 metric matrix, direct route only.
    pub determinant_residual: Option<f64>,
}

impl PhiField {
    fn new(route: PhiRoute, values: Vec<f64>, determinant_residual: Option<f64>) -> PhiField {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        PhiField { route, positive: min > 0.0, min, values, determinant_residual }
    }
}

/// `φ = g_{ss̄} - |g_{sz̄}|²/G` at vertices, with `g_{sz̄} = -G a` in the
/// vertex chart.
pub fn phi_field_direct(fam: &Family, lift: &HorizontalLift) -> Result<PhiField> {
    let g = &fam.metrics[lift.at].g;
    let mut values = Vec::with_capacity(g.len());
    let mut det_res = 0.0f64;
    for v in 0..g.len() {
        let gsz = -g[v] * lift.lift_vertex[v];
        let phi = lift.g_ss[v] - gsz.norm_sqr() / g[v];
        // det [[G, g_{zs̄}], [g_{sz̄}, g_{ss̄}]] / G
        let det = (g[v] * lift.g_ss[v] - gsz.norm_sqr()) / g[v];
        det_res = det_res.max((det - phi).abs() / phi.abs().max(1.0));
        values.push(phi);
    }
    Ok(PhiField::new(PhiRoute::Direct, values, Some(det_res)))
}

/// Solves `(1 + □)φ = |A|²` in weak form with `A` the harmonic part of the
/// Kodaira-Spencer form.
pub fn phi_field_pde(fam: &Family, at: usize, ks: &KsForm) -> Result<PhiField> {
    let fiber = &fam.fibers[at];
    let ops = Operators::new(fiber, &fam.metrics[at])?;
    let fm = ops.face_mass(-1, 1);
    let mut load = vec![C64::default(); fiber.nv()];
    for (fi, f) in fiber.faces.iter().enumerate() {
        let share = fm[fi] * ks.harmonic[fi].norm_sqr() / 3.0;
        for &v in &f.v {
            load[v] += share;
        }
    }
    let mass = ops.vertex_mass(0);
    let a = ops.stiffness_dbar(0).add_scaled(C64::new(1.0, 0.0), &Csr::diag(&mass));
    let phi = BandLdl::factor(&a)?.solve(&load);
    Ok(PhiField::new(PhiRoute::Pde, phi.iter().map(|x| x.re).collect(), None))
}

/// `∫ φ G dV` over the fiber.
pub fn wp_via_fiber_integral(fam: &Family, at: usize, phi: &PhiField) -> Result<f64> {
    let ops = Operators::new(&fam.fibers[at], &fam.metrics[at])?;
    Ok(ops.vertex_mass(0).iter().zip(&phi.values).map(|(m, p)| m * p).sum())
}

/// Serre pairing `∫ ψ·χ dV` of a vertex section ψ of K^m with a face
/// (0,1)-form χ with values in K^{1-m}, on every grid point, together
/// with the relative `∂s̄` of the pairing at `at`.
#[derive(Clone, Debug, Serialize)]
pub struct SerrePairing {
    pub values: Vec<C64>,
    pub dbar_s: C64,
    pub relative_dbar_s: f64,
}

pub fn serre_pairing(fam: &Family, at: usize, m: i32, psi: &[Vec<C64>], chi: &[Vec<C64>]) -> Result<SerrePairing> {
    let (i, j) = fam.interior(at)?;
    if psi.len() != fam.fibers.len() || chi.len() != fam.fibers.len() {
        return Err(Error::Mismatch("one section and one form per grid point are required".into()));
    }
    let mut values: Vec<C64> = Vec::with_capacity(fam.fibers.len());
    for (k, f) in fam.fibers.iter().enumerate() {
        if psi[k].len() != f.nv() || chi[k].len() != f.nf() {
            return Err(Error::Mismatch(format!("grid point {k}: field sizes do not match the fiber")));
        }
        let ops = Operators::new(f, &fam.metrics[k])?;
        let avg = ops.face_average(m, &psi[k]);
        values.push(f.faces.iter().enumerate().map(|(fi, face)| 2.0 * face.area() * avg[fi] * chi[k][fi]).sum());
    }
    // ∂s̄ = conj(∂s conj(·))
    let (d, _) = parameter_derivatives(fam, i, j, |k| values[k].conj());
    let dbar_s = d.conj();
    let scale = values[at].norm();
    Ok(SerrePairing { relative_dbar_s: if scale > 0.0 { dbar_s.norm() / scale } else { 0.0 }, values, dbar_s })
}
