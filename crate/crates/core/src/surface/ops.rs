//! Metrics, mass matrices and the ∂̄ / ∂ operators on a fiber.
//!
//! Conventions: the metric is `ω = i G dz∧dz̄` with volume form
//! `dV = i dz∧dz̄ = 2 dx dy`, and the pointwise norm of a coefficient of
//! holomorphic weight `w` (K^w) and antiholomorphic degree `q` is
//! `|f|² G^{-w-q}`. Sections of K^k at vertices use lumped mass; fields on
//! faces use the face-centroid value of G.

use super::{field::cells_of, Bundle, Cells, Fiber, FormField};
use crate::linalg::{self, Csr, EigenPairs, Triplets};
use crate::{Error, Result, C64};

/// Metric density G per vertex, in the vertex's home chart.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    pub g: Vec<f64>,
}

impl Metric {
    pub fn new(fiber: &Fiber, g: Vec<f64>) -> Result<Metric> {
        if g.len() != fiber.nv() {
            return Err(Error::Mismatch(format!("{} densities for {} vertices", g.len(), fiber.nv())));
        }
        if let Some(v) = g.iter().position(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::Positivity(format!("metric density {} at vertex {v}", g[v])));
        }
        Ok(Metric { g })
    }

    /// Evaluates a density given in home coordinates.
    pub fn from_fn(fiber: &Fiber, f: impl Fn(C64) -> f64) -> Result<Metric> {
        Metric::new(fiber, fiber.home.iter().map(|&z| f(z)).collect())
    }

    /// Poincaré density `2/(1-|z|²)²`, which satisfies `∂∂̄ log G = G`.
    pub fn poincare(fiber: &Fiber) -> Result<Metric> {
        Metric::from_fn(fiber, |z| 2.0 / (1.0 - z.norm_sqr()).powi(2))
    }

    pub fn scaled(&self, lambda: f64) -> Metric {
        Metric { g: self.g.iter().map(|x| x * lambda).collect() }
    }
}

/// Operator factory for one fiber and metric.
pub struct Operators<'a> {
    pub fiber: &'a Fiber,
    pub g: Vec<f64>,
    /// log G in each face chart, per corner.
    pub log_g_corner: Vec<[f64; 3]>,
    /// Face-centroid density (geometric mean of the corner values).
    pub g_face: Vec<f64>,
    areas: Vec<f64>,
    grads: Vec<[C64; 3]>,
    /// `dV`-area of each vertex's dual cell, in its home chart.
    dual_area: Vec<f64>,
}

fn cpow(z: C64, k: i32) -> C64 {
    if k == 0 {
        C64::new(1.0, 0.0)
    } else {
        z.powi(k)
    }
}

impl<'a> Operators<'a> {
    pub fn new(fiber: &'a Fiber, metric: &Metric) -> Result<Operators<'a>> {
        let metric = Metric::new(fiber, metric.g.clone())?;
        let log_g_corner: Vec<[f64; 3]> = fiber
            .faces
            .iter()
            .map(|f| [0, 1, 2].map(|c| metric.g[f.v[c]].ln() - f.dz[c].norm_sqr().ln()))
            .collect();
        let g_face = log_g_corner.iter().map(|l| ((l[0] + l[1] + l[2]) / 3.0).exp()).collect();
        let mut dual_area = vec![0.0; fiber.nv()];
        for f in &fiber.faces {
            let w = f.dual_areas();
            for c in 0..3 {
                dual_area[f.v[c]] += 2.0 * w[c] / f.dz[c].norm_sqr();
            }
        }
        Ok(Operators {
            fiber,
            g: metric.g,
            log_g_corner,
            g_face,
            areas: fiber.faces.iter().map(|f| f.area()).collect(),
            grads: fiber.faces.iter().map(|f| f.grads()).collect(),
            dual_area,
        })
    }

    pub fn nv(&self) -> usize {
        self.fiber.nv()
    }

    pub fn nf(&self) -> usize {
        self.fiber.nf()
    }

    /// Euclidean dual-cell area of a vertex in its home chart, with `dV`.
    pub fn dual_area(&self, v: usize) -> f64 {
        self.dual_area[v]
    }

    /// Lumped mass for vertex sections of K^k: `G^{1-k}` times the
    /// circumcentric dual-cell area.
    pub fn vertex_mass(&self, k: i32) -> Vec<f64> {
        let mut m = self.dual_area.clone();
        for (mv, g) in m.iter_mut().zip(&self.g) {
            *mv *= g.powi(1 - k);
        }
        m
    }

    /// Face mass for coefficients of holomorphic weight `w` and
    /// antiholomorphic degree `q`.
    pub fn face_mass(&self, w: i32, q: i32) -> Vec<f64> {
        self.areas.iter().zip(&self.g_face).map(|(a, g)| 2.0 * a * g.powi(1 - w - q)).collect()
    }

    pub fn mass(&self, cells: Cells, w: i32, q: i32) -> Vec<f64> {
        match cells {
            Cells::Vertex => self.vertex_mass(w),
            Cells::Face => self.face_mass(w, q),
        }
    }

    pub fn volume(&self) -> f64 {
        self.vertex_mass(0).iter().sum()
    }

    /// Values of a vertex section of K^k at the corners of each face, in
    /// the face chart.
    pub fn corner_values(&self, k: i32, x: &[C64]) -> Vec<[C64; 3]> {
        self.fiber
            .faces
            .iter()
            .map(|f| [0, 1, 2].map(|c| x[f.v[c]] * cpow(f.dz[c], -k)))
            .collect()
    }

    /// Face-centroid values of a vertex section of K^k.
    pub fn face_average(&self, k: i32, x: &[C64]) -> Vec<C64> {
        self.corner_values(k, x).iter().map(|v| (v[0] + v[1] + v[2]) / 3.0).collect()
    }

    /// `∂_z log G` on each face.
    pub fn dlog_g(&self) -> Vec<C64> {
        self.log_g_corner
            .iter()
            .zip(&self.grads)
            .map(|(l, gr)| (0..3).map(|c| gr[c].conj() * (0.5 * l[c])).sum())
            .collect()
    }

    /// `∫ λ_v ∂∂̄ log G dV` for each vertex hat function `λ_v`: the
    /// discrete curvature form, computed from the face-chart values of
    /// log G.
    ///
    /// log G is not a function: its face-chart representatives differ by
    /// `log|T'|²` across edges where the chart changes. Integrating by
    /// parts face by face therefore leaves the flux of that harmonic
    /// difference on such edges, which is added back from the transition
    /// derivatives at the edge endpoints.
    pub fn weak_ddbar_log_g(&self) -> Vec<f64> {
        let mut out = self.chart_flux();
        for (fi, f) in self.fiber.faces.iter().enumerate() {
            let gr = &self.grads[fi];
            let l = &self.log_g_corner[fi];
            let dl: C64 = (0..3).map(|c| gr[c] * (0.5 * l[c])).sum();
            for c in 0..3 {
                out[f.v[c]] -= 2.0 * self.areas[fi] * (gr[c].conj() * 0.5 * dl).re;
            }
        }
        out
    }

    /// Affine part of the weak curvature coming from chart changes: for
    /// each edge whose two faces use different charts, the flux of
    /// `H = log|T'|²` (T the transition between the face charts) against
    /// the hat functions of its endpoints. `∂_z log T'` is exact at the
    /// endpoints and integrated linearly along the edge.
    pub fn chart_flux(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nv()];
        for (ei, e) in self.fiber.edges.iter().enumerate() {
            let [fa, fb] = self.fiber.edge_faces[ei];
            let (f, g) = (&self.fiber.faces[fa], &self.fiber.faces[fb]);
            let corner = |face: &super::Face, v: usize| face.v.iter().position(|&x| x == v).unwrap();
            let (a, b) = (e.v[0], e.v[1]);
            let (ca, cb) = (corner(f, a), corner(f, b));
            let (ga, gb) = (corner(g, a), corner(g, b));
            let dphi = |cf: usize, cg: usize| (g.d2z[cg] / g.dz[cg] - f.d2z[cf] / f.dz[cf]) / f.dz[cf];
            let (pa, pb) = (dphi(ca, ga), dphi(cb, gb));
            if pa.norm() + pb.norm() == 0.0 {
                continue;
            }
            let t = f.z[cb] - f.z[ca];
            // outward normal of f: f runs a→b counter-clockwise when b
            // follows a in its corner order
            let tangent = if cb == (ca + 1) % 3 { t } else { -t };
            let n = C64::new(0.0, -1.0) * tangent / tangent.norm();
            let (fa_n, fb_n) = ((pa * n).re, (pb * n).re);
            let len = t.norm();
            out[a] += len * (fa_n / 3.0 + fb_n / 6.0);
            out[b] += len * (fb_n / 3.0 + fa_n / 6.0);
        }
        // The total is a quadrature of the Gauss-Bonnet integral. Its
        // O(h²) defect depends on the mesh, so it is removed to keep the
        // hyperbolic volume exact across deformations of the mesh.
        let total: f64 = out.iter().sum();
        let exact = 4.0 * std::f64::consts::PI * (self.fiber.genus as f64 - 1.0);
        if self.fiber.genus >= 2 && total > 0.0 {
            out.iter_mut().for_each(|x| *x *= exact / total);
        }
        out
    }

    /// ∂̄ on vertex sections of K^k, giving face (0,1)-forms with values
    /// in K^k.
    pub fn dbar(&self, k: i32) -> Csr {
        let mut t = Triplets::new(self.nf(), self.nv());
        for (fi, f) in self.fiber.faces.iter().enumerate() {
            for c in 0..3 {
                t.push(fi, f.v[c], self.grads[fi][c] * 0.5 * cpow(f.dz[c], -k));
            }
        }
        t.into_csr()
    }

    /// Chern (1,0)-connection on vertex sections of K^k with the metric
    /// `G^{-k}`: `∂u - k u ∂log G`, a face field of holomorphic weight k+1.
    pub fn del(&self, k: i32) -> Csr {
        let dl = self.dlog_g();
        let mut t = Triplets::new(self.nf(), self.nv());
        for (fi, f) in self.fiber.faces.iter().enumerate() {
            for c in 0..3 {
                let d = self.grads[fi][c].conj() * 0.5 - dl[fi] * (k as f64 / 3.0);
                t.push(fi, f.v[c], d * cpow(f.dz[c], -k));
            }
        }
        t.into_csr()
    }

    /// `M_in⁻¹ Dᴴ M_out`, the adjoint of `d` for the given masses.
    pub fn adjoint(d: &Csr, m_in: &[f64], m_out: &[f64]) -> Csr {
        let inv: Vec<f64> = m_in.iter().map(|x| 1.0 / x).collect();
        d.scale_rows(m_out).adjoint().scale_rows(&inv)
    }

    pub fn dbar_star(&self, k: i32) -> Csr {
        Self::adjoint(&self.dbar(k), &self.vertex_mass(k), &self.face_mass(k, 1))
    }

    pub fn del_star(&self, k: i32) -> Csr {
        Self::adjoint(&self.del(k), &self.vertex_mass(k), &self.face_mass(k + 1, 0))
    }

    /// Hermitian stiffness `Dᴴ M_f D` of ∂̄ on K^k.
    pub fn stiffness_dbar(&self, k: i32) -> Csr {
        let d = self.dbar(k);
        d.scale_rows(&self.face_mass(k, 1)).adjoint().matmul(&d)
    }

    pub fn stiffness_del(&self, k: i32) -> Csr {
        let d = self.del(k);
        d.scale_rows(&self.face_mass(k + 1, 0)).adjoint().matmul(&d)
    }

    /// `□ = ∂̄*∂̄` on vertex sections of K^k.
    pub fn box_dbar(&self, k: i32) -> Csr {
        self.dbar_star(k).matmul(&self.dbar(k))
    }

    /// `□_∂ = ∂*∂` on vertex sections of K^k.
    pub fn box_del(&self, k: i32) -> Csr {
        self.del_star(k).matmul(&self.del(k))
    }

    /// `□ = ∂̄∂̄*` on face (0,1)-forms with values in K^k.
    pub fn box_face(&self, k: i32) -> Csr {
        self.dbar(k).matmul(&self.dbar_star(k))
    }

    /// Laplacian for a form type, assembled as `∂̄*∂̄ + ∂̄∂̄*` with the
    /// terms that exist on a curve.
    pub fn laplacian(&self, p: u8, q: u8, bundle: Bundle) -> Result<Csr> {
        super::field::check_bidegree(p, q)?;
        let w = bundle.power() + p as i32;
        match (p, q) {
            (_, 0) if cells_of(p, q) == Cells::Vertex => Ok(self.box_dbar(w)),
            (0, 1) => Ok(self.box_face(w)),
            _ => Err(Error::Bidegree(format!("no face Laplacian for ({p},{q}) in this discretization"))),
        }
    }

    /// Solves `(□ + shift) x = rhs` on vertex sections of K^k. Positive
    /// shifts use conjugate gradients, others MINRES; both run on the
    /// symmetrically mass-scaled system.
    pub fn solve_shifted(&self, k: i32, shift: f64, rhs: &[C64], tol: f64) -> Result<Vec<C64>> {
        let m = self.vertex_mass(k);
        let isq: Vec<f64> = m.iter().map(|x| 1.0 / x.sqrt()).collect();
        let s = self.stiffness_dbar(k).scale_rows(&isq).adjoint().scale_rows(&isq);
        let a = s.add_scaled(C64::new(shift, 0.0), &Csr::identity(m.len()));
        let b: Vec<C64> = rhs.iter().zip(&m).map(|(r, w)| r * w.sqrt()).collect();
        let max_iter = 20 * m.len() + 1000;
        let (y, stats) = if shift > 0.0 { linalg::pcg(&a, &b, tol, max_iter)? } else { linalg::minres(&a, &b, tol, max_iter)? };
        if !(stats.residual <= tol * 10.0) {
            return Err(Error::NoConvergence { what: "shifted Laplacian solve".into(), residual: stats.residual, iterations: stats.iterations });
        }
        Ok(y.iter().zip(&isq).map(|(v, w)| v * *w).collect())
    }

    /// Lowest `count` eigenpairs of `□` on vertex sections of K^k.
    pub fn low_spectrum(&self, k: i32, count: usize) -> Result<EigenPairs> {
        let s = self.stiffness_dbar(k);
        linalg::smallest_eigen(&s, &self.vertex_mass(k), count, 0.1, 1e-10, 300, 7)
    }

    /// Near-kernel of `□` on vertex sections of K^k: the eigenvectors
    /// below the largest relative gap among the lowest `probe` eigenvalues.
    pub fn harmonic_sections(&self, k: i32, probe: usize) -> Result<HarmonicSpace> {
        let pairs = self.low_spectrum(k, probe)?;
        let lam = &pairs.values;
        let floor = lam.iter().fold(0.0f64, |a, v| a.max(v.abs())) * 1e-14;
        let mut best = (0usize, 1.0f64);
        for r in 1..lam.len() {
            let ratio = lam[r].max(floor) / lam[r - 1].max(floor);
            if ratio > best.1 {
                best = (r, ratio);
            }
        }
        let rank = best.0;
        Ok(HarmonicSpace {
            weight: k,
            mass: self.vertex_mass(k),
            basis: pairs.vectors[..rank].to_vec(),
            eigenvalues: lam.clone(),
            residuals: pairs.residuals.clone(),
            gap_ratio: best.1,
        })
    }

    /// Harmonic (0,1)-forms with values in K^m: Serre duals of the
    /// holomorphic sections of K^{1-m}, with their ∂̄-exact part removed so
    /// that the span is exactly orthogonal to the image of ∂̄.
    pub fn harmonic_forms(&self, m: i32, probe: usize) -> Result<HarmonicSpace> {
        let sections = self.harmonic_sections(1 - m, probe)?;
        let mass = self.face_mass(m, 1);
        let exact = self.exact_part_solver(m)?;
        let basis = sections
            .basis
            .iter()
            .map(|s| {
                let eta = self.dual_form(m, s);
                let d_a = exact(&eta);
                eta.iter().zip(&d_a).map(|(e, d)| e - d).collect()
            })
            .collect();
        let basis = linalg::m_orthonormalize(&mass, basis);
        if basis.len() != sections.rank() {
            return Err(Error::Invariant("dual forms became dependent after removing exact parts".into()));
        }
        Ok(HarmonicSpace { weight: m, mass, basis, ..sections })
    }

    /// Returns the map `η ↦ a` with `∂̄a` the L²-orthogonal projection of
    /// a face field of K^m onto the image of ∂̄. For `m = 0` the potential
    /// vanishes at vertex 0.
    pub fn dbar_potential_solver(&self, m: i32) -> Result<impl Fn(&[C64]) -> Vec<C64> + '_> {
        let d = self.dbar(m);
        let mf = self.face_mass(m, 1);
        let mut s = d.scale_rows(&mf).adjoint().matmul(&d);
        if m == 0 {
            // constants span the kernel; pin the first vertex
            s = pin_first(&s);
        }
        let ldl = linalg::BandLdl::factor(&s)?;
        Ok(move |eta: &[C64]| {
            let weighted: Vec<C64> = eta.iter().zip(&mf).map(|(e, w)| e * *w).collect();
            let mut rhs = d.adjoint_mul_vec(&weighted);
            if m == 0 {
                rhs[0] = C64::new(0.0, 0.0);
            }
            ldl.solve(&rhs)
        })
    }

    /// Returns the map `η ↦ ∂̄a`, the exact part of a face field of K^m.
    pub fn exact_part_solver(&self, m: i32) -> Result<impl Fn(&[C64]) -> Vec<C64> + '_> {
        let d = self.dbar(m);
        let potential = self.dbar_potential_solver(m)?;
        Ok(move |eta: &[C64]| d.mul_vec(&potential(eta)))
    }

    /// Harmonic part of a field: projection onto holomorphic sections for
    /// vertex fields, onto harmonic (0,1)-forms for face fields.
    pub fn harmonic_project(&self, f: &FormField, probe: usize) -> Result<FormField> {
        let w = f.holomorphic_weight();
        let space = match f.cells() {
            Cells::Vertex => self.harmonic_sections(w, probe)?,
            Cells::Face => self.harmonic_forms(w, probe)?,
        };
        if f.coeffs.len() != space.mass.len() {
            return Err(Error::Mismatch(format!("{} coefficients on {} cells", f.coeffs.len(), space.mass.len())));
        }
        Ok(FormField { coeffs: space.project(&f.coeffs), ..f.clone() })
    }

    /// First derivatives and `∂∂̄` of `log G` at each vertex, in its home
    /// chart, from a least-squares quadratic fit over the vertex star.
    /// Neighbours are pulled into the home chart through the Möbius map
    /// with the corner's stored 2-jet, which is the exact transition for
    /// hyperbolic charts.
    pub fn log_g_jet(&self) -> Result<Vec<LogJet>> {
        let fiber = self.fiber;
        let nv = fiber.nv();
        let mut rows: Vec<Vec<(C64, f64)>> = vec![Vec::new(); nv];
        for f in &fiber.faces {
            for c in 0..3 {
                let (z0, dz0) = (f.z[c], f.dz[c]);
                let a = f.d2z[c] / (2.0 * dz0);
                for o in [(c + 1) % 3, (c + 2) % 3] {
                    let w = (f.z[o] - z0) / dz0;
                    let t = w / (1.0 + a * w);
                    let l_face = self.g[f.v[o]].ln() - f.dz[o].norm_sqr().ln();
                    let jac = dz0 / (1.0 - a * t).powi(2);
                    let row = &mut rows[f.v[c]];
                    if !row.iter().any(|(p, _)| (*p - t).norm() < 1e-12) {
                        row.push((t, l_face + jac.norm_sqr().ln()));
                    }
                }
            }
        }
        rows.iter()
            .enumerate()
            .map(|(v, pts)| {
                let l0 = self.g[v].ln();
                let h = pts.iter().map(|(t, _)| t.norm()).fold(0.0, f64::max);
                let a = nalgebra::DMatrix::from_fn(pts.len(), 5, |i, j| {
                    let (x, y) = (pts[i].0.re / h, pts[i].0.im / h);
                    [x, y, x * x, x * y, y * y][j]
                });
                let b = nalgebra::DVector::from_fn(pts.len(), |i, _| pts[i].1 - l0);
                let c = a
                    .svd(true, true)
                    .solve(&b, 1e-12)
                    .map_err(|e| Error::Stencil(format!("log G fit at vertex {v}: {e}")))?;
                Ok(LogJet {
                    // ∂ = (∂x - i∂y)/2, ∂∂̄ = Δ/4 and Δq = 2(c_xx + c_yy)
                    d: C64::new(c[0], -c[1]) / (2.0 * h),
                    ddbar: (c[2] + c[4]) / (2.0 * h * h),
                })
            })
            .collect()
    }

    /// Discrete L² inner product of two fields of the same kind.
    pub fn l2_inner(&self, a: &FormField, b: &FormField) -> Result<C64> {
        a.same_kind(b)?;
        let m = self.mass(a.cells(), a.holomorphic_weight(), a.q as i32);
        if m.len() != a.coeffs.len() {
            return Err(Error::Mismatch(format!("{} coefficients on {} cells", a.coeffs.len(), m.len())));
        }
        Ok(linalg::mdot(&m, &a.coeffs, &b.coeffs))
    }

    /// Serre-dual (0,1)-form `conj(σ)·G^m` with values in K^m for a vertex
    /// section σ of K^{1-m}, sampled at face centroids.
    pub fn dual_form(&self, m: i32, sigma: &[C64]) -> Vec<C64> {
        self.face_average(1 - m, sigma).iter().zip(&self.g_face).map(|(s, g)| s.conj() * g.powi(m)).collect()
    }
}

/// Local derivatives of `log G` at a vertex.
#[derive(Clone, Copy, Debug)]
pub struct LogJet {
    /// `∂ log G`.
    pub d: C64,
    /// `∂∂̄ log G`.
    pub ddbar: f64,
}

/// Orthonormal basis of (approximately) holomorphic sections of K^k.
#[derive(Clone, Debug)]
pub struct HarmonicSpace {
    pub weight: i32,
    pub mass: Vec<f64>,
    pub basis: Vec<Vec<C64>>,
    /// All probed eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    /// λ_rank / λ_{rank-1}.
    pub gap_ratio: f64,
}

impl HarmonicSpace {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn coefficients(&self, x: &[C64]) -> Vec<C64> {
        self.basis.iter().map(|b| linalg::mdot(&self.mass, x, b)).collect()
    }

    pub fn project(&self, x: &[C64]) -> Vec<C64> {
        let mut out = linalg::zeros(x.len());
        for (c, b) in self.coefficients(x).into_iter().zip(&self.basis) {
            linalg::axpy(c, b, &mut out);
        }
        out
    }
}

/// Replaces the first row and column by the identity.
fn pin_first(a: &Csr) -> Csr {
    let mut t = Triplets::new(a.nrows, a.ncols);
    for i in 0..a.nrows {
        for (j, v) in a.row(i) {
            if i != 0 && j != 0 {
                t.push(i, j, v);
            }
        }
    }
    t.push(0, 0, C64::new(1.0, 0.0));
    t.into_csr()
}
