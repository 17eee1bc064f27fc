//! Curvature formulas on a triangulated curve (`n = 1`).
//!
//! Representations, for a Kodaira-Spencer form `A` given as face values
//! of a T-valued (0,1)-form (holomorphic weight -1):
//!
//! * a K-valued (1,0)-form is a vertex section of K² (`p = 1` classes of
//!   the twisted Hodge bundle are holomorphic quadratic differentials);
//! * a K-valued (0,1)-form is a face field of weight 1 (`p = 0`);
//! * `A ∪ ψ` of a (1,0)-form with values in K^{k-1} is the face
//!   (0,1)-form `A · ψ` with values in K^{k-1};
//! * `Ā ∪ χ` of a (0,1)-form with values in K^m is the face (1,0)-form
//!   `conj(A) · χ` with values in K^m.
//!
//! The Green operators act on functions, on face (0,1)-forms (through the
//! vertex potential of their exact part) and on vertex sections.

use super::{Backend, CurvatureReport, Formula};
use crate::family::{horizontal_lift, ks_form, normalized_frame, parameter_derivatives, Family};
use crate::linalg::{self, mdot};
use nalgebra::DMatrix;
use crate::surface::{Bundle, Cells, FormField, Operators};
use crate::{Error, Result, C64};
use serde::Serialize;

/// Tolerance of the iterative Green solves.
pub const GREEN_TOL: f64 = 1e-12;

fn require_faces(ops: &Operators, a: &[C64]) -> Result<()> {
    if a.len() != ops.nf() {
        return Err(Error::Mismatch(format!("{} Kodaira-Spencer coefficients on {} faces", a.len(), ops.nf())));
    }
    Ok(())
}

/// `A ∪ ψ` for a vertex field ψ read as a (1,0)-form with values in
/// K^{k-1}, k its bundle power.
pub fn cup(ops: &Operators, a: &[C64], psi: &FormField) -> Result<FormField> {
    require_faces(ops, a)?;
    if psi.cells() != Cells::Vertex || psi.conjugate {
        return Err(Error::Bidegree(format!(
            "A∪ lowers the holomorphic degree; ({},{}) fields have none in this representation",
            psi.p, psi.q
        )));
    }
    let k = psi.holomorphic_weight();
    let avg = ops.face_average(k, &psi.coeffs);
    FormField::new(0, 1, Bundle(k - 1), a.iter().zip(&avg).map(|(x, y)| x * y).collect())
}

/// `Ā ∪ χ` for a face (0,1)-form χ with values in K^m.
pub fn cup_bar(ops: &Operators, a: &[C64], chi: &FormField) -> Result<FormField> {
    require_faces(ops, a)?;
    if (chi.p, chi.q) != (0, 1) || chi.conjugate {
        return Err(Error::Bidegree(format!("Ā∪ needs a (0,1)-form, got ({},{})", chi.p, chi.q)));
    }
    FormField::new(1, 0, chi.bundle, a.iter().zip(&chi.coeffs).map(|(x, y)| x.conj() * y).collect())
}

/// Face lift of a vertex field read as a (1,0)-form with values in
/// K^{k-1}: the face (1,0)-form with the same centroid values. It is the
/// representation in which `cup` and `cup_bar` are adjoint.
pub fn face_form(ops: &Operators, psi: &FormField) -> Result<FormField> {
    if psi.cells() != Cells::Vertex {
        return Err(Error::Bidegree("face_form needs a vertex field".into()));
    }
    let k = psi.holomorphic_weight();
    FormField::new(1, 0, Bundle(k - 1), ops.face_average(k, &psi.coeffs))
}

/// Vertex values of a piecewise constant function: at each vertex, the
/// average over its dual cell weighted by the face mass. Constants are
/// reproduced exactly.
fn face_to_vertex(ops: &Operators, f: &[f64]) -> Vec<f64> {
    let fm = ops.face_mass(0, 0);
    let mut num = vec![0.0; ops.nv()];
    let mut den = vec![0.0; ops.nv()];
    for (fi, face) in ops.fiber.faces.iter().enumerate() {
        let d = face.dual_areas();
        let a = face.area();
        for c in 0..3 {
            let w = fm[fi] * d[c] / a;
            num[face.v[c]] += w * f[fi];
            den[face.v[c]] += w;
        }
    }
    num.iter().zip(&den).map(|(n, d)| n / d).collect()
}

/// `(□ + 1)⁻¹ f` for a function given by face values, as vertex values.
pub fn green_plus_function(ops: &Operators, f: &[f64]) -> Result<Vec<f64>> {
    let rhs: Vec<C64> = face_to_vertex(ops, f).iter().map(|b| C64::new(*b, 0.0)).collect();
    Ok(ops.solve_shifted(0, 1.0, &rhs, GREEN_TOL)?.iter().map(|x| x.re).collect())
}

/// `(□ + 1)⁻¹ u` for a face (0,1)-form with values in K^m, where
/// `□ = ∂̄∂̄*`. With `y = (□_vertex + 1)⁻¹ ∂̄* u` the solution is
/// `u - ∂̄y`.
pub fn green_plus_form(ops: &Operators, u: &FormField) -> Result<FormField> {
    if (u.p, u.q) != (0, 1) {
        return Err(Error::Bidegree(format!("expected a (0,1)-form, got ({},{})", u.p, u.q)));
    }
    let m = u.holomorphic_weight();
    let rhs = ops.dbar_star(m).mul_vec(&u.coeffs);
    let y = ops.solve_shifted(m, 1.0, &rhs, GREEN_TOL)?;
    let dy = ops.dbar(m).mul_vec(&y);
    Ok(FormField { coeffs: u.coeffs.iter().zip(&dy).map(|(a, b)| a - b).collect(), ..u.clone() })
}

/// L² projection of a face (1,0)-form with values in K^m onto vertex
/// sections of K^{m+1}.
pub fn to_vertex_section(ops: &Operators, u: &FormField) -> Result<FormField> {
    if (u.p, u.q) != (1, 0) {
        return Err(Error::Bidegree(format!("expected a (1,0)-form, got ({},{})", u.p, u.q)));
    }
    let k = u.holomorphic_weight();
    let fm = ops.face_mass(k, 0);
    let m = ops.vertex_mass(k);
    let mut b = linalg::zeros(ops.nv());
    for (fi, face) in ops.fiber.faces.iter().enumerate() {
        for c in 0..3 {
            b[face.v[c]] += u.coeffs[fi] * fm[fi] / 3.0 * cpow_conj(face.dz[c], -k);
        }
    }
    let coeffs = b.iter().zip(&m).map(|(x, w)| x / *w).collect();
    FormField::new(0, 0, Bundle(k), coeffs)
}

fn cpow_conj(z: C64, k: i32) -> C64 {
    z.conj().powi(k)
}

/// Sesquilinear curvature terms `T_i(ψ_k, ψ_l)` for a list of classes.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureMatrices {
    pub term1: Vec<Vec<C64>>,
    pub term2: Vec<Vec<C64>>,
    pub term3: Vec<Vec<C64>>,
}

impl CurvatureMatrices {
    pub fn total(&self) -> Vec<Vec<C64>> {
        let r = self.term1.len();
        (0..r).map(|k| (0..r).map(|l| self.term1[k][l] + self.term2[k][l] + self.term3[k][l]).collect()).collect()
    }
}

/// Pointwise `|A|²` on faces (A has weight -1 and degree (0,1)).
fn pointwise_norm_sq(a: &[C64]) -> Vec<f64> {
    a.iter().map(|x| x.norm_sqr()).collect()
}

/// Curvature of the twisted Hodge bundle for `n = 1` in the directions
/// `A, Ā`, evaluated on classes `ψ_k` that are all either holomorphic
/// quadratic differentials (vertex sections of K², `p = 1`) or harmonic
/// K-valued (0,1)-forms (`p = 0`):
///
/// * `T1 = ∫ (□+1)⁻¹(|A|²) ⟨ψ_k, ψ_l⟩ dV`,
/// * `T2 = ⟨(□+1)⁻¹(A∪ψ_k), A∪ψ_l⟩`, zero for `p = 0`,
/// * `T3 = ⟨(□-1)⁻¹(Ā∪ψ_k), Ā∪ψ_l⟩`, zero for `p = 1`.
pub fn twisted_hodge_matrices(ops: &Operators, a: &[C64], psi: &[FormField]) -> Result<CurvatureMatrices> {
    require_faces(ops, a)?;
    let r = psi.len();
    let zero = vec![vec![C64::default(); r]; r];
    let mut out = CurvatureMatrices { term1: zero.clone(), term2: zero.clone(), term3: zero };
    if r == 0 {
        return Ok(out);
    }
    let kind = &psi[0];
    for p in psi {
        kind.same_kind(p)?;
    }
    let x = green_plus_function(ops, &pointwise_norm_sq(a))?;
    let xc: Vec<C64> = x.iter().map(|v| C64::new(*v, 0.0)).collect();
    match (kind.p, kind.q, kind.cells()) {
        (0, 0, Cells::Vertex) if kind.bundle == Bundle(2) => {
            let m = ops.vertex_mass(2);
            let cups: Vec<FormField> = psi.iter().map(|p| cup(ops, a, p)).collect::<Result<_>>()?;
            let greens: Vec<FormField> = cups.iter().map(|u| green_plus_form(ops, u)).collect::<Result<_>>()?;
            for k in 0..r {
                let weighted: Vec<C64> = psi[k].coeffs.iter().zip(&xc).map(|(p, x)| p * x).collect();
                for l in 0..r {
                    out.term1[k][l] = mdot(&m, &weighted, &psi[l].coeffs);
                    out.term2[k][l] = ops.l2_inner(&greens[k], &cups[l])?;
                }
            }
        }
        (0, 1, Cells::Face) if kind.bundle == Bundle::CANONICAL => {
            let fm = ops.face_mass(1, 1);
            let xf = face_values(ops, &x);
            let raised: Vec<FormField> =
                psi.iter().map(|p| to_vertex_section(ops, &cup_bar(ops, a, p)?)).collect::<Result<_>>()?;
            let greens: Vec<Vec<C64>> =
                raised.iter().map(|u| ops.solve_shifted(2, -1.0, &u.coeffs, GREEN_TOL)).collect::<Result<_>>()?;
            let mv = ops.vertex_mass(2);
            for k in 0..r {
                let weighted: Vec<C64> = psi[k].coeffs.iter().zip(&xf).map(|(p, x)| p * *x).collect();
                for l in 0..r {
                    out.term1[k][l] = mdot(&fm, &weighted, &psi[l].coeffs);
                    out.term3[k][l] = mdot(&mv, &greens[k], &raised[l].coeffs);
                }
            }
        }
        _ => {
            return Err(Error::Bidegree(format!(
                "twisted Hodge classes on a curve are K²-sections or K-valued (0,1)-forms, got ({},{}) {:?}",
                kind.p, kind.q, kind.bundle
            )))
        }
    }
    Ok(out)
}

/// Face-centroid values of a vertex function.
fn face_values(ops: &Operators, x: &[f64]) -> Vec<f64> {
    ops.fiber.faces.iter().map(|f| (x[f.v[0]] + x[f.v[1]] + x[f.v[2]]) / 3.0).collect()
}

/// Curvature report `R(A, Ā, ψ, ψ̄)` of the twisted Hodge bundle.
pub fn curvature_twisted_hodge(ops: &Operators, a: &[C64], psi: &FormField, probe: usize) -> Result<CurvatureReport> {
    let t = twisted_hodge_matrices(ops, a, std::slice::from_ref(psi))?;
    let p = if psi.cells() == Cells::Vertex { 1 } else { 0 };
    let (lowered, raised, gap) = if p == 1 {
        let u = cup(ops, a, psi)?;
        let h = ops.harmonic_forms(u.holomorphic_weight(), probe)?;
        let hu = h.project(&u.coeffs);
        (linalg::mnorm(&ops.face_mass(u.holomorphic_weight(), 1), &hu).powi(2), 0.0, None)
    } else {
        let u = to_vertex_section(ops, &cup_bar(ops, a, psi)?)?;
        let h = ops.harmonic_sections(2, probe)?;
        let hu = h.project(&u.coeffs);
        let gap = h.eigenvalues.get(h.rank()).copied();
        (0.0, linalg::mnorm(&ops.vertex_mass(2), &hu).powi(2), gap)
    };
    Ok(CurvatureReport::assemble(
        Backend::Geometric,
        Formula::TwistedHodge,
        1,
        p,
        [t.term1[0][0].re, t.term2[0][0].re, t.term3[0][0].re],
        lowered,
        raised,
        gap,
    ))
}

/// Curvature report for `R¹f_*T`, the tangent bundle of the base with the
/// Weil-Petersson metric: `-(T1 + T2)` with `T1 = ∫ (□+1)⁻¹(|A|²)|ν|²`,
/// `T2 = ⟨(□+1)⁻¹(Ā·ν), Ā·ν⟩` on functions. `A∧ν` vanishes on a curve.
pub fn curvature_lambda_t(ops: &Operators, a: &[C64], nu: &[C64]) -> Result<CurvatureReport> {
    require_faces(ops, a)?;
    require_faces(ops, nu)?;
    let x = face_values(ops, &green_plus_function(ops, &pointwise_norm_sq(a))?);
    let fm = ops.face_mass(0, 0);
    let t1: f64 = (0..ops.nf()).map(|f| fm[f] * x[f] * nu[f].norm_sqr()).sum();
    // the function Ā·ν, split into real and imaginary parts for the real solver
    let f: Vec<C64> = a.iter().zip(nu).map(|(a, n)| a.conj() * n).collect();
    let re = face_values(ops, &green_plus_function(ops, &f.iter().map(|z| z.re).collect::<Vec<_>>())?);
    let im = face_values(ops, &green_plus_function(ops, &f.iter().map(|z| z.im).collect::<Vec<_>>())?);
    let t2: f64 = (0..ops.nf()).map(|i| fm[i] * (C64::new(re[i], im[i]) * f[i].conj()).re).sum();
    let vol: f64 = fm.iter().sum();
    let mean: C64 = (0..ops.nf()).map(|i| f[i] * fm[i]).sum::<C64>();
    let lowered = mean.norm_sqr() / vol;
    Ok(CurvatureReport::assemble(Backend::Geometric, Formula::LambdaT, 1, 1, [t1, t2, 0.0], lowered, 0.0, None))
}

/// Upper bound `R(A,Ā,A,Ā) ≤ -c‖A‖⁴` with `c = 2/vol`.
#[derive(Clone, Debug, Serialize)]
pub struct WolpertBound {
    pub c: f64,
    pub volume: f64,
    pub bound: f64,
    pub curvature: f64,
    /// `bound - curvature`, nonnegative when the bound holds.
    pub margin: f64,
    /// `-‖H(A∧Ā)‖² + ‖H(A∧A)‖²`, the estimate from dropping the Green terms.
    pub estimate: f64,
}

pub fn wolpert_p1_bound(ops: &Operators, a: &[C64]) -> Result<WolpertBound> {
    let report = curvature_lambda_t(ops, a, a)?;
    let volume = ops.face_mass(0, 0).iter().sum::<f64>();
    let norm_sq = linalg::mnorm(&ops.face_mass(-1, 1), a).powi(2);
    let c = 2.0 / volume;
    let bound = -c * norm_sq * norm_sq;
    Ok(WolpertBound { c, volume, bound, curvature: report.total, margin: bound - report.total, estimate: report.estimate })
}

/// Finite-difference check of the curvature of `f_*K²` over a family.
#[derive(Clone, Debug, Serialize)]
pub struct HessianReport {
    pub at: usize,
    pub rank: usize,
    /// `H_{kl̄}(s₀) = ⟨ψ_k, ψ_l⟩` for the anchored holomorphic frame.
    pub gram: Vec<Vec<C64>>,
    /// Chern curvature `-∂s∂s̄H + ∂sH H⁻¹ (∂sH)ᴴ` from the grid.
    pub fd_curvature: Vec<Vec<C64>>,
    /// `T1 + T2` evaluated at `s₀`.
    pub formula: Vec<Vec<C64>>,
    pub term1: Vec<Vec<C64>>,
    pub term2: Vec<Vec<C64>>,
    /// Frobenius distance between the two, relative to the formula.
    pub relative_error: f64,
    /// `‖∂s H'‖` for the frame in normal gauge at `s₀` (should vanish).
    pub normal_gauge_first_derivative: f64,
    /// `‖-∂s∂s̄H' - Θ‖/‖Θ‖` in normal gauge.
    pub normal_gauge_consistency: f64,
}

fn to_dense(m: &[Vec<C64>]) -> DMatrix<C64> {
    DMatrix::from_fn(m.len(), m.len(), |i, j| m[i][j])
}

fn to_rows(m: &DMatrix<C64>) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Computes the Gram matrix of a holomorphic frame of quadratic
/// differentials (normalized at `anchors`) on every grid point, its
/// parameter derivatives at `at`, and compares the resulting curvature with
/// the three-term formula (the third term vanishes for `p = 1`).
pub fn fd_hessian_oracle(fam: &Family, at: usize, anchors: &[usize], probe: usize) -> Result<HessianReport> {
    let (i, j) = fam.interior(at)?;
    let mut frames = Vec::with_capacity(fam.fibers.len());
    let mut grams = Vec::with_capacity(fam.fibers.len());
    for k in 0..fam.fibers.len() {
        let ops = Operators::new(&fam.fibers[k], &fam.metrics[k])?;
        let frame = normalized_frame(&ops.harmonic_sections(2, probe)?, anchors)?;
        let m = ops.vertex_mass(2);
        grams.push(DMatrix::from_fn(frame.len(), frame.len(), |a, b| mdot(&m, &frame[a], &frame[b])));
        frames.push(frame);
    }
    let r = grams[at].nrows();
    let entry = |f: &dyn Fn(usize) -> DMatrix<C64>| {
        let mut d1 = DMatrix::zeros(r, r);
        let mut d2 = DMatrix::zeros(r, r);
        for a in 0..r {
            for b in 0..r {
                let (x, y) = parameter_derivatives(fam, i, j, |k| f(k)[(a, b)]);
                d1[(a, b)] = x;
                d2[(a, b)] = y;
            }
        }
        (d1, d2)
    };
    let (dh, ddh) = entry(&|k| grams[k].clone());
    let h0 = grams[at].clone();
    let h0_inv = h0.clone().try_inverse().ok_or_else(|| Error::Invalid("singular Gram matrix".into()))?;
    let theta = -ddh.clone() + &dh * &h0_inv * dh.adjoint();

    // normal gauge: ψ' = ψ (I + (s - s₀) N) with Nᵀ = -∂sH H⁻¹
    let n = -(&dh * &h0_inv).transpose();
    let s0 = fam.parameter(i, j);
    let gauged = |k: usize| {
        let (a, b) = (k % fam.n_re, k / fam.n_re);
        let m = DMatrix::identity(r, r) + &n * (fam.parameter(a, b) - s0);
        m.transpose() * &grams[k] * m.map(|z| z.conj())
    };
    let (dh_n, ddh_n) = entry(&gauged);
    let theta_norm = theta.norm();

    let lift = horizontal_lift(fam, at, C64::new(1.0, 0.0))?;
    let ks = ks_form(fam, &lift)?;
    let ops = Operators::new(&fam.fibers[at], &fam.metrics[at])?;
    let fields: Vec<FormField> =
        frames[at].iter().map(|q| FormField::new(0, 0, Bundle(2), q.clone())).collect::<Result<_>>()?;
    let t = twisted_hodge_matrices(&ops, &ks.harmonic, &fields)?;
    let formula = to_dense(&t.total());
    Ok(HessianReport {
        at,
        rank: r,
        gram: to_rows(&h0),
        fd_curvature: to_rows(&theta),
        relative_error: (&theta - &formula).norm() / formula.norm(),
        formula: to_rows(&formula),
        term1: t.term1,
        term2: t.term2,
        normal_gauge_first_derivative: dh_n.norm() / h0.norm(),
        normal_gauge_consistency: (-ddh_n - &theta).norm() / theta_norm,
    })
}

/// Discrete check of `□_∂ = □_∂̄ + (1 - p - q)` on K-valued `(p, q)`-forms.
#[derive(Clone, Debug, Serialize)]
pub struct BoxIdentity {
    pub p: usize,
    pub q: usize,
    pub shift: f64,
    pub modes: usize,
    /// Largest eigenvalue of `□_∂̄` among the compared modes.
    pub lambda_max: f64,
    /// `‖Vᴴ(Q_∂ - Q_∂̄ - shift·M)V‖₂ / (1 + λ_max)` over the modes `V`.
    pub residual: f64,
}

/// Compares the quadratic forms of the two Laplacians on the `modes`
/// lowest eigenmodes of `□_∂̄`.
///
/// Grid-scale modes are excluded on purpose: the two Laplacians are
/// different second-order discretizations and only agree on resolved
/// modes. K-valued (1,0)-forms are vertex sections of K², and `∂*` is
/// applied to their face average. `(0, 1)` is not represented by a
/// vertex field and is rejected.
pub fn boxdbox_check(ops: &Operators, p: usize, q: usize, modes: usize) -> Result<BoxIdentity> {
    let (k, shift) = match (p, q) {
        (0, 0) => (1, 1.0),
        (1, 0) => (2, 0.0),
        _ => return Err(Error::Bidegree(format!("({p},{q}) has no vertex representation"))),
    };
    let spec = ops.low_spectrum(k, modes)?;
    let mass = ops.vertex_mass(k);
    let del_quad: Vec<Vec<C64>> = match p {
        0 => {
            let d = ops.del(1);
            let mf = ops.face_mass(2, 0);
            let img: Vec<Vec<C64>> = spec.vectors.iter().map(|v| d.mul_vec(v)).collect();
            img.iter().map(|a| img.iter().map(|b| mdot(&mf, a, b)).collect()).collect()
        }
        _ => {
            let ds = ops.del_star(1);
            let mv = ops.vertex_mass(1);
            let img: Vec<Vec<C64>> = spec.vectors.iter().map(|v| ds.mul_vec(&ops.face_average(2, v))).collect();
            img.iter().map(|a| img.iter().map(|b| mdot(&mv, a, b)).collect()).collect()
        }
    };
    let m = spec.values.len();
    let c = DMatrix::from_fn(m, m, |i, j| {
        let dbar = if i == j { spec.values[i] } else { 0.0 };
        let ident = mdot(&mass, &spec.vectors[j], &spec.vectors[i]).re;
        // The modes are M-orthonormal up to the eigensolver tolerance.
        del_quad[j][i] - C64::new(dbar + shift * ident, 0.0)
    });
    let lambda_max = spec.values.iter().cloned().fold(0.0, f64::max);
    let norm = c.singular_values().max();
    Ok(BoxIdentity { p, q, shift, modes: m, lambda_max, residual: norm / (1.0 + lambda_max) })
}
