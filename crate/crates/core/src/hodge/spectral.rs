//! Finite models for the curvature formulas in any dimension.
//!
//! A model consists of `N` weighted sample points. Functions live on the
//! points and carry a weighted graph Laplacian, so `(□+1)⁻¹` maps
//! nonnegative functions to nonnegative functions. Each bundle of forms
//! entering a formula is a ladder of spaces `X_0, …, X_n`, where `X_k` has
//! a fibre of rank `r_k` at every point and a Hermitian Laplacian given by
//! its eigen-decomposition. The products with `A` act pointwise: a
//! lowering map `X_k → X_{k-1}` and a raising map `X_k → X_{k+1}`, the two
//! being adjoint to each other.
//!
//! For the twisted Hodge bundle the ladder index is `p` of the
//! `K`-valued `(p, n-p)`-forms, the lowering map is `A∪` and the raising
//! map is `Ā∪`. For `Λ^p T` the index is `p` of the `Λ^p T`-valued
//! `(0,p)`-forms, the raising map is `A∧` and the lowering map `Ā∧`.

use super::{Backend, CurvatureReport, Formula};
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Eigenvalues within this distance of 1 make `(□−1)⁻¹` ill-defined.
pub const GAP_BAND: f64 = 1e-6;
/// Eigenvalues at most this large count as harmonic.
pub const ZERO_EIGEN: f64 = 1e-12;

/// One space of a ladder as stored on disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceFile {
    pub rank: usize,
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[i]` is the `i`-th eigenvector, of length `N · rank`,
    /// orthonormal for the weighted inner product.
    pub eigenvectors: Vec<Vec<C64>>,
}

/// A ladder as stored on disk; `lower[k-1][x]` is the `r_{k-1} × r_k`
/// matrix of the lowering product at point `x` (row-major), `raise[k][x]`
/// the `r_{k+1} × r_k` matrix of the raising product.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LadderFile {
    pub spaces: Vec<SpaceFile>,
    pub lower: Vec<Vec<Vec<C64>>>,
    pub raise: Vec<Vec<Vec<C64>>>,
}

/// Serialized spectral model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    pub weights: Vec<f64>,
    /// Edges `(i, j, w)` of the graph Laplacian on functions.
    pub graph: Vec<(usize, usize, f64)>,
    /// Pointwise `|A|²`.
    pub a_norm_sq: Vec<f64>,
    pub cup: LadderFile,
    pub wedge: LadderFile,
}

/// A space with its Laplacian in diagonal form.
#[derive(Clone, Debug)]
pub struct Space {
    pub rank: usize,
    pub eigenvalues: Vec<f64>,
    /// Columns are weighted-orthonormal eigenvectors.
    pub eigenvectors: DMatrix<C64>,
    /// Weight of every coordinate (the point weight repeated `rank` times).
    pub metric: Vec<f64>,
}

impl Space {
    pub fn dim(&self) -> usize {
        self.metric.len()
    }

    pub fn inner(&self, a: &DVector<C64>, b: &DVector<C64>) -> C64 {
        (0..a.len()).map(|i| a[i] * b[i].conj() * self.metric[i]).sum()
    }

    pub fn norm_sq(&self, a: &DVector<C64>) -> f64 {
        self.inner(a, a).re
    }

    /// Coefficients `⟨f, v_i⟩` in the eigenbasis.
    pub fn coefficients(&self, f: &DVector<C64>) -> Vec<C64> {
        (0..self.eigenvalues.len())
            .map(|i| self.inner(f, &self.eigenvectors.column(i).into_owned()))
            .collect()
    }

    pub fn laplacian(&self, f: &DVector<C64>) -> DVector<C64> {
        let c = self.coefficients(f);
        let mut out = DVector::zeros(self.dim());
        for (i, ci) in c.iter().enumerate() {
            out += self.eigenvectors.column(i) * (*ci * self.eigenvalues[i]);
        }
        out
    }

    /// `(□ + shift)⁻¹ f`. Fails when an eigenvalue inside the exclusion
    /// band around `-shift` meets the support of `f`.
    pub fn green(&self, shift: f64, f: &DVector<C64>) -> Result<DVector<C64>> {
        let c = self.coefficients(f);
        let scale = self.norm_sq(f).sqrt().max(f64::MIN_POSITIVE);
        let mut out = DVector::zeros(self.dim());
        for (i, ci) in c.iter().enumerate() {
            let d = self.eigenvalues[i] + shift;
            if d.abs() <= GAP_BAND {
                if ci.norm() > 1e-14 * scale {
                    return Err(Error::SpectrumGap {
                        eigenvalue: self.eigenvalues[i],
                        band: GAP_BAND,
                    });
                }
                continue;
            }
            out += self.eigenvectors.column(i) * (*ci / d);
        }
        Ok(out)
    }

    /// Harmonic projection.
    pub fn harmonic(&self, f: &DVector<C64>) -> DVector<C64> {
        let c = self.coefficients(f);
        let mut out = DVector::zeros(self.dim());
        for (i, ci) in c.iter().enumerate() {
            if self.eigenvalues[i] <= ZERO_EIGEN {
                out += self.eigenvectors.column(i) * *ci;
            }
        }
        out
    }

    pub fn harmonic_basis(&self) -> Vec<DVector<C64>> {
        (0..self.eigenvalues.len())
            .filter(|&i| self.eigenvalues[i] <= ZERO_EIGEN)
            .map(|i| self.eigenvectors.column(i).into_owned())
            .collect()
    }

    /// Smallest nonzero eigenvalue.
    pub fn gap(&self) -> Option<f64> {
        self.eigenvalues
            .iter()
            .cloned()
            .filter(|l| *l > ZERO_EIGEN)
            .fold(None, |a, l| Some(a.map_or(l, |m: f64| m.min(l))))
    }
}

/// Spaces `X_0..X_n` with the pointwise products between neighbours.
#[derive(Clone, Debug)]
pub struct Ladder {
    pub spaces: Vec<Space>,
    /// `lower[k-1]`: `X_k → X_{k-1}` as a block-diagonal matrix.
    pub lower: Vec<DMatrix<C64>>,
    /// `raise[k]`: `X_k → X_{k+1}`.
    pub raise: Vec<DMatrix<C64>>,
}

impl Ladder {
    /// Largest deviation of `raise` from the adjoint of `lower`.
    pub fn adjointness_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 1..self.spaces.len() {
            let d = &self.lower[k - 1];
            let u = &self.raise[k - 1];
            let (src, dst) = (&self.spaces[k], &self.spaces[k - 1]);
            // ⟨D x, y⟩_{k-1} = ⟨x, U y⟩_k  ⇔  W_{k-1} D = (W_k U)^H
            for i in 0..dst.dim() {
                for j in 0..src.dim() {
                    let lhs = d[(i, j)] * dst.metric[i];
                    let rhs = (u[(j, i)] * src.metric[j]).conj();
                    worst = worst.max((lhs - rhs).norm());
                }
            }
        }
        worst
    }

    fn lower_at(&self, k: usize, v: &DVector<C64>) -> Option<DVector<C64>> {
        (k > 0).then(|| &self.lower[k - 1] * v)
    }

    fn raise_at(&self, k: usize, v: &DVector<C64>) -> Option<DVector<C64>> {
        (k + 1 < self.spaces.len()).then(|| &self.raise[k] * v)
    }
}

/// A complete finite model.
#[derive(Clone, Debug)]
pub struct SpectralModel {
    pub n: usize,
    pub weights: Vec<f64>,
    /// Function space with the graph Laplacian.
    pub functions: Space,
    pub a_norm_sq: Vec<f64>,
    pub cup: Ladder,
    pub wedge: Ladder,
}

fn block_diag(blocks: &[Vec<C64>], rows: usize, cols: usize) -> Result<DMatrix<C64>> {
    let npts = blocks.len();
    let mut m = DMatrix::zeros(npts * rows, npts * cols);
    for (x, b) in blocks.iter().enumerate() {
        if b.len() != rows * cols {
            return Err(Error::Invalid(format!(
                "pointwise product at point {x} has {} entries, expected {}",
                b.len(),
                rows * cols
            )));
        }
        for i in 0..rows {
            for j in 0..cols {
                m[(x * rows + i, x * cols + j)] = b[i * cols + j];
            }
        }
    }
    Ok(m)
}

fn space_from_file(f: &SpaceFile, weights: &[f64]) -> Result<Space> {
    let dim = f.rank * weights.len();
    if f.eigenvalues.len() != dim || f.eigenvectors.len() != dim {
        return Err(Error::Invalid(format!(
            "space of rank {} needs {dim} eigenpairs",
            f.rank
        )));
    }
    if f.eigenvalues.iter().any(|l| !l.is_finite() || *l < -ZERO_EIGEN) {
        return Err(Error::Invalid("Laplacian eigenvalues must be nonnegative".into()));
    }
    let mut v = DMatrix::zeros(dim, dim);
    for (j, col) in f.eigenvectors.iter().enumerate() {
        if col.len() != dim {
            return Err(Error::Invalid("eigenvector length mismatch".into()));
        }
        for i in 0..dim {
            v[(i, j)] = col[i];
        }
    }
    let metric: Vec<f64> = weights.iter().flat_map(|w| std::iter::repeat(*w).take(f.rank)).collect();
    let s = Space {
        rank: f.rank,
        eigenvalues: f.eigenvalues.clone(),
        eigenvectors: v,
        metric,
    };
    // orthonormality
    for i in 0..dim {
        for j in 0..dim {
            let g = s.inner(
                &s.eigenvectors.column(i).into_owned(),
                &s.eigenvectors.column(j).into_owned(),
            );
            let e = if i == j { 1.0 } else { 0.0 };
            if (g - C64::new(e, 0.0)).norm() > 1e-9 {
                return Err(Error::Invalid("eigenvectors are not orthonormal".into()));
            }
        }
    }
    Ok(s)
}

fn ladder_from_file(f: &LadderFile, n: usize, weights: &[f64], gap_margin: f64) -> Result<Ladder> {
    if f.spaces.len() != n + 1 || f.lower.len() != n || f.raise.len() != n {
        return Err(Error::Invalid(format!(
            "a ladder in dimension {n} needs {} spaces and {n} maps each way",
            n + 1
        )));
    }
    let spaces: Vec<Space> = f
        .spaces
        .iter()
        .map(|s| space_from_file(s, weights))
        .collect::<Result<_>>()?;
    let mut lower = Vec::with_capacity(n);
    let mut raise = Vec::with_capacity(n);
    for k in 1..=n {
        let (rk, rl) = (spaces[k].rank, spaces[k - 1].rank);
        lower.push(block_diag(&f.lower[k - 1], rl, rk)?);
        raise.push(block_diag(&f.raise[k - 1], rk, rl)?);
    }
    // the raising product lands in X_1..X_n, where (□−1)⁻¹ is applied
    for (k, s) in spaces.iter().enumerate().skip(1) {
        if let Some(l) = s.gap() {
            if l <= 1.0 + gap_margin {
                return Err(Error::Invariant(format!(
                    "space {k}: nonzero eigenvalue {l} does not exceed 1 + {gap_margin}"
                )));
            }
        }
    }
    let ladder = Ladder {
        spaces,
        lower,
        raise,
    };
    let res = ladder.adjointness_residual();
    if res > 1e-12 {
        return Err(Error::Invariant(format!(
            "conjugate product is not the adjoint (residual {res:.2e})"
        )));
    }
    Ok(ladder)
}

impl SpectralModel {
    pub fn from_file(f: &ModelFile, gap_margin: f64) -> Result<Self> {
        let npts = f.weights.len();
        if npts == 0 || f.weights.iter().any(|w| *w <= 0.0) {
            return Err(Error::Invalid("point weights must be positive".into()));
        }
        if f.a_norm_sq.len() != npts || f.a_norm_sq.iter().any(|a| *a < 0.0) {
            return Err(Error::Invalid("|A|² must be a nonnegative value per point".into()));
        }
        let functions = graph_space(&f.weights, &f.graph)?;
        Ok(Self {
            n: f.n,
            weights: f.weights.clone(),
            functions,
            a_norm_sq: f.a_norm_sq.clone(),
            cup: ladder_from_file(&f.cup, f.n, &f.weights, gap_margin)?,
            wedge: ladder_from_file(&f.wedge, f.n, &f.weights, gap_margin)?,
        })
    }

    pub fn from_json(text: &str, gap_margin: f64) -> Result<Self> {
        let f: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
        Self::from_file(&f, gap_margin)
    }

    /// Pointwise `|v|²` of a section of a ladder space.
    fn pointwise_sq(&self, s: &Space, v: &DVector<C64>) -> DVector<C64> {
        DVector::from_iterator(
            self.weights.len(),
            (0..self.weights.len()).map(|x| {
                let r = (0..s.rank).map(|a| v[x * s.rank + a].norm_sqr()).sum::<f64>();
                C64::new(r, 0.0)
            }),
        )
    }

    fn evaluate(&self, ladder: &Ladder, formula: Formula, p: usize, psi: &DVector<C64>) -> Result<CurvatureReport> {
        if p > self.n {
            return Err(Error::Bidegree(format!("degree {p} exceeds dimension {}", self.n)));
        }
        let space = &ladder.spaces[p];
        if psi.len() != space.dim() {
            return Err(Error::Bidegree(format!(
                "section has {} coefficients, space {p} has dimension {}",
                psi.len(),
                space.dim()
            )));
        }
        let a = DVector::from_iterator(self.a_norm_sq.len(), self.a_norm_sq.iter().map(|v| C64::new(*v, 0.0)));
        let b = self.pointwise_sq(space, psi);
        let t1 = self.functions.inner(&self.functions.green(1.0, &a)?, &b).re;
        let (t2, h_low) = match ladder.lower_at(p, psi) {
            Some(d) => {
                let s = &ladder.spaces[p - 1];
                (s.inner(&s.green(1.0, &d)?, &d).re, s.norm_sq(&s.harmonic(&d)))
            }
            None => (0.0, 0.0),
        };
        let (t3, h_up, gap) = match ladder.raise_at(p, psi) {
            Some(u) => {
                let s = &ladder.spaces[p + 1];
                (s.inner(&s.green(-1.0, &u)?, &u).re, s.norm_sq(&s.harmonic(&u)), s.gap())
            }
            None => (0.0, 0.0, None),
        };
        Ok(CurvatureReport::assemble(
            Backend::Spectral,
            formula,
            self.n,
            p,
            [t1, t2, t3],
            h_low,
            h_up,
            gap,
        ))
    }

    /// Curvature of the twisted Hodge bundle in the direction `A` at the
    /// harmonic section `ψ` of degree `p`.
    pub fn curvature_twisted_hodge(&self, p: usize, psi: &DVector<C64>) -> Result<CurvatureReport> {
        self.evaluate(&self.cup, Formula::TwistedHodge, p, psi)
    }

    /// Curvature of `R^p f_* Λ^p T` in the direction `A` at `ν`.
    pub fn curvature_lambda_t(&self, p: usize, nu: &DVector<C64>) -> Result<CurvatureReport> {
        self.evaluate(&self.wedge, Formula::LambdaT, p, nu)
    }

    /// `‖H(Ā∧ν)‖² − |⟨H(A∧μ), ν⟩|² / ‖μ‖²` for harmonic `ν` of degree `p`
    /// and harmonic `μ` of degree `p - 1`; nonnegative by Cauchy-Schwarz.
    pub fn cauchy_schwarz_slack(&self, p: usize, nu: &DVector<C64>, mu: &DVector<C64>) -> Result<(f64, f64)> {
        if p == 0 || p > self.n {
            return Err(Error::Bidegree(format!("degree {p} has no lower neighbour")));
        }
        let w = &self.wedge;
        let (sp, sq) = (&w.spaces[p], &w.spaces[p - 1]);
        let mu_sq = sq.norm_sq(mu);
        if mu_sq == 0.0 {
            return Err(Error::Invalid("μ must be nonzero".into()));
        }
        let lhs = sq.norm_sq(&sq.harmonic(&(&w.lower[p - 1] * nu)));
        let pairing = sp.inner(&sp.harmonic(&(&w.raise[p - 1] * mu)), nu);
        let rhs = pairing.norm_sqr() / mu_sq;
        Ok((lhs, rhs))
    }

    /// `‖H(A∪ψ)‖² − ‖H(Ā∪ψ)‖²`, the Hodge-bundle curvature without twist.
    pub fn griffiths(&self, p: usize, psi: &DVector<C64>) -> f64 {
        let c = &self.cup;
        let low = c
            .lower_at(p, psi)
            .map_or(0.0, |d| c.spaces[p - 1].norm_sq(&c.spaces[p - 1].harmonic(&d)));
        let up = c
            .raise_at(p, psi)
            .map_or(0.0, |u| c.spaces[p + 1].norm_sq(&c.spaces[p + 1].harmonic(&u)));
        low - up
    }
}

fn graph_space(weights: &[f64], edges: &[(usize, usize, f64)]) -> Result<Space> {
    let n = weights.len();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for &(i, j, w) in edges {
        if i >= n || j >= n || i == j || w < 0.0 {
            return Err(Error::Invalid(format!("bad graph edge ({i}, {j}, {w})")));
        }
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    }
    // □ = W⁻¹ L is self-adjoint for the weighted product; diagonalise
    // W^{-1/2} L W^{-1/2} and map back.
    let isq: Vec<f64> = weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| l[(i, j)] * isq[i] * isq[j]);
    let eig = sym.symmetric_eigen();
    let v = DMatrix::from_fn(n, n, |i, j| C64::new(eig.eigenvectors[(i, j)] * isq[i], 0.0));
    Ok(Space {
        rank: 1,
        eigenvalues: eig.eigenvalues.iter().map(|x| x.max(0.0)).collect(),
        eigenvectors: v,
        metric: weights.to_vec(),
    })
}

/// Size limits for random models.
#[derive(Clone, Copy, Debug)]
pub struct RandomModelSpec {
    pub max_n: usize,
    /// Largest dimension of any space.
    pub max_dim: usize,
    pub gap_margin: f64,
}

impl Default for RandomModelSpec {
    fn default() -> Self {
        Self {
            max_n: 3,
            max_dim: 8,
            gap_margin: 0.05,
        }
    }
}

fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<C64> {
    let g = DMatrix::from_fn(d, d, |_, _| C64::new(gauss(rng), gauss(rng)));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // fix the phases so the distribution does not depend on QR conventions
    DMatrix::from_fn(d, d, |i, j| {
        let ph = r[(j, j)] / r[(j, j)].norm().max(f64::MIN_POSITIVE);
        q[(i, j)] * ph
    })
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn random_space(rng: &mut ChaCha8Rng, rank: usize, weights: &[f64], needs_gap: bool, margin: f64) -> SpaceFile {
    let dim = rank * weights.len();
    let q = random_unitary(rng, dim);
    let harmonic = rng.gen_range(1..=dim.max(1));
    let eigenvalues: Vec<f64> = (0..dim)
        .map(|i| {
            if i < harmonic {
                0.0
            } else if needs_gap {
                1.0 + margin + rng.gen::<f64>() * 8.0
            } else {
                0.05 + rng.gen::<f64>() * 8.0
            }
        })
        .collect();
    let metric: Vec<f64> = weights.iter().flat_map(|w| std::iter::repeat(*w).take(rank)).collect();
    let eigenvectors = (0..dim)
        .map(|j| (0..dim).map(|i| q[(i, j)] / metric[i].sqrt()).collect())
        .collect();
    SpaceFile {
        rank,
        eigenvalues,
        eigenvectors,
    }
}

fn random_ladder(rng: &mut ChaCha8Rng, n: usize, weights: &[f64], spec: &RandomModelSpec) -> LadderFile {
    let npts = weights.len();
    let max_rank = (spec.max_dim / npts).max(1);
    let ranks: Vec<usize> = (0..=n).map(|_| rng.gen_range(1..=max_rank)).collect();
    let spaces = ranks
        .iter()
        .enumerate()
        .map(|(k, &r)| random_space(rng, r, weights, k > 0, spec.gap_margin))
        .collect();
    let mut lower = Vec::with_capacity(n);
    let mut raise = Vec::with_capacity(n);
    for k in 1..=n {
        let (rk, rl) = (ranks[k], ranks[k - 1]);
        let mut lo = Vec::with_capacity(npts);
        let mut up = Vec::with_capacity(npts);
        for _ in 0..npts {
            let m: Vec<C64> = (0..rl * rk).map(|_| C64::new(gauss(rng), gauss(rng))).collect();
            // pointwise adjoint: weights cancel because both fibres sit
            // over the same point
            let mut t = vec![C64::new(0.0, 0.0); rk * rl];
            for i in 0..rl {
                for j in 0..rk {
                    t[j * rl + i] = m[i * rk + j].conj();
                }
            }
            lo.push(m);
            up.push(t);
        }
        lower.push(lo);
        raise.push(up);
    }
    LadderFile { spaces, lower, raise }
}

/// Random model with `n ≤ max_n` and every space of dimension
/// `≤ max_dim`, obeying the spectral gap with the given margin.
pub fn random_model(seed: u64, spec: &RandomModelSpec) -> ModelFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=spec.max_n.max(1));
    let npts = rng.gen_range(1..=spec.max_dim.clamp(1, 4));
    let weights: Vec<f64> = (0..npts).map(|_| 0.2 + rng.gen::<f64>()).collect();
    let mut graph = Vec::new();
    for i in 0..npts {
        for j in i + 1..npts {
            if rng.gen::<f64>() < 0.7 {
                graph.push((i, j, 0.1 + 2.0 * rng.gen::<f64>()));
            }
        }
    }
    let a_norm_sq = (0..npts).map(|_| rng.gen::<f64>() * 2.0).collect();
    let cup = random_ladder(&mut rng, n, &weights, spec);
    let wedge = random_ladder(&mut rng, n, &weights, spec);
    ModelFile {
        n,
        weights,
        graph,
        a_norm_sq,
        cup,
        wedge,
    }
}

/// Random harmonic section of degree `p`.
pub fn random_harmonic(space: &Space, seed: u64) -> DVector<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::zeros(space.dim());
    for h in space.harmonic_basis() {
        v += h * C64::new(gauss(&mut rng), gauss(&mut rng));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_models_load() {
        for seed in 0..20 {
            let f = random_model(seed, &RandomModelSpec::default());
            let m = SpectralModel::from_file(&f, 0.0).unwrap();
            assert!(m.cup.adjointness_residual() < 1e-12);
            assert!(m.functions.eigenvalues.iter().all(|l| *l >= 0.0));
        }
    }

    #[test]
    fn json_round_trip() {
        let f = random_model(3, &RandomModelSpec::default());
        let text = serde_json::to_string(&f).unwrap();
        let m = SpectralModel::from_json(&text, 0.0).unwrap();
        assert_eq!(m.n, f.n);
    }
}
