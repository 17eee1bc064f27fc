//! Sparse complex matrices and the iterative solvers used by the
//! geometric backend.
//!
//! Every operator in the crate is self-adjoint with respect to a diagonal
//! (lumped) mass matrix, so the solvers take the mass diagonal explicitly
//! and work in the mass-weighted inner product.

use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<C64>,
}

/// Triplet accumulator; duplicate entries are summed on conversion.
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: C64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    pub fn into_csr(mut self) -> Csr {
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.nrows {
            indptr[i + 1] += indptr[i];
        }
        Csr {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

impl Csr {
    pub fn identity(n: usize) -> Self {
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, C64::new(1.0, 0.0));
        }
        t.into_csr()
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut t = Triplets::new(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            t.push(i, i, C64::new(x, 0.0));
        }
        t.into_csr()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in mul_vec");
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `self^H x` without forming the transpose.
    pub fn adjoint_mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.nrows, "dimension mismatch in adjoint_mul_vec");
        let mut y = vec![C64::new(0.0, 0.0); self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v.conj() * xi;
            }
        }
        y
    }

    pub fn adjoint(&self) -> Csr {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push(j, i, v.conj());
            }
        }
        t.into_csr()
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.ncols, other.nrows);
        let mut t = Triplets::new(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    t.push(i, j, a * b);
                }
            }
        }
        t.into_csr()
    }

    /// Scale rows by `d` (left multiplication by a diagonal).
    pub fn scale_rows(&self, d: &[f64]) -> Csr {
        let mut out = self.clone();
        for i in 0..self.nrows {
            for k in out.indptr[i]..out.indptr[i + 1] {
                out.values[k] *= d[i];
            }
        }
        out
    }

    pub fn add_scaled(&self, alpha: C64, other: &Csr) -> Csr {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = Triplets::new(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push(i, j, v);
            }
            for (j, v) in other.row(i) {
                t.push(i, j, alpha * v);
            }
        }
        t.into_csr()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        let n = self.nrows.min(self.ncols);
        let mut d = vec![C64::new(0.0, 0.0); n];
        for (i, di) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                if j == i {
                    *di += v;
                }
            }
        }
        d
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Csr) -> f64 {
        let d = self.add_scaled(C64::new(-1.0, 0.0), other);
        d.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

pub fn zeros(n: usize) -> Vec<C64> {
    vec![C64::new(0.0, 0.0); n]
}

/// Mass-weighted inner product `sum_i m_i x_i conj(y_i)`.
pub fn mdot(m: &[f64], x: &[C64], y: &[C64]) -> C64 {
    m.iter()
        .zip(x.iter().zip(y))
        .map(|(&w, (a, b))| a * b.conj() * w)
        .sum()
}

pub fn mnorm(m: &[f64], x: &[C64]) -> f64 {
    mdot(m, x, x).re.max(0.0).sqrt()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Preconditioned conjugate gradients for a Hermitian positive definite
/// system `A x = b` with Jacobi preconditioning. The residual reported is
/// relative, `|b - Ax| / |b|` in the Euclidean norm.
pub fn pcg(a: &Csr, b: &[C64], tol: f64, max_iter: usize) -> Result<(Vec<C64>, SolveStats)> {
    let n = b.len();
    let bnorm = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok((
            zeros(n),
            SolveStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let dinv: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if d.re.abs() > 0.0 { 1.0 / d.re } else { 1.0 })
        .collect();
    let mut x = zeros(n);
    let mut r = b.to_vec();
    let mut z: Vec<C64> = r.iter().zip(&dinv).map(|(v, d)| v * d).collect();
    let mut p = z.clone();
    let mut rz: C64 = r.iter().zip(&z).map(|(a, b)| a.conj() * b).sum();
    for it in 0..max_iter {
        let ap = a.mul_vec(&p);
        let pap: C64 = p.iter().zip(&ap).map(|(a, b)| a.conj() * b).sum();
        if pap.re <= 0.0 {
            return Err(Error::NoConvergence {
                what: "pcg: operator not positive definite".into(),
                residual: f64::NAN,
                iterations: it,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rnorm = r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() / bnorm;
        if rnorm < tol {
            return Ok((
                x,
                SolveStats {
                    iterations: it + 1,
                    residual: rnorm,
                },
            ));
        }
        z = r.iter().zip(&dinv).map(|(v, d)| v * d).collect();
        let rz_new: C64 = r.iter().zip(&z).map(|(a, b)| a.conj() * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let res = r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() / bnorm;
    Err(Error::NoConvergence {
        what: "pcg".into(),
        residual: res,
        iterations: max_iter,
    })
}

/// MINRES for a Hermitian (possibly indefinite) system `A x = b`.
///
/// The Lanczos tridiagonal of a Hermitian operator is real, so the Givens
/// rotations are real even though the vectors are complex.
pub fn minres(a: &Csr, b: &[C64], tol: f64, max_iter: usize) -> Result<(Vec<C64>, SolveStats)> {
    let n = b.len();
    let norm = |x: &[C64]| x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let beta1 = norm(b);
    let mut x = zeros(n);
    if beta1 == 0.0 {
        return Ok((x, SolveStats { iterations: 0, residual: 0.0 }));
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let (mut oldb, mut beta) = (0.0f64, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0f64, 0.0f64, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = zeros(n);
    let mut w2 = zeros(n);
    for itn in 0..max_iter {
        let v: Vec<C64> = y.iter().map(|c| c / beta).collect();
        y = a.mul_vec(&v);
        if itn > 0 {
            axpy(C64::new(-beta / oldb, 0.0), &r1, &mut y);
        }
        let alfa: f64 = v.iter().zip(&y).map(|(p, q)| (p.conj() * q).re).sum();
        axpy(C64::new(-alfa / beta, 0.0), &r2, &mut y);
        r1 = std::mem::replace(&mut r2, y.clone());
        oldb = beta;
        beta = norm(&y);
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w.clone());
        w = (0..n)
            .map(|i| (v[i] - w1[i] * oldeps - w2[i] * delta) / gamma)
            .collect();
        axpy(C64::new(phi, 0.0), &w, &mut x);
        let est = phibar / beta1;
        if est < tol || beta == 0.0 {
            let ax = a.mul_vec(&x);
            let res = norm(&ax.iter().zip(b).map(|(p, q)| q - p).collect::<Vec<_>>()) / beta1;
            return Ok((x, SolveStats { iterations: itn + 1, residual: res }));
        }
    }
    Err(Error::NoConvergence {
        what: "minres".into(),
        residual: phibar / beta1,
        iterations: max_iter,
    })
}

/// Eigenpairs of the generalized Hermitian problem `S x = λ M x`.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// M-orthonormal eigenvectors.
    pub vectors: Vec<Vec<C64>>,
    /// Relative residuals `|S x - λ M x| / |M x|` per pair.
    pub residuals: Vec<f64>,
}

/// Dense generalized eigendecomposition for a Hermitian `S` and positive
/// diagonal `M`. Suitable up to a few thousand unknowns.
pub fn dense_eigen(s: &Csr, m: &[f64]) -> EigenPairs {
    let n = m.len();
    let isq: Vec<f64> = m.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut a = s.to_dense();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] *= isq[i] * isq[j];
        }
    }
    // symmetrize against round-off
    let a = (&a + a.adjoint()) * C64::new(0.5, 0.0);
    let eig = a.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors: Vec<Vec<C64>> = order
        .iter()
        .map(|&k| (0..n).map(|i| eig.eigenvectors[(i, k)] * isq[i]).collect())
        .collect();
    let residuals = values
        .iter()
        .zip(&vectors)
        .map(|(&l, x)| eigen_residual(s, m, l, x))
        .collect();
    EigenPairs {
        values,
        vectors,
        residuals,
    }
}

fn eigen_residual(s: &Csr, m: &[f64], lambda: f64, x: &[C64]) -> f64 {
    let sx = s.mul_vec(x);
    let num: f64 = sx
        .iter()
        .zip(x)
        .zip(m)
        .map(|((a, b), w)| (a - b * (lambda * w)).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = x
        .iter()
        .zip(m)
        .map(|(b, w)| (b * *w).norm_sqr())
        .sum::<f64>()
        .sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Smallest `k` eigenpairs of `S x = λ M x` by shift-invert block subspace
/// iteration, with `S + σ M` factored once.
pub fn smallest_eigen(
    s: &Csr,
    m: &[f64],
    k: usize,
    sigma: f64,
    tol: f64,
    max_outer: usize,
    seed: u64,
) -> Result<EigenPairs> {
    use rand::{Rng, SeedableRng};
    let n = m.len();
    if n <= 300 {
        let mut all = dense_eigen(s, m);
        all.values.truncate(k);
        all.vectors.truncate(k);
        all.residuals.truncate(k);
        return Ok(all);
    }
    let block = (k + 4).max(2 * k).min(n);
    let shifted = BandLdl::factor(&s.add_scaled(C64::new(sigma, 0.0), &Csr::diag(m)))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Vec<C64>> = (0..block)
        .map(|_| {
            (0..n)
                .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect()
        })
        .collect();
    let mut last = EigenPairs {
        values: vec![],
        vectors: vec![],
        residuals: vec![],
    };
    for outer in 0..max_outer {
        // apply (S + σM)^{-1} M
        let mut y = Vec::with_capacity(block);
        for xi in &x {
            let rhs: Vec<C64> = xi.iter().zip(m).map(|(a, w)| a * *w).collect();
            y.push(shifted.solve(&rhs));
        }
        // Rayleigh-Ritz in span(y)
        let yb = m_orthonormalize(m, y);
        let b = yb.len();
        let sy: Vec<Vec<C64>> = yb.iter().map(|v| s.mul_vec(v)).collect();
        let mut h = DMatrix::<C64>::zeros(b, b);
        for i in 0..b {
            for j in 0..b {
                h[(i, j)] = sy[j].iter().zip(&yb[i]).map(|(a, c)| c.conj() * a).sum();
            }
        }
        let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        x = order
            .iter()
            .map(|&c| {
                let mut v = zeros(n);
                for (r, yr) in yb.iter().enumerate() {
                    axpy(eig.eigenvectors[(r, c)], yr, &mut v);
                }
                v
            })
            .collect();
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let residuals: Vec<f64> = (0..k)
            .map(|i| eigen_residual(s, m, values[i], &x[i]))
            .collect();
        let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let done = residuals.iter().zip(&values).all(|(r, _)| *r <= tol * scale);
        last = EigenPairs {
            values: values[..k].to_vec(),
            vectors: x[..k].to_vec(),
            residuals,
        };
        if done && outer > 0 {
            return Ok(last);
        }
    }
    let worst = last.residuals.iter().cloned().fold(0.0, f64::max);
    if worst < 1e-6 {
        Ok(last)
    } else {
        Err(Error::NoConvergence {
            what: "shift-invert subspace iteration".into(),
            residual: worst,
            iterations: max_outer,
        })
    }
}

/// Modified Gram-Schmidt in the M-inner product; drops dependent vectors.
pub fn m_orthonormalize(m: &[f64], vs: Vec<Vec<C64>>) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(vs.len());
    for mut v in vs {
        for _ in 0..2 {
            for u in &out {
                let c = mdot(m, &v, u);
                axpy(-c, u, &mut v);
            }
        }
        let nv = mnorm(m, &v);
        if nv > 1e-12 {
            out.push(v.iter().map(|c| c / nv).collect());
        }
    }
    out
}

/// Solve a small dense Hermitian positive definite system.
pub fn dense_solve(a: &DMatrix<C64>, b: &DVector<C64>) -> Result<DVector<C64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Invalid("singular dense system".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap1d(n: usize) -> Csr {
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, C64::new(2.0, 0.0));
            t.push(i, (i + 1) % n, C64::new(-1.0, 0.0));
            t.push(i, (i + n - 1) % n, C64::new(-1.0, 0.0));
        }
        t.into_csr()
    }

    #[test]
    fn triplets_sum_duplicates() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 1, C64::new(1.0, 0.0));
        t.push(0, 1, C64::new(2.0, 1.0));
        let a = t.into_csr();
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.values[0], C64::new(3.0, 1.0));
    }

    #[test]
    fn pcg_solves_shifted_laplacian() {
        let n = 50;
        let a = lap1d(n).add_scaled(C64::new(0.5, 0.0), &Csr::identity(n));
        let b: Vec<C64> = (0..n).map(|i| C64::new(i as f64, -(i as f64) * 0.1)).collect();
        let (x, st) = pcg(&a, &b, 1e-12, 1000).unwrap();
        let r = a.mul_vec(&x);
        let err: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "err {err} stats {st:?}");
    }

    #[test]
    fn minres_solves_indefinite() {
        let n = 40;
        // eigenvalues of lap1d are in [0,4]; shift by -1.3 gives indefinite
        let a = lap1d(n).add_scaled(C64::new(-1.3, 0.0), &Csr::identity(n));
        let b: Vec<C64> = (0..n).map(|i| C64::new((i as f64).sin(), (i as f64).cos())).collect();
        let (x, _) = minres(&a, &b, 1e-11, 2000).unwrap();
        let r = a.mul_vec(&x);
        let err: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn dense_eigen_of_ring() {
        let n = 16;
        let e = dense_eigen(&lap1d(n), &vec![1.0; n]);
        assert!(e.values[0].abs() < 1e-12);
        let expect = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / n as f64).cos();
        assert!((e.values[1] - expect).abs() < 1e-10);
    }

    #[test]
    fn adjoint_matches_transpose_conj() {
        let mut t = Triplets::new(2, 3);
        t.push(0, 2, C64::new(1.0, 2.0));
        t.push(1, 0, C64::new(-1.0, 0.5));
        let a = t.into_csr();
        let x = vec![C64::new(1.0, 1.0), C64::new(2.0, -1.0)];
        let y1 = a.adjoint_mul_vec(&x);
        let y2 = a.adjoint().mul_vec(&x);
        for (p, q) in y1.iter().zip(&y2) {
            assert!((p - q).norm() < 1e-15);
        }
    }
}

/// Reverse Cuthill-McKee ordering of the symmetric sparsity pattern.
pub fn rcm_order(a: &Csr) -> Vec<usize> {
    let n = a.nrows;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // start each component from a vertex of minimal degree
        let start = (0..n).filter(|&i| !seen[i]).min_by_key(|&i| adj[i].len()).unwrap();
        seen[start] = true;
        let mut head = order.len();
        order.push(start);
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&j| !seen[j]).collect();
            nb.sort_by_key(|&j| adj[j].len());
            for j in nb {
                if !seen[j] {
                    seen[j] = true;
                    order.push(j);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Banded `L D Lᴴ` factorization of a Hermitian matrix after RCM
/// reordering. No pivoting: intended for definite systems and for mildly
/// indefinite shifts away from the spectrum.
#[derive(Clone, Debug)]
pub struct BandLdl {
    n: usize,
    bw: usize,
    perm: Vec<usize>,
    l: Vec<C64>,
    d: Vec<f64>,
}

impl BandLdl {
    pub fn factor(a: &Csr) -> Result<BandLdl> {
        let n = a.nrows;
        let perm = rcm_order(a);
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let mut bw = 0;
        for i in 0..n {
            for (j, _) in a.row(i) {
                bw = bw.max(inv[i].abs_diff(inv[j]));
            }
        }
        let w = bw + 1;
        // lower band, row-major: entry (i, j) for i-bw <= j <= i at i*w + j + bw - i
        let mut l = vec![C64::new(0.0, 0.0); n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                let (pi, pj) = (inv[i], inv[j]);
                if pj <= pi {
                    l[pi * w + pj + bw - pi] += v;
                }
            }
        }
        let mut d = vec![0.0; n];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..i {
                let jlo = lo.max(j.saturating_sub(bw));
                let mut s = l[i * w + j + bw - i];
                for k in jlo..j {
                    s -= l[i * w + k + bw - i] * l[j * w + k + bw - j].conj() * d[k];
                }
                l[i * w + j + bw - i] = s / d[j];
            }
            let mut s = l[i * w + bw].re;
            for k in lo..i {
                s -= l[i * w + k + bw - i].norm_sqr() * d[k];
            }
            if !(s.abs() > 1e-300) || !s.is_finite() {
                return Err(Error::Invalid(format!("zero pivot at row {i} in band factorization")));
            }
            d[i] = s;
            l[i * w + bw] = C64::new(1.0, 0.0);
        }
        Ok(BandLdl { n, bw, perm, l, d })
    }

    /// Number of negative pivots, i.e. of negative eigenvalues.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|x| **x < 0.0).count()
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = y[i];
            for k in lo..i {
                s -= self.l[i * w + k + bw - i] * y[k];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let s = y[i];
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                let c = self.l[i * w + k + bw - i].conj();
                y[k] -= c * s;
            }
        }
        let mut x = zeros(n);
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }
}
