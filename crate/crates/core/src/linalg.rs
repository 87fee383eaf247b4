//! Dense complex matrix helpers for small dimensions.
//!
//! Everything here works on [`CMatrix`], a heap-allocated `nalgebra` matrix of
//! `Complex64`. Hermitian spectral routines clamp eigenvalues that sit within
//! [`EIGEN_CLAMP`] below zero, which keeps square roots and rank tests stable
//! near rank deficiency.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Eigenvalues in `[-EIGEN_CLAMP, 0)` are treated as exact zeros.
pub const EIGEN_CLAMP: f64 = 1e-10;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> CMatrix {
    let d = values.len();
    CMatrix::from_fn(d, d, |i, j| if i == j { c(values[i], 0.0) } else { ZERO })
}

/// Builds a matrix from row-major real entries.
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let r = rows.len();
    let cols = rows.first().map_or(0, |row| row.len());
    CMatrix::from_fn(r, cols, |i, j| c(rows[i][j], 0.0))
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().copied().sum()
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn hermitian_residual(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Real Hilbert-Schmidt inner product `Re Tr(a† b)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn hs_norm(a: &CMatrix) -> f64 {
    hs_inner(a, a).sqrt()
}

/// `v a v†`
pub fn conjugate_by(v: &CMatrix, a: &CMatrix) -> CMatrix {
    v * a * v.adjoint()
}

/// Column-stacking vectorization.
pub fn vectorize(m: &CMatrix) -> DVector<Complex64> {
    DVector::from_iterator(m.len(), m.iter().copied())
}

pub fn unvectorize(v: &DVector<Complex64>, rows: usize, cols: usize) -> CMatrix {
    assert_eq!(v.len(), rows * cols, "vector length does not match shape");
    CMatrix::from_iterator(rows, cols, v.iter().copied())
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// Decomposes the Hermitian part of `m`.
    pub fn new(m: &CMatrix) -> Self {
        let n = m.nrows();
        let eig = hermitize(m).symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Self { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Rebuilds `Σ f(λ) v v†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.vectors.nrows();
        let mut out = zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            let v = self.vectors.column(k);
            out += (v * v.adjoint()).scale(w);
        }
        out
    }

    /// Columns whose eigenvalue satisfies `keep`, as an isometry.
    pub fn columns_where(&self, keep: impl Fn(f64) -> bool) -> CMatrix {
        let idx: Vec<usize> = (0..self.values.len()).filter(|&k| keep(self.values[k])).collect();
        let n = self.vectors.nrows();
        CMatrix::from_fn(n, idx.len(), |i, j| self.vectors[(i, idx[j])])
    }
}

fn clamp_eigen(lambda: f64) -> f64 {
    if (-EIGEN_CLAMP..0.0).contains(&lambda) {
        0.0
    } else {
        lambda
    }
}

/// Square root of a positive semidefinite matrix. Negative eigenvalues beyond
/// the clamp band are also zeroed; callers that care must check first.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    HermitianEigen::new(m).map(|l| clamp_eigen(l).max(0.0).sqrt())
}

/// Inverse square root on the support (eigenvalues above `floor`).
pub fn psd_inv_sqrt(m: &CMatrix, floor: f64) -> CMatrix {
    HermitianEigen::new(m).map(|l| if l > floor { 1.0 / l.sqrt() } else { 0.0 })
}

/// Splits a Hermitian matrix into `(positive, negative)` parts with
/// `m = positive - negative`, both positive semidefinite.
pub fn positive_split(m: &CMatrix) -> (CMatrix, CMatrix) {
    let eig = HermitianEigen::new(m);
    let pos = eig.map(|l| if l > 0.0 { l } else { 0.0 });
    let neg = eig.map(|l| if l < 0.0 { -l } else { 0.0 });
    (pos, neg)
}

/// Isometry onto the span of eigenvectors with eigenvalue above `tol`.
pub fn support(m: &CMatrix, tol: f64) -> CMatrix {
    HermitianEigen::new(m).columns_where(|l| l > tol)
}

/// Isometry onto the orthogonal complement of the columns of `w` inside
/// the full space.
pub fn complement(w: &CMatrix) -> CMatrix {
    let n = w.nrows();
    let projector = w * w.adjoint();
    let rest = identity(n) - projector;
    HermitianEigen::new(&rest).columns_where(|l| l > 0.5)
}

/// Block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[CMatrix]) -> CMatrix {
    let total_r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let total_c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(total_r, total_c);
    let (mut r, mut cc) = (0, 0);
    for b in blocks {
        out.view_mut((r, cc), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        cc += b.ncols();
    }
    out
}
