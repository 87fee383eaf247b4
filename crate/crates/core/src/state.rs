//! Density matrices and state fidelity.

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, HermitianEigen, EIGEN_CLAMP};

/// Tolerance for the Hermitian, trace and positivity checks.
pub const STATE_TOL: f64 = 1e-10;

/// A Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates `m` as a state. The input is re-Hermitized before the
    /// positivity and trace checks.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "state must be a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let asym = linalg::hermitian_residual(&m);
        if asym > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (residual {asym:.3e})")));
        }
        let h = linalg::hermitize(&m);
        let tr = linalg::trace(&h);
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not one")));
        }
        let min = HermitianEigen::new(&h).min();
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self(h))
    }

    /// Normalizes a positive matrix by its trace, then validates.
    pub fn from_unnormalized(m: CMatrix) -> Result<Self> {
        let tr = linalg::trace_re(&m);
        if !(tr > 0.0) {
            return Err(Error::InvalidState(format!("trace {tr} is not positive")));
        }
        Self::new(m.unscale(tr))
    }

    /// `m / Tr(m)` without the spectral check. Only for matrices that are
    /// positive by construction, such as the output of a Kraus map.
    pub(crate) fn normalized_unchecked(m: &CMatrix, trace: f64) -> Self {
        Self(linalg::hermitize(&m.unscale(trace)))
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    /// The completely mixed state `1/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self(linalg::identity(dim).unscale(dim as f64))
    }

    /// Diagonal state; entries must be non-negative and sum to one.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(linalg::diag(probs))
    }

    /// Projector onto the normalized vector `psi`.
    pub fn pure(psi: &[num_complex::Complex64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = v.unscale(norm);
        Self::new(&v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        HermitianEigen::new(&self.0).values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        HermitianEigen::new(&self.0).min()
    }

    /// Number of eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().iter().filter(|&&l| l > tol).count()
    }
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`, in `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    fidelity_matrices(rho.matrix(), sigma.matrix())
}

/// Fidelity between arbitrary PSD matrices (not necessarily unit trace).
pub fn fidelity_matrices(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::Dimension(format!(
            "fidelity of {:?} and {:?} matrices",
            rho.shape(),
            sigma.shape()
        )));
    }
    for (name, m) in [("first", rho), ("second", sigma)] {
        let min = HermitianEigen::new(m).min();
        if min < -EIGEN_CLAMP {
            return Err(Error::InvalidState(format!(
                "{name} fidelity argument is not PSD (eigenvalue {min:.3e})"
            )));
        }
    }
    let root = linalg::psd_sqrt(rho);
    let inner = &root * sigma * &root;
    let s: f64 = HermitianEigen::new(&inner)
        .values
        .iter()
        .map(|&l| if l > 0.0 { l.sqrt() } else { 0.0 })
        .sum();
    Ok((s * s).min(1.0))
}
