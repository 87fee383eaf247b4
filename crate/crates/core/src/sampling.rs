//! Random states and random Kraus models, used by property tests,
//! benchmarks and the batch front end.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, CMatrix};
use crate::model::KrausModel;
use crate::state::DensityMatrix;

/// Complex Ginibre matrix with standard normal real and imaginary parts.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Random full-rank state `G G† / Tr(G G†)` (Hilbert-Schmidt measure).
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(dim, dim, rng);
    let m = &g * g.adjoint();
    let tr = linalg::trace_re(&m);
    DensityMatrix::from_matrix_unchecked(linalg::hermitize(&m.unscale(tr)))
}

/// Random state of the given rank.
pub fn random_state_of_rank<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(dim, rank.max(1), rng);
    let m = &g * g.adjoint();
    let tr = linalg::trace_re(&m);
    DensityMatrix::from_matrix_unchecked(linalg::hermitize(&m.unscale(tr)))
}

/// Random complete Kraus family: Ginibre operators `A_k` rescaled by
/// `(Σ A†A)^{-1/2}`, grouped `per_outcome` to an outcome.
pub fn random_model<R: Rng + ?Sized>(
    dim: usize,
    outcomes: usize,
    per_outcome: usize,
    rng: &mut R,
) -> KrausModel {
    let raw: Vec<Vec<CMatrix>> = (0..outcomes)
        .map(|_| (0..per_outcome).map(|_| ginibre(dim, dim, rng)).collect())
        .collect();
    let mut total = linalg::zeros(dim, dim);
    for a in raw.iter().flatten() {
        total += a.adjoint() * a;
    }
    let fix = linalg::psd_inv_sqrt(&total, 0.0);
    let ops = raw
        .into_iter()
        .map(|group| group.into_iter().map(|a| a * &fix).collect())
        .collect();
    let labels = (0..outcomes).map(|k| k.to_string()).collect();
    KrausModel::new(labels, ops).expect("random model is structurally valid")
}
