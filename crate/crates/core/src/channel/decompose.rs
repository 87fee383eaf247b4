use crate::error::Result;
use crate::linalg::{self, CMatrix, HermitianEigen};
use crate::model::KrausModel;
use crate::state::DensityMatrix;

use super::superop::{canonical_hermitian_basis, fixed_point_space, FixedPointSpace};

/// Eigenvalues of invariant states above this count toward their support.
const SUPPORT_TOL: f64 = 1e-9;

/// A minimal invariant subspace `V_i` with its unique invariant state.
#[derive(Debug, Clone)]
pub struct MinimalSubspace {
    /// Orthogonal projector `M_i` onto `V_i`.
    pub projector: CMatrix,
    /// Orthonormal basis of `V_i` as columns.
    pub isometry: CMatrix,
    pub invariant_state: DensityMatrix,
}

impl MinimalSubspace {
    pub fn dim(&self) -> usize {
        self.isometry.ncols()
    }
}

#[derive(Debug, Clone)]
pub struct ChannelDecomposition {
    pub dim: usize,
    /// Some invariant state has full rank.
    pub faithful: bool,
    /// Dimension of the fixed-point space of the full channel.
    pub fixed_point_dim: usize,
    /// Minimal subspaces of the largest invariant support. When the channel
    /// is faithful they add up to the whole space.
    pub subspaces: Vec<MinimalSubspace>,
    pub warnings: Vec<String>,
}

impl ChannelDecomposition {
    pub fn count(&self) -> usize {
        self.subspaces.len()
    }

    /// Uniform mixture of the minimal invariant states; full rank exactly
    /// when the channel is faithful.
    pub fn mixture_state(&self) -> DensityMatrix {
        let mut acc = linalg::zeros(self.dim, self.dim);
        for s in &self.subspaces {
            acc += s.invariant_state.matrix();
        }
        let m = acc.unscale(self.subspaces.len() as f64);
        DensityMatrix::from_matrix_unchecked(linalg::hermitize(&m))
    }

    pub fn minimal_states(&self) -> impl Iterator<Item = &DensityMatrix> {
        self.subspaces.iter().map(|s| &s.invariant_state)
    }
}

/// Invariant state of maximal support, built from the positive and negative
/// parts of every fixed-point basis element.
fn max_rank_invariant(space: &FixedPointSpace, d: usize) -> CMatrix {
    let mut acc = linalg::zeros(d, d);
    let mut count = 0usize;
    for x in &space.basis {
        let (pos, neg) = linalg::positive_split(x);
        for part in [pos, neg] {
            let t = linalg::trace_re(&part);
            if t > 1e-12 {
                acc += part.unscale(t);
                count += 1;
            }
        }
    }
    // empty basis at this tolerance: use the maximally mixed state
    if count == 0 {
        return linalg::identity(d).unscale(d as f64);
    }
    linalg::hermitize(&acc.unscale(count as f64))
}

/// Splits the enclosure spanned by `w` (columns in the ambient space) into
/// minimal enclosures.
fn split_enclosure(model: &KrausModel, w: CMatrix, out: &mut Vec<MinimalSubspace>, warnings: &mut Vec<String>) -> Result<()> {
    let local = model.compress(&w)?;
    let k = local.dim();
    let space = fixed_point_space(&local);
    warnings.extend(space.warnings.iter().cloned());
    let rho = max_rank_invariant(&space, k);

    let supp = linalg::support(&rho, SUPPORT_TOL);
    if supp.ncols() < k {
        // transient directions inside the enclosure; keep the recurrent part
        return split_enclosure(model, &w * supp, out, warnings);
    }

    if space.dim() <= 1 {
        let state = DensityMatrix::from_matrix_unchecked(linalg::hermitize(&(&w * &rho * w.adjoint())));
        out.push(MinimalSubspace { projector: &w * w.adjoint(), isometry: w, invariant_state: state });
        return Ok(());
    }

    // A traceless fixed point Y not proportional to rho; rho + tY reaches the
    // boundary of the positive cone at an invariant state of smaller support.
    let norm_rho = linalg::hs_norm(&rho);
    let direction = canonical_hermitian_basis(k)
        .into_iter()
        .map(|b| {
            let x = linalg::hermitize(&space.project(&b));
            let t = linalg::trace_re(&x);
            x - rho.scale(t)
        })
        .find(|y| linalg::hs_norm(y) > 1e-7 * norm_rho.max(1.0));
    let Some(y) = direction else {
        let state = DensityMatrix::from_matrix_unchecked(linalg::hermitize(&(&w * &rho * w.adjoint())));
        warnings.push(format!("fixed space of dimension {} collapsed numerically", space.dim()));
        out.push(MinimalSubspace { projector: &w * w.adjoint(), isometry: w, invariant_state: state });
        return Ok(());
    };
    let inv_sqrt = linalg::psd_inv_sqrt(&rho, 0.0);
    let lambda_min = HermitianEigen::new(&(&inv_sqrt * &y * &inv_sqrt)).min();
    debug_assert!(lambda_min < 0.0, "traceless congruent matrix has a negative eigenvalue");
    let sigma = linalg::hermitize(&(&rho - y.scale(1.0 / lambda_min)));

    let eig = HermitianEigen::new(&sigma);
    let scale = eig.max().max(1e-300);
    let inner = eig.columns_where(|l| l > SUPPORT_TOL * scale);
    let outer = eig.columns_where(|l| l <= SUPPORT_TOL * scale);
    if inner.ncols() == 0 || outer.ncols() == 0 {
        warnings.push("boundary state did not reduce the support".into());
        let state = DensityMatrix::from_matrix_unchecked(linalg::hermitize(&(&w * &rho * w.adjoint())));
        out.push(MinimalSubspace { projector: &w * w.adjoint(), isometry: w, invariant_state: state });
        return Ok(());
    }
    split_enclosure(model, &w * inner, out, warnings)?;
    split_enclosure(model, &w * outer, out, warnings)
}

/// Minimal-subspace decomposition of the channel of `model`.
///
/// Non-faithful channels are reported with `faithful = false`; their
/// subspaces decompose the support of the largest invariant state.
pub fn decompose(model: &KrausModel) -> Result<ChannelDecomposition> {
    model.ensure_valid()?;
    let d = model.dim();
    let space = fixed_point_space(model);
    let mut warnings = space.warnings.clone();
    let rho = max_rank_invariant(&space, d);
    let supp = linalg::support(&rho, SUPPORT_TOL);
    let faithful = supp.ncols() == d;
    let mut subspaces = Vec::new();
    split_enclosure(model, supp, &mut subspaces, &mut warnings)?;
    warnings.dedup();
    Ok(ChannelDecomposition { dim: d, faithful, fixed_point_dim: space.dim(), subspaces, warnings })
}
