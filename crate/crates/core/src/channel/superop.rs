use crate::linalg::{self, CMatrix};
use crate::model::KrausModel;

/// Singular values of `S - 1` at or below this are counted as fixed directions.
pub const EIGEN_ONE_TOL: f64 = 1e-9;
/// Singular values in `(EIGEN_ONE_TOL, EIGEN_ONE_WARN]` make the rank ambiguous.
pub const EIGEN_ONE_WARN: f64 = 1e-6;

/// Matrix of `Φ` acting on column-stacked `d x d` matrices.
#[derive(Debug, Clone)]
pub struct Superoperator {
    dim: usize,
    matrix: CMatrix,
}

impl Superoperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let v = &self.matrix * linalg::vectorize(x);
        linalg::unvectorize(&v, self.dim, self.dim)
    }
}

/// `S = Σ conj(V) ⊗ V`, so that `S vec(X) = vec(Σ V X V†)`.
pub fn build_superoperator(model: &KrausModel) -> Superoperator {
    let d = model.dim();
    let mut s = linalg::zeros(d * d, d * d);
    for y in model.outcomes() {
        for v in model.operators(y) {
            s += v.map(|z| z.conj()).kronecker(v);
        }
    }
    Superoperator { dim: d, matrix: s }
}

/// Hermitian basis of `{X : Φ(X) = X}`, orthonormal for `Re Tr(A† B)`.
#[derive(Debug, Clone)]
pub struct FixedPointSpace {
    pub basis: Vec<CMatrix>,
    /// Isometry `d² x k` onto the complex fixed space (vectorized).
    pub(crate) projector_basis: CMatrix,
    pub warnings: Vec<String>,
}

impl FixedPointSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Orthogonal projection of `x` onto the fixed space.
    pub fn project(&self, x: &CMatrix) -> CMatrix {
        let d = x.nrows();
        let n = &self.projector_basis;
        let v = n * (n.adjoint() * linalg::vectorize(x));
        linalg::unvectorize(&v, d, d)
    }
}

/// Canonical Hermitian basis: `E_ii`, then `(E_ij + E_ji)/√2` and
/// `i(E_ij - E_ji)/√2` for `i < j`.
pub(crate) fn canonical_hermitian_basis(d: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut m = linalg::zeros(d, d);
        m[(i, i)] = linalg::ONE;
        out.push(m);
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in i + 1..d {
            let mut re = linalg::zeros(d, d);
            re[(i, j)] = linalg::c(h, 0.0);
            re[(j, i)] = linalg::c(h, 0.0);
            out.push(re);
            let mut im = linalg::zeros(d, d);
            im[(i, j)] = linalg::c(0.0, -h);
            im[(j, i)] = linalg::c(0.0, h);
            out.push(im);
        }
    }
    out
}

pub fn fixed_point_space(model: &KrausModel) -> FixedPointSpace {
    let d = model.dim();
    let s = build_superoperator(model);
    let shifted = s.matrix - linalg::identity(d * d);
    let svd = shifted.svd(false, true);
    let v = svd.v_t.expect("requested right singular vectors").adjoint();

    let mut cols = Vec::new();
    let mut warnings = Vec::new();
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma <= EIGEN_ONE_TOL {
            cols.push(k);
        } else if sigma <= EIGEN_ONE_WARN {
            warnings.push(format!(
                "eigenvalue-one rank ambiguous: singular value {sigma:.3e} of (S - 1) lies in ({EIGEN_ONE_TOL:e}, {EIGEN_ONE_WARN:e}]"
            ));
        }
    }
    let projector_basis = CMatrix::from_fn(d * d, cols.len(), |i, j| v[(i, cols[j])]);

    let mut space = FixedPointSpace { basis: Vec::new(), projector_basis, warnings };
    let k = cols.len();
    for b in canonical_hermitian_basis(d) {
        if space.basis.len() == k {
            break;
        }
        let mut x = linalg::hermitize(&space.project(&b));
        for e in &space.basis {
            x -= e.scale(linalg::hs_inner(e, &x));
        }
        let norm = linalg::hs_norm(&x);
        if norm > 1e-8 {
            let mut x = x.unscale(norm);
            if linalg::trace_re(&x) < -1e-12 {
                x = -x;
            }
            space.basis.push(x);
        }
    }
    space
}
