//! Kraus measurement models.
//!
//! A model maps each outcome `y` of a finite alphabet to a family of
//! operators `{V_{y,mu}}`; the outcome map is `K_y(X) = Σ_mu V X V†` and the
//! channel is `Φ = Σ_y K_y`. Imperfect detection is compiled into the same
//! form (see [`KrausModel::from_imperfect`]).

use std::fmt;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::state::DensityMatrix;

/// Completeness tolerance for `Σ V†V = 1`.
pub const COMPLETENESS_TOL: f64 = 1e-9;

/// Conditional probabilities below this floor are treated as exact zeros.
pub const PROBABILITY_FLOOR: f64 = 1e-14;

/// Index of an outcome in its model's alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Outcome(pub usize);

impl Outcome {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Where a model came from; carried into records and reports.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Explicit,
    Registry { name: String, param: Vec<f64> },
}

impl fmt::Display for ModelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSource::Explicit => write!(f, "explicit"),
            ModelSource::Registry { name, param } => {
                let p: Vec<String> = param.iter().map(|x| x.to_string()).collect();
                write!(f, "{name}[{}]", p.join(","))
            }
        }
    }
}

/// Outcome of [`KrausModel::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityReport {
    pub passed: bool,
    /// `max |Σ V†V - 1|` over entries.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrausModel {
    dim: usize,
    labels: Vec<String>,
    operators: Vec<Vec<CMatrix>>,
    source: ModelSource,
}

impl KrausModel {
    /// Structural constructor: square operators of one dimension, one
    /// (possibly empty) operator list per unique label. Completeness is not
    /// enforced here, see [`KrausModel::validated`].
    pub fn new(labels: Vec<String>, operators: Vec<Vec<CMatrix>>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::MalformedModel("empty outcome alphabet".into()));
        }
        if labels.len() != operators.len() {
            return Err(Error::MalformedModel(format!(
                "{} labels but {} operator families",
                labels.len(),
                operators.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::MalformedModel(format!("duplicate outcome label {l:?}")));
            }
        }
        let dim = operators
            .iter()
            .flatten()
            .next()
            .map(|v| v.nrows())
            .ok_or_else(|| Error::MalformedModel("model has no operators".into()))?;
        if dim == 0 {
            return Err(Error::Dimension("zero-dimensional operator".into()));
        }
        for (l, family) in labels.iter().zip(&operators) {
            for v in family {
                if v.nrows() != dim || v.ncols() != dim {
                    return Err(Error::Dimension(format!(
                        "operator for outcome {l:?} is {}x{}, expected {dim}x{dim}",
                        v.nrows(),
                        v.ncols()
                    )));
                }
            }
        }
        Ok(Self { dim, labels, operators, source: ModelSource::Explicit })
    }

    /// Like [`KrausModel::new`], additionally requiring completeness.
    pub fn validated(labels: Vec<String>, operators: Vec<Vec<CMatrix>>) -> Result<Self> {
        let m = Self::new(labels, operators)?;
        m.ensure_valid()?;
        Ok(m)
    }

    /// Imperfect measurement: `V'_{y,mu} = sqrt(eta[y][mu]) V_mu`.
    ///
    /// `eta` has one row per outcome and one column per operator; columns
    /// must sum to one for the result to be complete.
    pub fn from_imperfect(labels: Vec<String>, operators: Vec<CMatrix>, eta: &[Vec<f64>]) -> Result<Self> {
        if eta.len() != labels.len() {
            return Err(Error::MalformedModel(format!(
                "eta has {} rows for {} outcomes",
                eta.len(),
                labels.len()
            )));
        }
        let mut families = Vec::with_capacity(labels.len());
        for row in eta {
            if row.len() != operators.len() {
                return Err(Error::MalformedModel(format!(
                    "eta row has {} entries for {} operators",
                    row.len(),
                    operators.len()
                )));
            }
            let mut family = Vec::new();
            for (&e, v) in row.iter().zip(&operators) {
                if !(e >= 0.0) {
                    return Err(Error::MalformedModel(format!("negative efficiency {e}")));
                }
                if e > 0.0 {
                    family.push(v.scale(e.sqrt()));
                }
            }
            families.push(family);
        }
        if families.iter().all(|f| f.is_empty()) {
            return Err(Error::MalformedModel("all efficiencies are zero".into()));
        }
        Self::new(labels, families)
    }

    /// Trivial one-outcome model with `V = 1`.
    pub fn identity(dim: usize) -> Self {
        Self::new(vec!["0".into()], vec![vec![linalg::identity(dim)]]).expect("identity model")
    }

    pub fn with_source(mut self, source: ModelSource) -> Self {
        self.source = source;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_outcomes(&self) -> usize {
        self.labels.len()
    }

    pub fn outcomes(&self) -> impl Iterator<Item = Outcome> {
        (0..self.labels.len()).map(Outcome)
    }

    pub fn operators(&self, y: Outcome) -> &[CMatrix] {
        &self.operators[y.0]
    }

    pub fn source(&self) -> &ModelSource {
        &self.source
    }

    pub fn outcome(&self, label: &str) -> Result<Outcome> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(Outcome)
            .ok_or_else(|| Error::UnknownOutcome(label.to_string()))
    }

    pub fn label(&self, y: Outcome) -> &str {
        &self.labels[y.0]
    }

    fn check_outcome(&self, y: Outcome) -> Result<()> {
        if y.0 < self.labels.len() {
            Ok(())
        } else {
            Err(Error::UnknownOutcome(format!("index {} (alphabet size {})", y.0, self.labels.len())))
        }
    }

    fn check_dim(&self, m: &CMatrix) -> Result<()> {
        if m.nrows() == self.dim && m.ncols() == self.dim {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{}x{} matrix for a model of dimension {}",
                m.nrows(),
                m.ncols(),
                self.dim
            )))
        }
    }

    /// Completeness report for `Σ_{y,mu} V†V = 1`.
    pub fn validate(&self) -> ValidityReport {
        let mut total = linalg::zeros(self.dim, self.dim);
        for v in self.operators.iter().flatten() {
            total += v.adjoint() * v;
        }
        let residual = linalg::max_abs(&(total - linalg::identity(self.dim)));
        ValidityReport { passed: residual <= COMPLETENESS_TOL, residual }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.passed {
            Ok(())
        } else {
            Err(Error::Incomplete { residual: report.residual })
        }
    }

    /// `K_y(X)` on an arbitrary matrix, no checks.
    pub fn kraus_map(&self, y: Outcome, x: &CMatrix) -> CMatrix {
        let mut out = linalg::zeros(self.dim, self.dim);
        for v in &self.operators[y.0] {
            out += linalg::conjugate_by(v, x);
        }
        out
    }

    /// `K_y(rho)`, unnormalized.
    pub fn apply_kraus(&self, y: Outcome, rho: &DensityMatrix) -> Result<CMatrix> {
        self.check_outcome(y)?;
        self.check_dim(rho.matrix())?;
        Ok(self.kraus_map(y, rho.matrix()))
    }

    /// `Tr K_y(rho)`.
    pub fn outcome_probability(&self, y: Outcome, rho: &DensityMatrix) -> Result<f64> {
        Ok(linalg::trace_re(&self.apply_kraus(y, rho)?))
    }

    /// Probabilities of every outcome, in alphabet order.
    pub fn outcome_probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        self.check_dim(rho.matrix())?;
        Ok(self.outcomes().map(|y| linalg::trace_re(&self.kraus_map(y, rho.matrix()))).collect())
    }

    /// `Φ(X) = Σ_y K_y(X)` on an arbitrary matrix.
    pub fn channel_map(&self, x: &CMatrix) -> CMatrix {
        let mut out = linalg::zeros(self.dim, self.dim);
        for v in self.operators.iter().flatten() {
            out += linalg::conjugate_by(v, x);
        }
        out
    }

    pub fn channel_apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_dim(rho.matrix())?;
        DensityMatrix::new(linalg::hermitize(&self.channel_map(rho.matrix())))
    }

    /// `Tr(K_{y_{n-1}} ∘ ... ∘ K_{y_0}(rho))`, computed without normalization.
    /// Underflows for long words; use [`KrausModel::word_log_likelihood`].
    pub fn word_likelihood(&self, word: &[Outcome], rho: &DensityMatrix) -> Result<f64> {
        self.check_dim(rho.matrix())?;
        let mut x = rho.matrix().clone();
        for &y in word {
            self.check_outcome(y)?;
            x = self.kraus_map(y, &x);
        }
        Ok(linalg::trace_re(&x))
    }

    /// Natural log of the word probability, accumulated along the normalized
    /// trajectory. Returns `-inf` once a step falls below
    /// [`PROBABILITY_FLOOR`].
    pub fn word_log_likelihood(&self, word: &[Outcome], rho: &DensityMatrix) -> Result<f64> {
        self.check_dim(rho.matrix())?;
        let mut x = rho.matrix().clone();
        let mut log_p = 0.0;
        for &y in word {
            self.check_outcome(y)?;
            let next = self.kraus_map(y, &x);
            let t = linalg::trace_re(&next);
            if t < PROBABILITY_FLOOR {
                return Ok(f64::NEG_INFINITY);
            }
            log_p += t.ln();
            x = next.unscale(t);
        }
        Ok(log_p)
    }

    /// Model on `ℂ^k` given by `W† V W` for an isometry `W` (`d x k`).
    /// Trace preserving when `range(W)` is invariant under every operator.
    pub fn compress(&self, w: &CMatrix) -> Result<Self> {
        if w.nrows() != self.dim || w.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "isometry of shape {:?} for dimension {}",
                w.shape(),
                self.dim
            )));
        }
        let wa = w.adjoint();
        let ops = self
            .operators
            .iter()
            .map(|family| family.iter().map(|v| &wa * v * w).collect())
            .collect();
        Self::new(self.labels.clone(), ops)
    }

    /// Block-diagonal model `diag(V^a_{y,mu}, V^b_{y,mu})` over a shared
    /// alphabet; missing `mu` entries are padded with zeros.
    pub fn direct_sum(a: &Self, b: &Self) -> Result<Self> {
        if a.labels != b.labels {
            return Err(Error::MalformedModel("direct sum needs identical alphabets".into()));
        }
        let ops = a
            .operators
            .iter()
            .zip(&b.operators)
            .map(|(fa, fb)| {
                (0..fa.len().max(fb.len()))
                    .map(|mu| {
                        let va = fa.get(mu).cloned().unwrap_or_else(|| linalg::zeros(a.dim, a.dim));
                        let vb = fb.get(mu).cloned().unwrap_or_else(|| linalg::zeros(b.dim, b.dim));
                        linalg::block_diag(&[va, vb])
                    })
                    .collect()
            })
            .collect();
        Self::new(a.labels.clone(), ops)
    }

    /// SHA-256 over dimension, labels and operator bits.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for (label, family) in self.labels.iter().zip(&self.operators) {
            h.update((label.len() as u64).to_le_bytes());
            h.update(label.as_bytes());
            h.update((family.len() as u64).to_le_bytes());
            for v in family {
                for z in v.iter() {
                    h.update(z.re.to_bits().to_le_bytes());
                    h.update(z.im.to_bits().to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }
}

/// Shorthand for `Complex64` literals in model definitions.
pub(crate) fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag;
    use crate::registry::example_model;
    use crate::sampling::{random_model, random_state};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const Y0: Outcome = Outcome(0);
    const Y1: Outcome = Outcome(1);

    #[test]
    fn validate_examples() {
        let m = example_model(1.8).unwrap();
        let r = m.validate();
        assert!(r.passed);
        assert!(r.residual < 1e-15);
        assert!(KrausModel::identity(2).validate().passed);

        // second operator replaced by zero
        for p in [0.5, 1.8, 2.5] {
            let full = example_model(p).unwrap();
            let broken = KrausModel::new(
                full.labels().to_vec(),
                vec![full.operators(Y0).to_vec(), vec![linalg::zeros(2, 2)]],
            )
            .unwrap();
            let r = broken.validate();
            assert!(!r.passed);
            let expected = f64::max(1.0 - p / 3.0, 0.75);
            assert_abs_diff_eq!(r.residual, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn structural_errors() {
        let err = KrausModel::new(
            vec!["a".into(), "b".into()],
            vec![vec![linalg::identity(2)], vec![linalg::identity(3)]],
        );
        assert!(matches!(err, Err(Error::Dimension(_))));
        let dup = KrausModel::new(
            vec!["a".into(), "a".into()],
            vec![vec![linalg::identity(2)], vec![linalg::identity(2)]],
        );
        assert!(matches!(dup, Err(Error::MalformedModel(_))));
    }

    #[test]
    fn apply_kraus_examples() {
        let m = example_model(3.0).unwrap();
        let up = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let k0 = m.apply_kraus(Y0, &up).unwrap();
        assert!(linalg::max_abs(&(k0 - diag(&[1.0, 0.0]))) < 1e-15);
        let k1 = m.apply_kraus(Y1, &up).unwrap();
        assert!(linalg::max_abs(&k1) < 1e-15);
        assert!(matches!(m.apply_kraus(Outcome(2), &up), Err(Error::UnknownOutcome(_))));

        let id = KrausModel::identity(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_state(2, &mut rng);
        let out = id.apply_kraus(Y0, &rho).unwrap();
        assert!(linalg::max_abs(&(out - rho.matrix())) < 1e-15);
    }

    #[test]
    fn outcome_probability_examples() {
        let m = example_model(3.0).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        assert_abs_diff_eq!(m.outcome_probability(Y0, &mixed).unwrap(), 0.625, epsilon = 1e-15);
        assert_abs_diff_eq!(m.outcome_probability(Y1, &mixed).unwrap(), 0.375, epsilon = 1e-15);

        let m = example_model(1.8).unwrap();
        let inv = DensityMatrix::diagonal(&[9.0 / 13.8, 4.8 / 13.8]).unwrap();
        assert_abs_diff_eq!(m.outcome_probability(Y0, &inv).unwrap(), 0.478_260_869_565, epsilon = 1e-10);
        let p = m.outcome_probabilities(&inv).unwrap();
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn channel_examples() {
        let m = example_model(1.8).unwrap();
        let inv = DensityMatrix::diagonal(&[9.0 / 13.8, 4.8 / 13.8]).unwrap();
        let out = m.channel_apply(&inv).unwrap();
        assert!(linalg::max_abs(&(out.matrix() - inv.matrix())) < 1e-9);

        let m3 = example_model(3.0).unwrap();
        let up = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        assert!(linalg::max_abs(&(m3.channel_apply(&up).unwrap().matrix() - up.matrix())) < 1e-15);
    }

    #[test]
    fn word_likelihood_examples() {
        let m = example_model(3.0).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        assert_eq!(m.word_likelihood(&[], &mixed).unwrap(), 1.0);
        assert_abs_diff_eq!(m.word_likelihood(&[Y0], &mixed).unwrap(), 0.625, epsilon = 1e-15);
    }

    #[test]
    fn words_sum_to_one_and_factorize() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..4 {
            let m = if trial == 0 { example_model(1.3).unwrap() } else { random_model(3, 2, 2, &mut rng) };
            let rho = random_state(m.dim(), &mut rng);
            for n in 0..=6usize {
                let mut total = 0.0;
                for bits in 0..(1u32 << n) {
                    let word: Vec<Outcome> = (0..n).map(|k| Outcome(((bits >> k) & 1) as usize)).collect();
                    let p = m.word_likelihood(&word, &rho).unwrap();
                    let lp = m.word_log_likelihood(&word, &rho).unwrap();
                    assert_abs_diff_eq!(p, lp.exp(), epsilon = 1e-9);
                    total += p;
                }
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn imperfect_measurement_compiles_to_kraus() {
        // two operators, detector with efficiency 0.8 on the second
        let m = example_model(1.2).unwrap();
        let ops = vec![m.operators(Y0)[0].clone(), m.operators(Y1)[0].clone()];
        let eta = vec![vec![1.0, 0.2], vec![0.0, 0.8]];
        let imp = KrausModel::from_imperfect(vec!["0".into(), "1".into()], ops, &eta).unwrap();
        assert!(imp.validate().passed);
        assert_eq!(imp.operators(Y0).len(), 2);
        assert_eq!(imp.operators(Y1).len(), 1);
        let bad = vec![vec![1.0, 0.5], vec![0.0, 0.8]];
        let ops = vec![m.operators(Y0)[0].clone(), m.operators(Y1)[0].clone()];
        let imp = KrausModel::from_imperfect(vec!["0".into(), "1".into()], ops, &bad).unwrap();
        assert!(!imp.validate().passed);
    }

    #[test]
    fn direct_sum_is_complete() {
        let s = KrausModel::direct_sum(&example_model(1.0).unwrap(), &example_model(2.0).unwrap()).unwrap();
        assert_eq!(s.dim(), 4);
        assert!(s.validate().passed);
    }

    #[test]
    fn hash_distinguishes_parameters() {
        let a = example_model(1.0).unwrap();
        let b = example_model(1.0).unwrap();
        let c = example_model(1.0 + 1e-12).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
