use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{KrausModel, Outcome};
use crate::parallel::{map_indices, Execution};
use crate::state::DensityMatrix;

use super::decompose::decompose;

/// Word-probability differences above this separate two measures.
pub const SEPARATION_TOL: f64 = 1e-9;
/// Largest `|Y|^L` the exhaustive search accepts.
pub const ENUMERATION_BUDGET: f64 = 1e7;

/// Result of comparing one invariant state of each model.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSeparation {
    /// Index of the minimal subspace of the first model.
    pub first: usize,
    /// Index of the minimal subspace of the second model.
    pub second: usize,
    /// Largest `|P_a(w) - P_b(w)|` over all words of length `1..=L`.
    pub margin: f64,
    pub separated: bool,
    /// Shortest separating word, lexicographically first among equals.
    pub witness: Option<Vec<Outcome>>,
    /// `(P_a(witness), P_b(witness))`.
    pub witness_probabilities: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiabilityReport {
    pub max_len: usize,
    /// All pairs separated.
    pub decided: bool,
    pub pairs: Vec<PairSeparation>,
}

#[derive(Debug, Clone)]
struct Search {
    margin: f64,
    witness: Option<(Vec<Outcome>, f64, f64)>,
}

impl Search {
    fn merge(mut self, other: Search) -> Search {
        self.margin = self.margin.max(other.margin);
        self.witness = match (self.witness, other.witness) {
            (Some(a), Some(b)) => Some(if b.0.len() < a.0.len() { b } else { a }),
            (a, b) => a.or(b),
        };
        self
    }
}

fn search(
    a: &KrausModel,
    b: &KrausModel,
    xa: &CMatrix,
    xb: &CMatrix,
    word: &mut Vec<Outcome>,
    max_len: usize,
    found: &mut Search,
) {
    let pa = linalg::trace_re(xa);
    let pb = linalg::trace_re(xb);
    let gap = (pa - pb).abs();
    found.margin = found.margin.max(gap);
    if gap > SEPARATION_TOL && found.witness.as_ref().is_none_or(|w| word.len() < w.0.len()) {
        found.witness = Some((word.clone(), pa, pb));
    }
    if word.len() == max_len {
        return;
    }
    for y in a.outcomes() {
        let na = a.kraus_map(y, xa);
        let nb = b.kraus_map(y, xb);
        word.push(y);
        search(a, b, &na, &nb, word, max_len, found);
        word.pop();
    }
}

fn separate(a: &KrausModel, rho_a: &DensityMatrix, b: &KrausModel, rho_b: &DensityMatrix, max_len: usize, exec: Execution) -> Search {
    let subtrees = map_indices(a.num_outcomes(), exec, |k| {
        let y = Outcome(k);
        let mut found = Search { margin: 0.0, witness: None };
        let mut word = vec![y];
        search(a, b, &a.kraus_map(y, rho_a.matrix()), &b.kraus_map(y, rho_b.matrix()), &mut word, max_len, &mut found);
        found
    });
    subtrees.into_iter().fold(Search { margin: 0.0, witness: None }, Search::merge)
}

/// Exhaustive separation test between two families of states, one pair at a
/// time, over words of length `1..=max_len`.
pub fn check_identifiability_states(
    a: &KrausModel,
    states_a: &[DensityMatrix],
    b: &KrausModel,
    states_b: &[DensityMatrix],
    max_len: usize,
    exec: Execution,
) -> Result<IdentifiabilityReport> {
    if max_len == 0 {
        return Err(Error::Precondition("word length bound must be at least 1".into()));
    }
    if a.labels() != b.labels() {
        return Err(Error::Precondition("models must share the outcome alphabet".into()));
    }
    let words = (a.num_outcomes() as f64).powi(max_len as i32);
    if words > ENUMERATION_BUDGET {
        return Err(Error::Budget { words, limit: ENUMERATION_BUDGET });
    }
    let mut pairs = Vec::new();
    for (i, ra) in states_a.iter().enumerate() {
        for (j, rb) in states_b.iter().enumerate() {
            let found = separate(a, ra, b, rb, max_len, exec);
            let separated = found.witness.is_some();
            let (witness, witness_probabilities) = match found.witness {
                Some((w, pa, pb)) => (Some(w), Some((pa, pb))),
                None => (None, None),
            };
            pairs.push(PairSeparation { first: i, second: j, margin: found.margin, separated, witness, witness_probabilities });
        }
    }
    let decided = pairs.iter().all(|p| p.separated);
    Ok(IdentifiabilityReport { max_len, decided, pairs })
}

/// Checks that every minimal invariant state of `a` and every minimal
/// invariant state of `b` induce different word distributions, with words
/// up to length `max_len`. Both channels must be faithful.
pub fn check_identifiability(a: &KrausModel, b: &KrausModel, max_len: usize, exec: Execution) -> Result<IdentifiabilityReport> {
    let da = decompose(a)?;
    let db = decompose(b)?;
    for (name, dec) in [("first", &da), ("second", &db)] {
        if !dec.faithful {
            return Err(Error::NotFaithful(format!("{name} model has a transient part")));
        }
    }
    let sa: Vec<DensityMatrix> = da.minimal_states().cloned().collect();
    let sb: Vec<DensityMatrix> = db.minimal_states().cloned().collect();
    check_identifiability_states(a, &sa, b, &sb, max_len, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::example_model;
    use approx::assert_abs_diff_eq;

    #[test]
    fn separated_at_length_one() {
        let a = example_model(1.0).unwrap();
        let b = example_model(2.0).unwrap();
        let r = check_identifiability(&a, &b, 1, Execution::Sequential).unwrap();
        assert!(r.decided);
        let pair = &r.pairs[0];
        assert_eq!(pair.witness.as_deref(), Some(&[Outcome(0)][..]));
        let (pa, pb) = pair.witness_probabilities.unwrap();
        assert_abs_diff_eq!(pa, 5.0 / 17.0, epsilon = 1e-9);
        assert_abs_diff_eq!(pb, 7.0 / 13.0, epsilon = 1e-9);
    }

    #[test]
    fn identical_models_never_decided() {
        let a = example_model(1.4).unwrap();
        for len in 1..=6 {
            let r = check_identifiability(&a, &a, len, Execution::Parallel).unwrap();
            assert!(!r.decided);
            assert!(r.pairs.iter().all(|p| p.margin == 0.0 && p.witness.is_none()));
        }
    }

    #[test]
    fn nearby_parameters() {
        // P(0) from the invariant state is (2p+3)/(21-4p), slope 54/13.8^2 at 1.8
        let a = example_model(1.8).unwrap();
        let b = example_model(1.8000001).unwrap();
        let r = check_identifiability(&a, &b, 3, Execution::Sequential).unwrap();
        assert!(r.decided);
        assert_eq!(r.pairs[0].witness.as_deref(), Some(&[Outcome(0)][..]));
        let (pa, pb) = r.pairs[0].witness_probabilities.unwrap();
        assert_abs_diff_eq!(pb - pa, 1e-7 * 54.0 / (13.8 * 13.8), epsilon = 1e-10);
        assert!(r.pairs[0].margin >= pb - pa);

        let c = example_model(1.8 + 1e-10).unwrap();
        let r = check_identifiability(&a, &c, 3, Execution::Sequential).unwrap();
        assert!(!r.decided);
        assert!(r.pairs[0].margin < SEPARATION_TOL);
    }

    #[test]
    fn symmetric_in_arguments() {
        let a = KrausModel::direct_sum(&example_model(0.4).unwrap(), &example_model(2.0).unwrap()).unwrap();
        let b = KrausModel::direct_sum(&example_model(1.0).unwrap(), &example_model(2.0).unwrap()).unwrap();
        let ab = check_identifiability(&a, &b, 4, Execution::Parallel).unwrap();
        let ba = check_identifiability(&b, &a, 4, Execution::Parallel).unwrap();
        assert_eq!(ab.decided, ba.decided);
        // the p = 2 blocks coincide, so the shared pair is never separated
        assert!(!ab.decided);
        for p in &ab.pairs {
            let q = ba.pairs.iter().find(|q| q.first == p.second && q.second == p.first).unwrap();
            assert_abs_diff_eq!(p.margin, q.margin, epsilon = 1e-15);
        }
    }

    #[test]
    fn preconditions() {
        let a = example_model(1.0).unwrap();
        assert!(matches!(check_identifiability(&a, &a, 0, Execution::Sequential), Err(Error::Precondition(_))));
        assert!(matches!(check_identifiability(&a, &a, 24, Execution::Sequential), Err(Error::Budget { .. })));
        let transient = example_model(3.0).unwrap();
        assert!(matches!(check_identifiability(&a, &transient, 2, Execution::Sequential), Err(Error::NotFaithful(_))));
    }
}
