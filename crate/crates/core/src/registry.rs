//! Named parametric model families.

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{re, KrausModel, ModelSource};

/// Name of the two-outcome qubit family
/// `V0 = [[sqrt(p/3), 0], [0, 1/2]]`, `V1 = [[0, sqrt(3)/2], [sqrt((3-p)/3), 0]]`.
pub const EXAMPLE_FAMILY: &str = "paper-example-5.2";

#[derive(Debug, Clone, Copy)]
pub struct RegistryEntry {
    pub name: &'static str,
    /// Closed box `[lo, hi]` per parameter coordinate.
    pub domain: &'static [(f64, f64)],
    builder: fn(&[f64]) -> KrausModel,
}

impl RegistryEntry {
    pub fn param_dim(&self) -> usize {
        self.domain.len()
    }

    pub fn contains(&self, param: &[f64]) -> bool {
        param.len() == self.domain.len()
            && param.iter().zip(self.domain).all(|(&p, &(lo, hi))| p >= lo && p <= hi)
    }

    /// Builds and validates the model at `param`.
    pub fn build(&self, param: &[f64]) -> Result<KrausModel> {
        if param.len() != self.domain.len() {
            return Err(Error::Precondition(format!(
                "{} takes {} parameter(s), got {}",
                self.name,
                self.domain.len(),
                param.len()
            )));
        }
        if !self.contains(param) {
            return Err(Error::Precondition(format!(
                "parameter {param:?} outside the domain {:?} of {}",
                self.domain, self.name
            )));
        }
        let model = (self.builder)(param).with_source(ModelSource::Registry {
            name: self.name.to_string(),
            param: param.to_vec(),
        });
        model.ensure_valid()?;
        Ok(model)
    }

    /// Scalar-parameter convenience.
    pub fn build_scalar(&self, p: f64) -> Result<KrausModel> {
        self.build(&[p])
    }
}

fn example_builder(param: &[f64]) -> KrausModel {
    let p = param[0];
    let v0 = CMatrix::from_row_slice(2, 2, &[re((p / 3.0).sqrt()), re(0.0), re(0.0), re(0.5)]);
    let v1 = CMatrix::from_row_slice(
        2,
        2,
        &[re(0.0), re(3f64.sqrt() / 2.0), re(((3.0 - p) / 3.0).sqrt()), re(0.0)],
    );
    KrausModel::new(vec!["0".into(), "1".into()], vec![vec![v0], vec![v1]]).expect("example family shape")
}

static ENTRIES: &[RegistryEntry] = &[RegistryEntry {
    name: EXAMPLE_FAMILY,
    domain: &[(0.0, 3.0)],
    builder: example_builder,
}];

pub fn entries() -> &'static [RegistryEntry] {
    ENTRIES
}

pub fn lookup(name: &str) -> Result<&'static RegistryEntry> {
    ENTRIES
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownRegistry(name.to_string()))
}

/// The two-outcome qubit family at `p`.
pub fn example_model(p: f64) -> Result<KrausModel> {
    lookup(EXAMPLE_FAMILY)?.build_scalar(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, diag};
    use crate::model::Outcome;

    #[test]
    fn boundary_parameter() {
        let m = example_model(0.0).unwrap();
        assert!(linalg::max_abs(&(&m.operators(Outcome(0))[0] - diag(&[0.0, 0.5]))) < 1e-15);
        assert!(m.validate().passed);
    }

    #[test]
    fn rejects_outside_domain() {
        assert!(matches!(example_model(3.5), Err(Error::Precondition(_))));
        assert!(matches!(example_model(-0.1), Err(Error::Precondition(_))));
        assert!(lookup(EXAMPLE_FAMILY).unwrap().build(&[1.0, 2.0]).is_err());
        assert!(matches!(lookup("nope"), Err(Error::UnknownRegistry(_))));
    }

    #[test]
    fn grid_is_valid() {
        let e = lookup(EXAMPLE_FAMILY).unwrap();
        for k in 0..=60 {
            let p = 3.0 * k as f64 / 60.0;
            assert!(e.build_scalar(p).unwrap().validate().passed, "p = {p}");
        }
    }
}
