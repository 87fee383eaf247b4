//! JSON model documents.
//!
//! Three shapes are accepted:
//!
//! ```json
//! { "dim": 2, "outcomes": ["0", "1"], "kraus": { "0": [M, ...], "1": [M, ...] } }
//! { "dim": 2, "outcomes": ["0", "1"], "operators": [M, ...], "eta": [[...], [...]] }
//! { "registry": "paper-example-5.2", "param": [1.8] }
//! ```
//!
//! where each matrix `M` is a list of rows and each entry is `[re, im]`.
//! States use the same matrix encoding.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{KrausModel, ModelSource, Outcome};
use crate::registry;
use crate::state::DensityMatrix;

/// Nested `[[[re, im], ...], ...]` row-major matrix.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<CMatrix> {
    let r = rows.len();
    let cols = rows.first().map_or(0, |row| row.len());
    if r == 0 || cols == 0 || rows.iter().any(|row| row.len() != cols) {
        return Err(Error::MalformedModel("ragged or empty matrix".into()));
    }
    Ok(CMatrix::from_fn(r, cols, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

#[derive(Debug, Serialize, Deserialize)]
struct ExplicitDoc {
    dim: usize,
    outcomes: Vec<Value>,
    kraus: BTreeMap<String, Vec<MatrixJson>>,
}

#[derive(Debug, Deserialize)]
struct ImperfectDoc {
    dim: usize,
    outcomes: Vec<Value>,
    operators: Vec<MatrixJson>,
    eta: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RegistryDoc {
    registry: String,
    param: Vec<f64>,
}

fn label_of(v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::MalformedModel(format!("outcome label {other} is not a string or number"))),
    }
}

fn check_dim(model: &KrausModel, dim: usize) -> Result<()> {
    if model.dim() != dim {
        return Err(Error::Dimension(format!("declared dim {dim}, operators are {}", model.dim())));
    }
    Ok(())
}

/// Parses and validates a model document (completeness enforced).
pub fn model_from_json(text: &str) -> Result<KrausModel> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::MalformedModel(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::MalformedModel("model document must be a JSON object".into()))?;
    let bad = |e: serde_json::Error| Error::MalformedModel(e.to_string());
    let model = if obj.contains_key("registry") {
        let doc: RegistryDoc = serde_json::from_value(value).map_err(bad)?;
        return registry::lookup(&doc.registry)?.build(&doc.param);
    } else if obj.contains_key("kraus") {
        let doc: ExplicitDoc = serde_json::from_value(value).map_err(bad)?;
        let labels = doc.outcomes.iter().map(label_of).collect::<Result<Vec<_>>>()?;
        for key in doc.kraus.keys() {
            if !labels.contains(key) {
                return Err(Error::MalformedModel(format!("kraus entry {key:?} is not a declared outcome")));
            }
        }
        let mut ops = Vec::with_capacity(labels.len());
        for l in &labels {
            let family = doc
                .kraus
                .get(l)
                .map(|ms| ms.iter().map(matrix_from_json).collect::<Result<Vec<_>>>())
                .transpose()?
                .unwrap_or_default();
            ops.push(family);
        }
        let m = KrausModel::new(labels, ops)?;
        check_dim(&m, doc.dim)?;
        m
    } else if obj.contains_key("operators") {
        let doc: ImperfectDoc = serde_json::from_value(value).map_err(bad)?;
        let labels = doc.outcomes.iter().map(label_of).collect::<Result<Vec<_>>>()?;
        let ops = doc.operators.iter().map(matrix_from_json).collect::<Result<Vec<_>>>()?;
        let m = KrausModel::from_imperfect(labels, ops, &doc.eta)?;
        check_dim(&m, doc.dim)?;
        m
    } else {
        return Err(Error::MalformedModel("expected one of \"kraus\", \"operators\" or \"registry\"".into()));
    };
    m_valid(model)
}

fn m_valid(model: KrausModel) -> Result<KrausModel> {
    model.ensure_valid()?;
    Ok(model)
}

/// Serializes a model. Registry models keep their registry reference unless
/// `expand` is set.
pub fn model_to_json(model: &KrausModel, expand: bool) -> String {
    if let (ModelSource::Registry { name, param }, false) = (model.source(), expand) {
        let doc = RegistryDoc { registry: name.clone(), param: param.clone() };
        return serde_json::to_string_pretty(&doc).expect("serializable");
    }
    let kraus = model
        .outcomes()
        .map(|y| {
            let ms = model.operators(y).iter().map(matrix_to_json).collect();
            (model.label(y).to_string(), ms)
        })
        .collect();
    let doc = ExplicitDoc {
        dim: model.dim(),
        outcomes: model.labels().iter().map(|l| Value::String(l.clone())).collect(),
        kraus,
    };
    serde_json::to_string_pretty(&doc).expect("serializable")
}

pub fn state_from_json(text: &str) -> Result<DensityMatrix> {
    let rows: MatrixJson = serde_json::from_str(text).map_err(|e| Error::InvalidState(e.to_string()))?;
    DensityMatrix::new(matrix_from_json(&rows)?)
}

/// Maps labels to outcome indices of `model`.
pub fn outcomes_from_labels(model: &KrausModel, labels: &[String]) -> Result<Vec<Outcome>> {
    labels.iter().map(|l| model.outcome(l)).collect()
}
