//! Plain-text measurement records.
//!
//! ```text
//! # qtraj record v1
//! # model: paper-example-5.2[1.8]
//! # model_sha256: <hex>
//! # seed: 7
//! # dim: 2
//! # outcomes: 0,1
//! # init: invariant
//! # steps: 3
//! # data_sha256: <hex of the body>
//! 0
//! 1
//! 1
//! ```
//!
//! The body is one outcome label per line, each terminated by `\n`.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::Outcome;
use crate::trajectory::TrajectoryRecord;

pub const RECORD_MAGIC: &str = "# qtraj record v1";

fn body(record: &TrajectoryRecord) -> String {
    let mut s = String::with_capacity(record.len() * 2);
    for label in record.outcome_labels() {
        s.push_str(label);
        s.push('\n');
    }
    s
}

fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn write_record(record: &TrajectoryRecord) -> String {
    let data = body(record);
    let mut out = String::new();
    out.push_str(RECORD_MAGIC);
    out.push('\n');
    for (key, value) in [
        ("model", record.model_id.clone()),
        ("model_sha256", record.model_hash.clone()),
        ("seed", record.seed.to_string()),
        ("dim", record.dim.to_string()),
        ("outcomes", record.labels.join(",")),
        ("init", record.init.clone()),
        ("steps", record.len().to_string()),
        ("data_sha256", digest(&data)),
    ] {
        out.push_str(&format!("# {key}: {value}\n"));
    }
    out.push_str(&data);
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Record(msg.into())
}

/// Parses and checks a record. States are not stored in the text form, so
/// `initial_state` and `states` come back as `None`.
pub fn parse_record(text: &str) -> Result<TrajectoryRecord> {
    let mut lines = text.split_inclusive('\n');
    let first = lines.next().ok_or_else(|| bad("empty record"))?;
    if first.trim_end() != RECORD_MAGIC {
        return Err(bad(format!("unrecognized header line {:?}", first.trim_end())));
    }
    let mut fields = std::collections::BTreeMap::new();
    let mut rest = &text[first.len()..];
    while rest.starts_with('#') {
        let end = rest.find('\n').map_or(rest.len(), |i| i + 1);
        let line = rest[..end].trim_end();
        let (key, value) = line[1..]
            .trim_start()
            .split_once(':')
            .ok_or_else(|| bad(format!("malformed header line {line:?}")))?;
        fields.insert(key.trim().to_string(), value.trim().to_string());
        rest = &rest[end..];
    }
    let field = |k: &str| fields.get(k).cloned().ok_or_else(|| bad(format!("missing header field {k}")));
    let number = |k: &str| -> Result<u64> {
        field(k)?.parse::<u64>().map_err(|e| bad(format!("header field {k}: {e}")))
    };

    let expected = field("data_sha256")?;
    if digest(rest) != expected {
        return Err(bad("data checksum mismatch"));
    }
    let labels: Vec<String> = field("outcomes")?.split(',').map(str::to_string).collect();
    if labels.iter().any(String::is_empty) {
        return Err(bad("empty outcome label in header"));
    }
    let mut outcomes = Vec::new();
    for (n, line) in rest.lines().enumerate() {
        let y = labels
            .iter()
            .position(|l| l == line)
            .ok_or_else(|| Error::UnknownOutcome(format!("{line:?} on data line {}", n + 1)))?;
        outcomes.push(Outcome(y));
    }
    let steps = number("steps")? as usize;
    if steps != outcomes.len() {
        return Err(bad(format!("header declares {steps} steps, body has {}", outcomes.len())));
    }
    Ok(TrajectoryRecord {
        seed: number("seed")?,
        model_id: field("model")?,
        model_hash: field("model_sha256")?,
        dim: number("dim")? as usize,
        labels,
        init: field("init")?,
        initial_state: None,
        outcomes,
        states: None,
    })
}
