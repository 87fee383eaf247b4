//! Interval refinement for a scalar parameter: repeated two-candidate
//! discrimination over the same record, moving to a pair two thirds as wide
//! around whichever candidate won.

use serde::Serialize;

use crate::channel::decompose;
use crate::discrimination::{run_discrimination, Candidate, CandidateSet, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::model::Outcome;
use crate::registry::RegistryEntry;
use crate::state::DensityMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub interval: (f64, f64),
    pub epsilon: f64,
    /// Stop once the tested pair is narrower than this.
    pub delta: f64,
    pub max_rounds: usize,
    /// Use at most this many outcomes of the record.
    pub max_steps: Option<usize>,
}

impl RefineConfig {
    pub const DEFAULT_MAX_ROUNDS: usize = 64;

    pub fn new(u: f64, v: f64) -> Self {
        Self {
            interval: (u, v),
            epsilon: DEFAULT_EPSILON,
            delta: (v - u) * 1e-3,
            max_rounds: Self::DEFAULT_MAX_ROUNDS,
            max_steps: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (u, v) = self.interval;
        if !(u < v) || !u.is_finite() || !v.is_finite() {
            return Err(Error::Precondition(format!("interval [{u}, {v}] is empty")));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::Precondition(format!("threshold {} must lie in (0, 1/2)", self.epsilon)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Precondition(format!("resolution {} must be positive", self.delta)));
        }
        Ok(())
    }
}

pub fn initial_pair(u: f64, v: f64) -> (f64, f64) {
    (u + (v - u) / 3.0, u + 2.0 * (v - u) / 3.0)
}

pub fn next_pair(a: f64, b: f64, s: f64) -> (f64, f64) {
    let w = (b - a) / 3.0;
    (s - w, s + w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Empty record.
    NoData,
    /// A round ran out of data without a crossing.
    NoCrossing,
    /// The pair became narrower than the resolution floor.
    Resolution,
    MaxRounds,
    /// Clipping collapsed the pair to a single point.
    DegeneratePair,
    /// A tested parameter gave a channel without a full-rank invariant state.
    NotFaithful,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineRound {
    pub a: f64,
    pub b: f64,
    /// Pair before clipping to the interval.
    pub proposed: (f64, f64),
    pub selected: Option<f64>,
    pub steps_used: usize,
    pub pi_a: f64,
    pub pi_b: f64,
    /// No crossing and the final posteriors are within `epsilon`.
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementTrace {
    pub rounds: Vec<RefineRound>,
    pub estimate: f64,
    pub termination: Termination,
    pub warnings: Vec<String>,
}

fn candidate(entry: &RegistryEntry, p: f64, warnings: &mut Vec<String>) -> Result<Candidate> {
    let model = entry.build_scalar(p)?;
    let dec = decompose(&model)?;
    if !dec.faithful {
        return Err(Error::NotFaithful(format!("{}[{p}]", entry.name)));
    }
    if dec.count() > 1 {
        warnings.push(format!("{}[{p}] has {} minimal subspaces", entry.name, dec.count()));
    }
    Ok(Candidate::scalar(p, model))
}

/// Runs the refinement on `outcomes` with candidates drawn from `entry`.
/// Every round starts a fresh filter at the maximally mixed state with a
/// uniform prior and replays the record from its first outcome.
pub fn refine(outcomes: &[Outcome], entry: &RegistryEntry, config: &RefineConfig) -> Result<RefinementTrace> {
    config.validate()?;
    if entry.param_dim() != 1 {
        return Err(Error::Precondition(format!("{} is not a scalar family", entry.name)));
    }
    let (u, v) = config.interval;
    let (lo, hi) = entry.domain[0];
    if u < lo || v > hi {
        return Err(Error::Precondition(format!("interval [{u}, {v}] leaves the domain [{lo}, {hi}] of {}", entry.name)));
    }
    let data = &outcomes[..config.max_steps.map_or(outcomes.len(), |m| m.min(outcomes.len()))];
    let mut trace = RefinementTrace { rounds: Vec::new(), estimate: (u + v) / 2.0, termination: Termination::NoData, warnings: Vec::new() };
    if data.is_empty() {
        return Ok(trace);
    }

    let mut proposed = initial_pair(u, v);
    loop {
        if trace.rounds.len() >= config.max_rounds {
            trace.termination = Termination::MaxRounds;
            break;
        }
        let (a, b) = (proposed.0.clamp(u, v), proposed.1.clamp(u, v));
        if a >= b {
            trace.estimate = a;
            trace.termination = Termination::DegeneratePair;
            break;
        }
        if b - a < config.delta {
            trace.termination = Termination::Resolution;
            break;
        }
        let built = candidate(entry, a, &mut trace.warnings).and_then(|ca| Ok((ca, candidate(entry, b, &mut trace.warnings)?)));
        let pair = match built {
            Ok(p) => p,
            Err(Error::NotFaithful(what)) => {
                trace.warnings.push(format!("round {} aborted: {what} is not faithful", trace.rounds.len() + 1));
                trace.termination = Termination::NotFaithful;
                break;
            }
            Err(e) => return Err(e),
        };
        let cands = CandidateSet::uniform(vec![pair.0, pair.1])?;
        let res = run_discrimination(&cands, &DensityMatrix::maximally_mixed(cands.dim()), data, config.epsilon, None)?;
        let (pi_a, pi_b) = (res.final_posteriors[0], res.final_posteriors[1]);
        let selected = res.selected.map(|k| [a, b][k]);
        trace.rounds.push(RefineRound {
            a,
            b,
            proposed,
            selected,
            steps_used: res.trace.steps(),
            pi_a,
            pi_b,
            ambiguous: selected.is_none() && (pi_a - pi_b).abs() < config.epsilon,
        });
        match selected {
            Some(s) => {
                trace.estimate = s;
                proposed = next_pair(proposed.0, proposed.1, s);
            }
            None => {
                trace.termination = Termination::NoCrossing;
                break;
            }
        }
    }
    Ok(trace)
}
