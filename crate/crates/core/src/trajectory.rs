//! Sampled quantum trajectories and the known-model estimation filter.
//!
//! [`TrajectorySimulator`] draws `y_n` with probability `Tr K_y(rho_n)` and
//! moves to `K_y(rho_n) / Tr K_y(rho_n)`. [`EstimationFilter`] applies the
//! same update to an arbitrary starting guess using outcomes supplied from
//! outside; for the denominators to stay positive the guess must satisfy
//! `ker(rho_hat_0) ⊂ ker(rho_0)`, which the completely mixed default does.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{KrausModel, Outcome, PROBABILITY_FLOOR};
use crate::parallel::{try_map_indices, Execution};
use crate::rng::{self, StreamRng};
use crate::state::DensityMatrix;

/// Inverse-CDF draw over outcomes in alphabet order. `u` is uniform in
/// `[0, 1)`; mass lost to round-off goes to the last outcome with positive
/// probability.
pub(crate) fn draw_outcome(probs: &[f64], u: f64) -> Option<usize> {
    let mut acc = 0.0;
    let mut last = None;
    for (k, &p) in probs.iter().enumerate() {
        if p < PROBABILITY_FLOOR {
            continue;
        }
        acc += p;
        last = Some(k);
        if u < acc {
            return last;
        }
    }
    last
}

/// One step of the normalized Kraus recursion with a sampled outcome.
pub(crate) fn sample_step<R: Rng + ?Sized>(model: &KrausModel, state: &DensityMatrix, rng: &mut R) -> Result<(Outcome, DensityMatrix, f64)> {
    let images: Vec<_> = model.outcomes().map(|y| model.kraus_map(y, state.matrix())).collect();
    let probs: Vec<f64> = images.iter().map(linalg::trace_re).collect();
    let u: f64 = rng.random();
    let Some(k) = draw_outcome(&probs, u) else {
        let max_probability = probs.iter().copied().fold(0.0, f64::max);
        return Err(Error::DegenerateOutcomes { max_probability });
    };
    let next = DensityMatrix::normalized_unchecked(&images[k], probs[k]);
    Ok((Outcome(k), next, probs[k]))
}

/// The sampled chain `rho_{n+1} = K_{y_n}(rho_n) / Tr K_{y_n}(rho_n)`.
#[derive(Debug, Clone)]
pub struct TrajectorySimulator<'m> {
    model: &'m KrausModel,
    state: DensityMatrix,
    step: usize,
    rng: StreamRng,
}

impl<'m> TrajectorySimulator<'m> {
    pub fn new(model: &'m KrausModel, initial: DensityMatrix, seed: u64) -> Result<Self> {
        Self::with_rng(model, initial, rng::seeded(seed))
    }

    pub fn with_rng(model: &'m KrausModel, initial: DensityMatrix, rng: StreamRng) -> Result<Self> {
        model.ensure_valid()?;
        if initial.dim() != model.dim() {
            return Err(Error::Dimension(format!(
                "initial state of dimension {} for a model of dimension {}",
                initial.dim(),
                model.dim()
            )));
        }
        Ok(Self { model, state: initial, step: 0, rng })
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn step(&mut self) -> Result<(Outcome, &DensityMatrix)> {
        let (y, next, _) = sample_step(self.model, &self.state, &mut self.rng)?;
        self.state = next;
        self.step += 1;
        Ok((y, &self.state))
    }
}

/// Known-model filter driven by external outcomes.
#[derive(Debug, Clone)]
pub struct EstimationFilter<'m> {
    model: &'m KrausModel,
    estimate: DensityMatrix,
    step: usize,
}

impl<'m> EstimationFilter<'m> {
    pub fn new(model: &'m KrausModel, initial: DensityMatrix) -> Result<Self> {
        if initial.dim() != model.dim() {
            return Err(Error::Dimension(format!(
                "initial estimate of dimension {} for a model of dimension {}",
                initial.dim(),
                model.dim()
            )));
        }
        Ok(Self { model, estimate: initial, step: 0 })
    }

    /// Starts from the completely mixed state.
    pub fn mixed(model: &'m KrausModel) -> Self {
        Self { model, estimate: DensityMatrix::maximally_mixed(model.dim()), step: 0 }
    }

    pub fn estimate(&self) -> &DensityMatrix {
        &self.estimate
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn filter_step(&mut self, y: Outcome) -> Result<&DensityMatrix> {
        let image = self.model.apply_kraus(y, &self.estimate)?;
        let t = linalg::trace_re(&image);
        if t < PROBABILITY_FLOOR {
            return Err(Error::FilterDivergence { outcome: self.model.label(y).to_string(), probability: t });
        }
        self.estimate = DensityMatrix::normalized_unchecked(&image, t);
        self.step += 1;
        Ok(&self.estimate)
    }
}

/// A measurement record and, optionally, the states that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    /// Human-readable model identity (registry name and parameter, or "explicit").
    pub model_id: String,
    pub model_hash: String,
    pub dim: usize,
    pub labels: Vec<String>,
    /// Initial state description, e.g. "mixed" or "invariant".
    pub init: String,
    pub initial_state: Option<DensityMatrix>,
    pub outcomes: Vec<Outcome>,
    /// `states[n]` is `rho_{n+1}`, the state after the n-th outcome.
    pub states: Option<Vec<DensityMatrix>>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcome_labels(&self) -> impl Iterator<Item = &str> {
        self.outcomes.iter().map(|y| self.labels[y.0].as_str())
    }
}

/// Simulates `n_steps` outcomes from `initial`. Deterministic in all inputs.
pub fn run(
    model: &KrausModel,
    initial: &DensityMatrix,
    n_steps: usize,
    seed: u64,
    record_states: bool,
) -> Result<TrajectoryRecord> {
    run_with_rng(model, initial, n_steps, seed, rng::seeded(seed), record_states)
}

fn run_with_rng(
    model: &KrausModel,
    initial: &DensityMatrix,
    n_steps: usize,
    seed: u64,
    rng: StreamRng,
    record_states: bool,
) -> Result<TrajectoryRecord> {
    let mut sim = TrajectorySimulator::with_rng(model, initial.clone(), rng)?;
    let mut outcomes = Vec::with_capacity(n_steps);
    let mut states = record_states.then(|| Vec::with_capacity(n_steps));
    for _ in 0..n_steps {
        let (y, rho) = sim.step()?;
        outcomes.push(y);
        if let Some(s) = states.as_mut() {
            s.push(rho.clone());
        }
    }
    Ok(TrajectoryRecord {
        seed,
        model_id: model.source().to_string(),
        model_hash: model.content_hash(),
        dim: model.dim(),
        labels: model.labels().to_vec(),
        init: String::from("explicit"),
        initial_state: Some(initial.clone()),
        outcomes,
        states,
    })
}

/// Independent runs for each seed, possibly in parallel. Output order
/// follows `seeds`.
pub fn run_batch(
    model: &KrausModel,
    initial: &DensityMatrix,
    n_steps: usize,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<TrajectoryRecord>> {
    try_map_indices(seeds.len(), exec, |i| run(model, initial, n_steps, seeds[i], false))
}
