//! Block filter over a finite set of candidate models.
//!
//! The estimated block state is `Ξ = diag(π^1 ρ^1, ..., π^r ρ^r)`: each
//! candidate keeps its own conditional state `ρ^p` and a weight `π^p` that is
//! renormalized jointly across blocks after every outcome. Weights are kept
//! as log-likelihoods `ℓ^p = Σ log Tr K^p_y(ρ^p)` and only exponentiated
//! through a max-shifted normalization.
//!
//! A block whose conditional probability for the observed outcome drops
//! below [`PROBABILITY_FLOOR`] is frozen at `ℓ = -inf`; it keeps its index
//! and last state.

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{KrausModel, Outcome, PROBABILITY_FLOOR};
use crate::state::DensityMatrix;

/// Default posterior threshold `ε`.
pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct Candidate {
    pub name: String,
    pub param: Option<Vec<f64>>,
    pub model: KrausModel,
}

impl Candidate {
    pub fn new(name: impl Into<String>, model: KrausModel) -> Self {
        Self { name: name.into(), param: None, model }
    }

    pub fn scalar(p: f64, model: KrausModel) -> Self {
        Self { name: p.to_string(), param: Some(vec![p]), model }
    }
}

/// Candidates with a strictly positive prior.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    candidates: Vec<Candidate>,
    prior: Vec<f64>,
    log_prior: Vec<f64>,
}

impl CandidateSet {
    pub fn new(candidates: Vec<Candidate>, prior: Vec<f64>) -> Result<Self> {
        let first = candidates
            .first()
            .ok_or_else(|| Error::Precondition("candidate set is empty".into()))?;
        let (dim, labels) = (first.model.dim(), first.model.labels().to_vec());
        for c in &candidates {
            if c.model.dim() != dim || c.model.labels() != labels.as_slice() {
                return Err(Error::Precondition(format!(
                    "candidate {} does not share the dimension and alphabet of {}",
                    c.name, first.name
                )));
            }
            c.model.ensure_valid()?;
        }
        if prior.len() != candidates.len() {
            return Err(Error::Precondition(format!(
                "{} prior weights for {} candidates",
                prior.len(),
                candidates.len()
            )));
        }
        if let Some(bad) = prior.iter().find(|&&w| !(w > 0.0)) {
            return Err(Error::Precondition(format!("prior weight {bad} is not strictly positive")));
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("prior sums to {total}, not 1")));
        }
        let log_prior = prior.iter().map(|w| w.ln()).collect();
        Ok(Self { candidates, prior, log_prior })
    }

    pub fn uniform(candidates: Vec<Candidate>) -> Result<Self> {
        let r = candidates.len().max(1);
        Self::new(candidates, vec![1.0 / r as f64; r])
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn names(&self) -> Vec<String> {
        self.candidates.iter().map(|c| c.name.clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.candidates[0].model.dim()
    }

    pub fn labels(&self) -> &[String] {
        self.candidates[0].model.labels()
    }
}

/// Normalizes log-scores with a max shift; `-inf` entries map to 0.
pub fn normalize_log(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![f64::NAN; scores.len()];
    }
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - lse).collect()
}

#[derive(Debug, Clone)]
pub struct HypothesisFilter<'c> {
    cands: &'c CandidateSet,
    log_likelihood: Vec<f64>,
    states: Vec<CMatrix>,
    step: usize,
}

/// Starts every block at `rho0`, which must have full rank.
pub fn init_filter<'c>(cands: &'c CandidateSet, rho0: &DensityMatrix) -> Result<HypothesisFilter<'c>> {
    if rho0.dim() != cands.dim() {
        return Err(Error::Dimension(format!(
            "initial estimate of dimension {} for candidates of dimension {}",
            rho0.dim(),
            cands.dim()
        )));
    }
    let min = rho0.min_eigenvalue();
    if min <= 1e-12 {
        return Err(Error::Precondition(format!(
            "initial estimate must have full rank (smallest eigenvalue {min:.3e})"
        )));
    }
    Ok(HypothesisFilter {
        cands,
        log_likelihood: vec![0.0; cands.len()],
        states: vec![rho0.matrix().clone(); cands.len()],
        step: 0,
    })
}

impl<'c> HypothesisFilter<'c> {
    pub fn candidates(&self) -> &'c CandidateSet {
        self.cands
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    /// Unnormalized log posterior `log π_0^p + ℓ^p`.
    pub fn log_scores(&self) -> Vec<f64> {
        self.cands.log_prior.iter().zip(&self.log_likelihood).map(|(a, b)| a + b).collect()
    }

    pub fn log_posteriors(&self) -> Vec<f64> {
        normalize_log(&self.log_scores())
    }

    pub fn posteriors(&self) -> Vec<f64> {
        self.log_posteriors().into_iter().map(f64::exp).collect()
    }

    pub fn is_frozen(&self, k: usize) -> bool {
        self.log_likelihood[k] == f64::NEG_INFINITY
    }

    /// Conditional state of candidate `k`.
    pub fn state(&self, k: usize) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(self.states[k].clone())
    }

    /// `diag(π^1 ρ^1, ..., π^r ρ^r)` on `ℂ^{rd}`.
    pub fn block_state(&self) -> CMatrix {
        let post = self.posteriors();
        let blocks: Vec<CMatrix> = self.states.iter().zip(post).map(|(s, w)| s.scale(w)).collect();
        linalg::block_diag(&blocks)
    }

    /// Feeds one outcome and returns the new posteriors. On error the filter
    /// is left unchanged.
    pub fn update(&mut self, y: Outcome) -> Result<Vec<f64>> {
        if y.0 >= self.cands.labels().len() {
            return Err(Error::UnknownOutcome(format!("index {}", y.0)));
        }
        let mut ll = self.log_likelihood.clone();
        let mut states = self.states.clone();
        for (k, c) in self.cands.candidates.iter().enumerate() {
            if ll[k] == f64::NEG_INFINITY {
                continue;
            }
            let image = c.model.kraus_map(y, &states[k]);
            let t = linalg::trace_re(&image);
            if t > PROBABILITY_FLOOR {
                states[k] = linalg::hermitize(&image.unscale(t));
                ll[k] += t.ln();
            } else {
                ll[k] = f64::NEG_INFINITY;
            }
        }
        if ll.iter().all(|&l| l == f64::NEG_INFINITY) {
            return Err(Error::AllBlocksFrozen { step: self.step + 1 });
        }
        self.log_likelihood = ll;
        self.states = states;
        self.step += 1;
        Ok(self.posteriors())
    }
}

/// Per-step log scores of a filter run. Row `n` holds `log π_0^p + ℓ_n^p`
/// after `n` outcomes (row 0 is the prior).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTrace {
    pub names: Vec<String>,
    pub scores: Vec<Vec<f64>>,
    pub outcomes: Vec<Outcome>,
}

impl PosteriorTrace {
    /// Number of outcomes consumed.
    pub fn steps(&self) -> usize {
        self.outcomes.len()
    }

    pub fn log_posteriors(&self, n: usize) -> Vec<f64> {
        normalize_log(&self.scores[n])
    }

    pub fn posteriors(&self, n: usize) -> Vec<f64> {
        self.log_posteriors(n).into_iter().map(f64::exp).collect()
    }

    /// `log(π_n^p / π_n^q)`, exact even after underflow.
    pub fn log_ratio(&self, n: usize, p: usize, q: usize) -> f64 {
        self.scores[n][p] - self.scores[n][q]
    }

    /// First step at which some posterior exceeds `1 - epsilon`.
    pub fn first_crossing(&self, epsilon: f64) -> Option<(usize, usize)> {
        let cut = (1.0 - epsilon).ln();
        (1..self.scores.len()).find_map(|n| {
            let lp = self.log_posteriors(n);
            lp.iter().position(|&l| l > cut).map(|k| (n, k))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Index of the selected candidate.
    pub selected: Option<usize>,
    pub crossing_step: Option<usize>,
    pub final_posteriors: Vec<f64>,
    pub trace: PosteriorTrace,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 0.5 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("threshold {epsilon} must lie in (0, 1/2)")))
    }
}

fn drive(
    cands: &CandidateSet,
    rho0: &DensityMatrix,
    outcomes: &[Outcome],
    max_steps: Option<usize>,
    stop_below: Option<f64>,
) -> Result<(PosteriorTrace, Option<(usize, usize)>)> {
    let mut filter = init_filter(cands, rho0)?;
    let limit = max_steps.map_or(outcomes.len(), |m| m.min(outcomes.len()));
    let mut trace = PosteriorTrace { names: cands.names(), scores: vec![filter.log_scores()], outcomes: Vec::new() };
    let cut = stop_below.map(|eps| (1.0 - eps).ln());
    for &y in &outcomes[..limit] {
        filter.update(y)?;
        trace.outcomes.push(y);
        trace.scores.push(filter.log_scores());
        if let Some(cut) = cut {
            if let Some(k) = filter.log_posteriors().iter().position(|&l| l > cut) {
                return Ok((trace, Some((filter.step_index(), k))));
            }
        }
    }
    Ok((trace, None))
}

/// Feeds outcomes until some posterior exceeds `1 - epsilon` or the record
/// (or `max_steps`) runs out.
pub fn run_discrimination(
    cands: &CandidateSet,
    rho0: &DensityMatrix,
    outcomes: &[Outcome],
    epsilon: f64,
    max_steps: Option<usize>,
) -> Result<SelectionResult> {
    check_epsilon(epsilon)?;
    let (trace, hit) = drive(cands, rho0, outcomes, max_steps, Some(epsilon))?;
    let final_posteriors = trace.posteriors(trace.steps());
    Ok(SelectionResult {
        selected: hit.map(|h| h.1),
        crossing_step: hit.map(|h| h.0),
        final_posteriors,
        trace,
    })
}

/// Runs the filter over the whole record (up to `max_steps`) without
/// stopping at a threshold.
pub fn trace_record(
    cands: &CandidateSet,
    rho0: &DensityMatrix,
    outcomes: &[Outcome],
    max_steps: Option<usize>,
) -> Result<PosteriorTrace> {
    drive(cands, rho0, outcomes, max_steps, None).map(|(t, _)| t)
}

/// Least-squares slope of `n -> log(π_n^p / π_n^{p*})`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    /// Nats per step.
    pub slope: f64,
    pub standard_error: f64,
    /// Inclusive range of trace rows used.
    pub window: (usize, usize),
    /// A block was frozen inside the window; the slope is infinite.
    pub frozen: bool,
}

const LYAPUNOV_BATCHES: usize = 20;

/// Fits the last half of the trace. The standard error treats the log
/// ratio as a random walk with weakly dependent increments: their long-run
/// variance `s²` comes from batch means, and the slope of a least-squares
/// line through a random walk over `W` steps has variance `6 s² / (5 W)`.
pub fn lyapunov_estimate(trace: &PosteriorTrace, p: usize, p_star: usize) -> Result<LyapunovEstimate> {
    let steps = trace.steps();
    if steps < 100 {
        return Err(Error::Precondition(format!("trace has {steps} steps, at least 100 required")));
    }
    let r = trace.names.len();
    if p >= r || p_star >= r {
        return Err(Error::Precondition(format!("candidate index out of range ({r} candidates)")));
    }
    let window = (steps / 2, steps);
    let rows = &trace.scores[window.0..=window.1];
    let p_frozen = rows.iter().any(|s| s[p] == f64::NEG_INFINITY);
    let star_frozen = rows.iter().any(|s| s[p_star] == f64::NEG_INFINITY);
    if p_frozen || star_frozen {
        let slope = if p_frozen { f64::NEG_INFINITY } else { f64::INFINITY };
        return Ok(LyapunovEstimate { slope, standard_error: f64::NAN, window, frozen: true });
    }
    let ys: Vec<f64> = rows.iter().map(|s| s[p] - s[p_star]).collect();
    let xs: Vec<f64> = (window.0..=window.1).map(|n| n as f64).collect();
    let k = ys.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;

    let incs: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
    let w = incs.len();
    let batches = LYAPUNOV_BATCHES.min(w / 2).max(2);
    let blen = w / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| incs[b * blen..(b + 1) * blen].iter().sum::<f64>() / blen as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var_means = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    let long_run = var_means * blen as f64;
    let standard_error = (1.2 * long_run / w as f64).sqrt();
    Ok(LyapunovEstimate { slope, standard_error, window, frozen: false })
}
