use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{KrausModel, PROBABILITY_FLOOR};
use crate::parallel::{try_map_indices, Execution};
use crate::rng;
use crate::state::DensityMatrix;
use crate::trajectory::sample_step;

/// Exact enumeration is used when `|Y|^n` does not exceed this.
pub const EXHAUSTIVE_WORD_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyMode {
    Exhaustive,
    MonteCarlo,
}

/// Estimate of `(1/n) D(P|_n || Q|_n)` in nats per step.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRateEstimate {
    pub word_length: usize,
    /// Words enumerated (exhaustive) or sampled (Monte Carlo).
    pub sample_count: usize,
    pub estimate: f64,
    pub standard_error: f64,
    pub mode: EntropyMode,
    /// Some word with positive `P` probability has zero `Q` probability.
    pub infinite: bool,
}

fn check_inputs(p_model: &KrausModel, p_state: &DensityMatrix, q_model: &KrausModel, q_state: &DensityMatrix, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Precondition("word length must be at least 1".into()));
    }
    if p_model.labels() != q_model.labels() {
        return Err(Error::Precondition("models must share the outcome alphabet".into()));
    }
    p_model.ensure_valid()?;
    q_model.ensure_valid()?;
    for (m, s) in [(p_model, p_state), (q_model, q_state)] {
        if m.dim() != s.dim() {
            return Err(Error::Dimension(format!("state of dimension {} for model of dimension {}", s.dim(), m.dim())));
        }
    }
    Ok(())
}

struct Walk<'a> {
    p: &'a KrausModel,
    q: &'a KrausModel,
    n: usize,
    sum: f64,
    infinite: bool,
}

impl Walk<'_> {
    /// `rp`, `rq` are normalized; `log_p`, `log_q` the prefix log-likelihoods.
    fn visit(&mut self, rp: &CMatrix, rq: &CMatrix, depth: usize, log_p: f64, log_q: f64) {
        if depth == self.n {
            self.sum += log_p.exp() * (log_p - log_q);
            return;
        }
        for y in self.p.outcomes() {
            let ip = self.p.kraus_map(y, rp);
            let tp = linalg::trace_re(&ip);
            if tp < PROBABILITY_FLOOR {
                continue;
            }
            let iq = self.q.kraus_map(y, rq);
            let tq = linalg::trace_re(&iq);
            if tq < PROBABILITY_FLOOR {
                self.infinite = true;
                continue;
            }
            self.visit(&ip.unscale(tp), &iq.unscale(tq), depth + 1, log_p + tp.ln(), log_q + tq.ln());
        }
    }
}

/// Exact `(1/n) Σ_w P(w) log(P(w)/Q(w))` over all `|Y|^n` words.
pub fn entropy_rate_exhaustive(
    p_model: &KrausModel,
    p_state: &DensityMatrix,
    q_model: &KrausModel,
    q_state: &DensityMatrix,
    n: usize,
) -> Result<EntropyRateEstimate> {
    check_inputs(p_model, p_state, q_model, q_state, n)?;
    let words = (p_model.num_outcomes() as f64).powi(n as i32);
    if words > EXHAUSTIVE_WORD_LIMIT as f64 {
        return Err(Error::Budget { words, limit: EXHAUSTIVE_WORD_LIMIT as f64 });
    }
    let mut walk = Walk { p: p_model, q: q_model, n, sum: 0.0, infinite: false };
    walk.visit(p_state.matrix(), q_state.matrix(), 0, 0.0, 0.0);
    let estimate = if walk.infinite { f64::INFINITY } else { walk.sum / n as f64 };
    Ok(EntropyRateEstimate {
        word_length: n,
        sample_count: words as usize,
        estimate,
        standard_error: 0.0,
        mode: EntropyMode::Exhaustive,
        infinite: walk.infinite,
    })
}

/// Monte Carlo estimate from `samples` words drawn from `P`. Sample `i`
/// uses random stream `i` of `seed`, so the result does not depend on
/// `exec`.
pub fn entropy_rate_monte_carlo(
    p_model: &KrausModel,
    p_state: &DensityMatrix,
    q_model: &KrausModel,
    q_state: &DensityMatrix,
    n: usize,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<EntropyRateEstimate> {
    check_inputs(p_model, p_state, q_model, q_state, n)?;
    if samples == 0 {
        return Err(Error::Precondition("sample count must be at least 1".into()));
    }
    let values = try_map_indices(samples, exec, |i| -> Result<f64> {
        let mut r = rng::stream(seed, i as u64);
        let mut rp = p_state.clone();
        let mut rq = q_state.matrix().clone();
        let mut ratio = 0.0;
        for _ in 0..n {
            let (y, next, tp) = sample_step(p_model, &rp, &mut r)?;
            let iq = q_model.kraus_map(y, &rq);
            let tq = linalg::trace_re(&iq);
            if tq < PROBABILITY_FLOOR {
                return Ok(f64::INFINITY);
            }
            ratio += tp.ln() - tq.ln();
            rp = next;
            rq = iq.unscale(tq);
        }
        Ok(ratio / n as f64)
    })?;
    let infinite = values.iter().any(|v| v.is_infinite());
    let m = values.len() as f64;
    let (estimate, standard_error) = if infinite {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let mean = values.iter().sum::<f64>() / m;
        let se = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            (var / m).sqrt()
        } else {
            0.0
        };
        (mean, se)
    };
    Ok(EntropyRateEstimate { word_length: n, sample_count: samples, estimate, standard_error, mode: EntropyMode::MonteCarlo, infinite })
}

/// Exact when `|Y|^n <= EXHAUSTIVE_WORD_LIMIT` (then `samples` is ignored),
/// Monte Carlo otherwise.
pub fn entropy_rate(
    p_model: &KrausModel,
    p_state: &DensityMatrix,
    q_model: &KrausModel,
    q_state: &DensityMatrix,
    n: usize,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<EntropyRateEstimate> {
    check_inputs(p_model, p_state, q_model, q_state, n)?;
    let words = (p_model.num_outcomes() as f64).powi(n as i32);
    if words <= EXHAUSTIVE_WORD_LIMIT as f64 {
        entropy_rate_exhaustive(p_model, p_state, q_model, q_state, n)
    } else {
        entropy_rate_monte_carlo(p_model, p_state, q_model, q_state, n, samples, seed, exec)
    }
}
