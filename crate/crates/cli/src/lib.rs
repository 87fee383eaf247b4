//! Command-line front end: argument parsing, model loading and dispatch to
//! the library routines. Every subcommand prints a JSON summary on stdout
//! and writes its declared files atomically.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use qtraj::channel::{check_identifiability, decompose, entropy_rate, EntropyMode};
use qtraj::discrimination::{lyapunov_estimate, trace_record, Candidate, CandidateSet, DEFAULT_EPSILON};
use qtraj::modelfile::{matrix_to_json, model_from_json, outcomes_from_labels, state_from_json};
use qtraj::record::{parse_record, write_record};
use qtraj::refine::{refine, RefineConfig};
use qtraj::registry::{self, EXAMPLE_FAMILY};
use qtraj::trajectory::{self, TrajectoryRecord};
use qtraj::{DensityMatrix, ErrorKind, Execution, KrausModel, Outcome};

pub mod output;

use output::{num, per_seed_path, read_text, write_atomic};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] qtraj::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.kind() == ErrorKind::Numerical => 3,
            CliError::Core(_) | CliError::Usage(_) => 2,
            CliError::Io { .. } => 4,
        }
    }

    pub fn to_json(&self) -> Value {
        let kind = match self.exit_code() {
            3 => "numerical",
            4 => "io",
            _ => "validation",
        };
        json!({ "error": kind, "message": self.to_string(), "exit_code": self.exit_code() })
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "qtraj", version, about = "Quantum trajectory simulation and parameter estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for parallel sections (0 uses every core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Keep all work on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    /// Also write the JSON summary to this file.
    #[arg(long, global = true)]
    pub json_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// JSON model document.
    #[arg(long, conflicts_with_all = ["registry", "param"])]
    pub model: Option<PathBuf>,
    /// Named model family.
    #[arg(long, default_value = EXAMPLE_FAMILY)]
    pub registry: String,
    /// Parameter vector for the family, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1.8], allow_negative_numbers = true)]
    pub param: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct ModelPairArgs {
    /// Two JSON model documents, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "params")]
    pub models: Vec<PathBuf>,
    #[arg(long, default_value = EXAMPLE_FAMILY)]
    pub registry: String,
    /// Two scalar parameters of the family, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub params: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a measurement record.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// `mixed`, `invariant`, or a JSON state file.
        #[arg(long, default_value = "mixed")]
        init: String,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "trajectory.rec")]
        out: PathBuf,
        /// CSV of the conditional states, one row per step.
        #[arg(long)]
        states_out: Option<PathBuf>,
        /// Run seeds `seed..seed+k`, one record file per seed.
        #[arg(long)]
        repeat: Option<usize>,
    },
    /// Select among candidate models with the block filter.
    Discriminate {
        #[arg(long)]
        record: PathBuf,
        #[arg(long, default_value = EXAMPLE_FAMILY)]
        registry: String,
        /// Candidate parameters of the registry family, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "candidate_models")]
        candidates: Vec<f64>,
        /// Candidate JSON model documents, comma separated.
        #[arg(long, value_delimiter = ',')]
        candidate_models: Vec<PathBuf>,
        /// `uniform` or comma-separated weights.
        #[arg(long, default_value = "uniform")]
        prior: String,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long)]
        max_steps: Option<usize>,
        /// Filter start: `mixed` or a JSON state file.
        #[arg(long, default_value = "mixed")]
        init_estimate: String,
        /// CSV of log10 posteriors per step.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Interval refinement of a scalar parameter.
    Refine {
        #[arg(long)]
        record: PathBuf,
        #[arg(long, default_value = EXAMPLE_FAMILY)]
        registry: String,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 3.0], allow_negative_numbers = true)]
        interval: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        /// Resolution floor (default: interval width / 1000).
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = RefineConfig::DEFAULT_MAX_ROUNDS)]
        max_rounds: usize,
        #[arg(long)]
        max_steps: Option<usize>,
        /// CSV with one row per round.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validity, fixed points and minimal subspaces of a model.
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Exhaustive word-distribution separation between two models.
    Identifiability {
        #[command(flatten)]
        models: ModelPairArgs,
        #[arg(long, default_value_t = 5)]
        max_len: usize,
    },
    /// Relative entropy rate of the first model's outcome process to the
    /// second's, both started from their invariant states.
    EntropyRate {
        #[command(flatten)]
        models: ModelPairArgs,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

pub fn load_model(args: &ModelArgs) -> Result<KrausModel, CliError> {
    match &args.model {
        Some(path) => Ok(model_from_json(&read_text(path)?)?),
        None => Ok(registry::lookup(&args.registry)?.build(&args.param)?),
    }
}

fn load_pair(args: &ModelPairArgs) -> Result<(KrausModel, KrausModel), CliError> {
    if !args.models.is_empty() {
        let [a, b] = args.models.as_slice() else {
            return usage("--models takes exactly two files");
        };
        return Ok((model_from_json(&read_text(a)?)?, model_from_json(&read_text(b)?)?));
    }
    let [p, q] = args.params.as_slice() else {
        return usage("give --params p,q or --models a.json,b.json");
    };
    let entry = registry::lookup(&args.registry)?;
    Ok((entry.build_scalar(*p)?, entry.build_scalar(*q)?))
}

fn invariant_state(model: &KrausModel) -> Result<DensityMatrix, CliError> {
    Ok(decompose(model)?.mixture_state())
}

fn initial_state(model: &KrausModel, init: &str) -> Result<DensityMatrix, CliError> {
    match init {
        "mixed" => Ok(DensityMatrix::maximally_mixed(model.dim())),
        "invariant" => invariant_state(model),
        path => {
            let rho = state_from_json(&read_text(Path::new(path))?)?;
            if rho.dim() != model.dim() {
                return usage(format!("state in {path} has dimension {}, model has {}", rho.dim(), model.dim()));
            }
            Ok(rho)
        }
    }
}

fn record_outcomes(rec: &TrajectoryRecord, model: &KrausModel) -> Result<Vec<Outcome>, CliError> {
    let labels: Vec<String> = rec.outcome_labels().map(str::to_string).collect();
    Ok(outcomes_from_labels(model, &labels)?)
}

fn load_record(path: &Path) -> Result<TrajectoryRecord, CliError> {
    Ok(parse_record(&read_text(path)?)?)
}

fn execution(cli: &Cli) -> Execution {
    if cli.sequential || cli.jobs == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

#[cfg(feature = "parallel")]
fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_pool<T: Send>(_jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    Ok(f())
}

/// Runs one subcommand and returns its JSON summary.
pub fn dispatch(cli: &Cli) -> Result<Value, CliError> {
    let exec = execution(cli);
    let summary = with_pool(cli.jobs, || run_command(&cli.command, exec))??;
    if let Some(path) = &cli.json_out {
        write_atomic(path, &(serde_json::to_string_pretty(&summary).expect("json") + "\n"))?;
    }
    Ok(summary)
}

fn run_command(command: &Command, exec: Execution) -> Result<Value, CliError> {
    match command {
        Command::Simulate { model, init, steps, seed, out, states_out, repeat } => {
            simulate(model, init, *steps, *seed, out, states_out.as_deref(), *repeat, exec)
        }
        Command::Discriminate {
            record,
            registry,
            candidates,
            candidate_models,
            prior,
            epsilon,
            max_steps,
            init_estimate,
            out,
        } => discriminate(
            record,
            registry,
            candidates,
            candidate_models,
            prior,
            *epsilon,
            *max_steps,
            init_estimate,
            out.as_deref(),
        ),
        Command::Refine { record, registry, interval, epsilon, delta, max_rounds, max_steps, out } => {
            run_refine(record, registry, interval, *epsilon, *delta, *max_rounds, *max_steps, out.as_deref())
        }
        Command::Analyze { model } => analyze(model),
        Command::Identifiability { models, max_len } => identifiability(models, *max_len, exec),
        Command::EntropyRate { models, n, samples, seed } => run_entropy(models, *n, *samples, *seed, exec),
    }
}

fn counts(rec: &TrajectoryRecord) -> Value {
    let mut c = vec![0usize; rec.labels.len()];
    for y in &rec.outcomes {
        c[y.0] += 1;
    }
    let map: serde_json::Map<String, Value> = rec.labels.iter().cloned().zip(c.into_iter().map(Value::from)).collect();
    Value::Object(map)
}

fn states_csv(rec: &TrajectoryRecord) -> String {
    let d = rec.dim;
    let mut header = vec!["step".to_string(), "outcome".to_string()];
    for i in 0..d {
        for j in 0..d {
            header.push(format!("re_{i}_{j}"));
            header.push(format!("im_{i}_{j}"));
        }
    }
    let mut out = header.join(",") + "\n";
    let initial = rec.initial_state.iter();
    let later = rec.states.iter().flatten();
    for (n, rho) in initial.chain(later).enumerate() {
        let label = if n == 0 { "" } else { rec.labels[rec.outcomes[n - 1].0].as_str() };
        let mut row = vec![n.to_string(), label.to_string()];
        let m = rho.matrix();
        for i in 0..d {
            for j in 0..d {
                row.push(num(m[(i, j)].re));
                row.push(num(m[(i, j)].im));
            }
        }
        out += &(row.join(",") + "\n");
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    model_args: &ModelArgs,
    init: &str,
    steps: usize,
    seed: u64,
    out: &Path,
    states_out: Option<&Path>,
    repeat: Option<usize>,
    exec: Execution,
) -> Result<Value, CliError> {
    let model = load_model(model_args)?;
    let rho0 = initial_state(&model, init)?;
    let describe = |rec: &TrajectoryRecord, path: &Path| {
        json!({ "seed": rec.seed, "steps": rec.len(), "record": path.display().to_string(), "outcome_counts": counts(rec) })
    };
    let mut summary = json!({
        "command": "simulate",
        "model": model.source().to_string(),
        "model_sha256": model.content_hash(),
        "init": init,
    });
    match repeat {
        Some(k) => {
            if states_out.is_some() {
                return usage("--states-out is not available with --repeat");
            }
            let seeds: Vec<u64> = (0..k as u64).map(|i| seed.wrapping_add(i)).collect();
            let records = trajectory::run_batch(&model, &rho0, steps, &seeds, exec)?;
            let mut runs = Vec::new();
            for mut rec in records {
                rec.init = init.to_string();
                let path = write_atomic(&per_seed_path(out, rec.seed), &write_record(&rec))?;
                runs.push(describe(&rec, &path));
            }
            summary["runs"] = Value::Array(runs);
        }
        None => {
            let mut rec = trajectory::run(&model, &rho0, steps, seed, states_out.is_some())?;
            rec.init = init.to_string();
            let path = write_atomic(out, &write_record(&rec))?;
            let mut run = describe(&rec, &path);
            if let Some(sp) = states_out {
                let written = write_atomic(sp, &states_csv(&rec))?;
                run["states"] = Value::from(written.display().to_string());
            }
            summary["runs"] = json!([run]);
        }
    }
    Ok(summary)
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}

#[allow(clippy::too_many_arguments)]
fn discriminate(
    record: &Path,
    registry_name: &str,
    params: &[f64],
    model_files: &[PathBuf],
    prior: &str,
    epsilon: f64,
    max_steps: Option<usize>,
    init_estimate: &str,
    out: Option<&Path>,
) -> Result<Value, CliError> {
    let rec = load_record(record)?;
    let candidates: Vec<Candidate> = if !model_files.is_empty() {
        model_files
            .iter()
            .map(|p| Ok(Candidate::new(file_stem(p), model_from_json(&read_text(p)?)?)))
            .collect::<Result<_, CliError>>()?
    } else if !params.is_empty() {
        let entry = registry::lookup(registry_name)?;
        params.iter().map(|&p| Ok(Candidate::scalar(p, entry.build_scalar(p)?))).collect::<Result<_, CliError>>()?
    } else {
        return usage("give --candidates or --candidate-models");
    };
    let set = if prior == "uniform" {
        CandidateSet::uniform(candidates)?
    } else {
        let weights = prior
            .split(',')
            .map(|w| w.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("--prior {w:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        CandidateSet::new(candidates, weights)?
    };
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return usage(format!("--epsilon {epsilon} must lie in (0, 1/2)"));
    }
    let first = &set.candidates()[0].model;
    let outcomes = record_outcomes(&rec, first)?;
    let rho0 = initial_state(first, init_estimate)?;
    let trace = trace_record(&set, &rho0, &outcomes, max_steps)?;
    let names = set.names();
    let crossing = trace.first_crossing(epsilon);
    let stop = crossing.map_or(trace.steps(), |c| c.0);
    let end = trace.posteriors(trace.steps());
    let reference = crossing.map(|c| c.1).unwrap_or_else(|| {
        end.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(k, _)| k)
    });
    let lyapunov: Vec<Value> = if trace.steps() >= 100 {
        (0..set.len())
            .filter(|&k| k != reference)
            .map(|k| {
                let l = lyapunov_estimate(&trace, k, reference)?;
                Ok(json!({
                    "candidate": names[k],
                    "reference": names[reference],
                    "slope": l.slope,
                    "standard_error": l.standard_error,
                    "window": [l.window.0, l.window.1],
                    "frozen": l.frozen,
                }))
            })
            .collect::<Result<_, CliError>>()?
    } else {
        Vec::new()
    };
    let mut summary = json!({
        "command": "discriminate",
        "record": record.display().to_string(),
        "candidates": names,
        "prior": set.prior(),
        "epsilon": epsilon,
        "steps_available": trace.steps(),
        "selected": crossing.map(|c| names[c.1].clone()),
        "crossing_step": crossing.map(|c| c.0),
        "posteriors_at_stop": trace.posteriors(stop),
        "posteriors_at_end": end,
        "lyapunov": lyapunov,
    });
    if let Some(path) = out {
        let mut csv = String::from("step,outcome");
        for n in &names {
            csv += &format!(",log10_pi_{n}");
        }
        csv.push('\n');
        for n in 0..=trace.steps() {
            let label = if n == 0 { "" } else { first.label(trace.outcomes[n - 1]) };
            csv += &format!("{n},{label}");
            for lp in trace.log_posteriors(n) {
                csv += &format!(",{}", num(lp / std::f64::consts::LN_10));
            }
            csv.push('\n');
        }
        summary["trace"] = Value::from(write_atomic(path, &csv)?.display().to_string());
    }
    Ok(summary)
}

#[allow(clippy::too_many_arguments)]
fn run_refine(
    record: &Path,
    registry_name: &str,
    interval: &[f64],
    epsilon: f64,
    delta: Option<f64>,
    max_rounds: usize,
    max_steps: Option<usize>,
    out: Option<&Path>,
) -> Result<Value, CliError> {
    let [u, v] = *interval else {
        return usage("--interval takes two numbers u,v");
    };
    let entry = registry::lookup(registry_name)?;
    let rec = load_record(record)?;
    let probe = entry.build(&vec![entry.domain[0].0; entry.param_dim()])?;
    let outcomes = record_outcomes(&rec, &probe)?;
    let mut config = RefineConfig::new(u, v);
    config.epsilon = epsilon;
    if let Some(d) = delta {
        config.delta = d;
    }
    config.max_rounds = max_rounds;
    config.max_steps = max_steps;
    let trace = refine(&outcomes, entry, &config)?;
    let rounds: Vec<Value> = trace
        .rounds
        .iter()
        .map(|r| {
            json!({
                "a": r.a, "b": r.b, "selected": r.selected, "steps_used": r.steps_used,
                "pi_a": r.pi_a, "pi_b": r.pi_b, "ambiguous": r.ambiguous,
            })
        })
        .collect();
    let mut summary = json!({
        "command": "refine",
        "record": record.display().to_string(),
        "registry": entry.name,
        "interval": [u, v],
        "epsilon": config.epsilon,
        "delta": config.delta,
        "estimate": trace.estimate,
        "rounds": trace.rounds.len(),
        "first_pair": trace.rounds.first().map(|r| [r.a, r.b]),
        "terminated_reason": trace.termination,
        "round_details": rounds,
        "warnings": trace.warnings,
    });
    if let Some(path) = out {
        let mut csv = String::from("round,a,b,selected,steps_used,pi_a_final,pi_b_final\n");
        for (k, r) in trace.rounds.iter().enumerate() {
            csv += &format!(
                "{},{},{},{},{},{},{}\n",
                k + 1,
                num(r.a),
                num(r.b),
                r.selected.map(num).unwrap_or_default(),
                r.steps_used,
                num(r.pi_a),
                num(r.pi_b)
            );
        }
        summary["table"] = Value::from(write_atomic(path, &csv)?.display().to_string());
    }
    Ok(summary)
}

fn analyze(args: &ModelArgs) -> Result<Value, CliError> {
    let model = load_model(args)?;
    let report = model.validate();
    let dec = decompose(&model)?;
    let subspaces: Vec<Value> = dec
        .subspaces
        .iter()
        .map(|s| {
            json!({
                "dim": s.dim(),
                "invariant_state": matrix_to_json(s.invariant_state.matrix()),
                "projector": matrix_to_json(&s.projector),
            })
        })
        .collect();
    Ok(json!({
        "command": "analyze",
        "model": model.source().to_string(),
        "model_sha256": model.content_hash(),
        "dim": model.dim(),
        "outcomes": model.labels(),
        "valid": report.passed,
        "completeness_residual": report.residual,
        "faithful": dec.faithful,
        "fixed_point_dim": dec.fixed_point_dim,
        "minimal_subspaces": subspaces,
        "warnings": dec.warnings,
    }))
}

fn identifiability(args: &ModelPairArgs, max_len: usize, exec: Execution) -> Result<Value, CliError> {
    let (a, b) = load_pair(args)?;
    let report = check_identifiability(&a, &b, max_len, exec)?;
    let pairs: Vec<Value> = report
        .pairs
        .iter()
        .map(|p| {
            json!({
                "first": p.first,
                "second": p.second,
                "separated": p.separated,
                "margin": p.margin,
                "witness": p.witness.as_ref().map(|w| w.iter().map(|&y| a.label(y).to_string()).collect::<Vec<_>>()),
                "witness_probabilities": p.witness_probabilities.map(|(x, y)| [x, y]),
            })
        })
        .collect();
    Ok(json!({
        "command": "identifiability",
        "first": a.source().to_string(),
        "second": b.source().to_string(),
        "max_len": report.max_len,
        "decided": report.decided,
        "pairs": pairs,
    }))
}

fn run_entropy(args: &ModelPairArgs, n: usize, samples: usize, seed: u64, exec: Execution) -> Result<Value, CliError> {
    let (p, q) = load_pair(args)?;
    let ps = invariant_state(&p)?;
    let qs = invariant_state(&q)?;
    let r = entropy_rate(&p, &ps, &q, &qs, n, samples, seed, exec)?;
    Ok(json!({
        "command": "entropy-rate",
        "first": p.source().to_string(),
        "second": q.source().to_string(),
        "word_length": r.word_length,
        "mode": match r.mode { EntropyMode::Exhaustive => "exhaustive", EntropyMode::MonteCarlo => "monte_carlo" },
        "sample_count": r.sample_count,
        "seed": if r.mode == EntropyMode::MonteCarlo { Some(seed) } else { None },
        "estimate": if r.infinite { Value::from("inf") } else { Value::from(r.estimate) },
        "standard_error": r.standard_error,
        "infinite": r.infinite,
    }))
}
