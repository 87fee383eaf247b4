//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use qtraj::channel::{check_identifiability, decompose, entropy_rate_exhaustive, entropy_rate_monte_carlo};
use qtraj::discrimination::{lyapunov_estimate, run_discrimination, trace_record, Candidate, CandidateSet};
use qtraj::linalg::{self, c, CMatrix};
use qtraj::refine::{refine, RefineConfig};
use qtraj::registry::{example_model, lookup, EXAMPLE_FAMILY};
use qtraj::rng::seeded;
use qtraj::sampling::{random_model, random_state};
use qtraj::state::fidelity_matrices;
use qtraj::trajectory;
use qtraj::{DensityMatrix, Execution, KrausModel, Outcome};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

const SEEDS: std::ops::RangeInclusive<u64> = 1..=20;
const T: usize = 2000;

fn invariant(p: f64) -> (KrausModel, DensityMatrix) {
    let m = example_model(p).unwrap();
    let s = decompose(&m).unwrap().subspaces[0].invariant_state.clone();
    (m, s)
}

fn pair_set(a: f64, b: f64) -> CandidateSet {
    CandidateSet::uniform(vec![
        Candidate::scalar(a, example_model(a).unwrap()),
        Candidate::scalar(b, example_model(b).unwrap()),
    ])
    .unwrap()
}

fn records_at_truth() -> Vec<Vec<Outcome>> {
    let (m, rho) = invariant(1.8);
    SEEDS.map(|s| trajectory::run(&m, &rho, T, s, false).unwrap().outcomes).collect()
}

fn criterion_1() -> Verdict {
    let mut rng = seeded(101);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let p = 3.0 * i as f64 / 49.0;
        let m = example_model(p).unwrap();
        for _ in 0..100 {
            let rho = random_state(2, &mut rng);
            let total: f64 = m.outcomes().map(|y| linalg::trace_re(&m.apply_kraus(y, &rho).unwrap())).sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    verdict(worst <= 1e-10, format!("max |sum_y Tr K_y(rho) - 1| = {worst:.2e} over 5000 cases"))
}

/// Solves `(Φ - id) X = 0, Tr X = 1` directly on the matrix-unit basis.
fn dense_fixed_point(m: &KrausModel) -> CMatrix {
    let d = m.dim();
    let n = d * d;
    let mut a = CMatrix::zeros(n, n);
    for j in 0..d {
        for i in 0..d {
            let mut e = CMatrix::zeros(d, d);
            e[(i, j)] = c(1.0, 0.0);
            let img = m.channel_map(&e) - &e;
            for jj in 0..d {
                for ii in 0..d {
                    a[(ii + jj * d, i + j * d)] = img[(ii, jj)];
                }
            }
        }
    }
    // trace preservation makes the (0,0) row redundant; replace it by Tr X = 1
    let mut rhs = CMatrix::zeros(n, 1);
    for k in 0..n {
        a[(0, k)] = c(0.0, 0.0);
    }
    for i in 0..d {
        a[(0, i + i * d)] = c(1.0, 0.0);
    }
    rhs[(0, 0)] = c(1.0, 0.0);
    let x = a.lu().solve(&rhs).expect("nonsingular");
    CMatrix::from_fn(d, d, |i, j| x[(i + j * d, 0)])
}

fn criterion_2() -> Verdict {
    let m = example_model(1.8).unwrap();
    let dec = decompose(&m).unwrap();
    let oracle = dense_fixed_point(&m);
    let got = dec.subspaces[0].invariant_state.matrix();
    let vs_oracle = linalg::max_abs(&(got - &oracle));
    let vs_closed = linalg::max_abs(&(got - linalg::diag(&[9.0 / 13.8, 4.8 / 13.8])));
    verdict(
        dec.faithful && dec.count() == 1 && vs_oracle <= 1e-8 && vs_closed <= 1e-8,
        format!(
            "faithful={} m={} |rho - dense solve|={vs_oracle:.2e} |rho - diag(9,4.8)/13.8|={vs_closed:.2e}",
            dec.faithful,
            dec.count()
        ),
    )
}

fn criterion_3() -> Verdict {
    let r = check_identifiability(&example_model(1.0).unwrap(), &example_model(2.0).unwrap(), 1, Execution::Parallel).unwrap();
    let p = &r.pairs[0];
    let (pa, pb) = p.witness_probabilities.unwrap_or((f64::NAN, f64::NAN));
    let ok = r.decided
        && p.witness.as_deref() == Some(&[Outcome(0)][..])
        && (pa - 5.0 / 17.0).abs() <= 1e-9
        && (pb - 7.0 / 13.0).abs() <= 1e-9;
    verdict(ok, format!("witness {:?}, P = {pa:.12} vs {pb:.12}", p.witness))
}

fn block_evolution(cands: &CandidateSet, rho0: &DensityMatrix, word: &[Outcome]) -> Vec<Vec<f64>> {
    let d = cands.dim();
    let r = cands.len();
    let mut xi = CMatrix::zeros(r * d, r * d);
    for (k, w) in cands.prior().iter().enumerate() {
        xi.view_mut((k * d, k * d), (d, d)).copy_from(&rho0.matrix().map(|z| z * *w));
    }
    let read = |xi: &CMatrix| (0..r).map(|k| linalg::trace_re(&xi.view((k * d, k * d), (d, d)).into_owned())).collect();
    let mut out = vec![read(&xi)];
    for &y in word {
        let mut next = CMatrix::zeros(r * d, r * d);
        let ops = cands.candidates().iter().map(|cd| cd.model.operators(y).len()).max().unwrap();
        for mu in 0..ops {
            let mut big = CMatrix::zeros(r * d, r * d);
            for (k, cd) in cands.candidates().iter().enumerate() {
                if let Some(v) = cd.model.operators(y).get(mu) {
                    big.view_mut((k * d, k * d), (d, d)).copy_from(v);
                }
            }
            next += &big * &xi * big.adjoint();
        }
        xi = next.unscale(linalg::trace_re(&next));
        out.push(read(&xi));
    }
    out
}

fn criterion_4() -> Verdict {
    let cands = CandidateSet::new(
        [1.8, 1.0, 0.4].iter().map(|&p| Candidate::scalar(p, example_model(p).unwrap())).collect(),
        vec![0.5, 0.3, 0.2],
    )
    .unwrap();
    let rho0 = DensityMatrix::maximally_mixed(2);
    let (mut bayes_err, mut block_err): (f64, f64) = (0.0, 0.0);
    for bits in 0u32..1024 {
        let word: Vec<Outcome> = (0..10).map(|k| Outcome(((bits >> k) & 1) as usize)).collect();
        let trace = trace_record(&cands, &rho0, &word, None).unwrap();
        let blocks = block_evolution(&cands, &rho0, &word);
        for n in 0..=10 {
            let post = trace.posteriors(n);
            let like: Vec<f64> = cands
                .candidates()
                .iter()
                .zip(cands.prior())
                .map(|(cd, w)| w * cd.model.word_likelihood(&word[..n], &rho0).unwrap())
                .collect();
            let z: f64 = like.iter().sum();
            for k in 0..3 {
                bayes_err = bayes_err.max((post[k] - like[k] / z).abs());
                block_err = block_err.max((post[k] - blocks[n][k]).abs());
            }
        }
    }
    verdict(
        bayes_err <= 1e-9 && block_err <= 1e-9,
        format!("1024 words: max deviation from Bayes {bayes_err:.2e}, from block evolution {block_err:.2e}"),
    )
}

struct FilterRuns {
    selected_true: usize,
    outcomes: Vec<Vec<Outcome>>,
    selections: Vec<Option<usize>>,
}

fn filter_runs(records: &[Vec<Outcome>]) -> FilterRuns {
    let cands = pair_set(1.8, 1.0);
    let rho0 = DensityMatrix::maximally_mixed(2);
    let selections: Vec<Option<usize>> = records
        .iter()
        .map(|rec| run_discrimination(&cands, &rho0, rec, 0.01, None).unwrap().selected)
        .collect();
    FilterRuns {
        selected_true: selections.iter().filter(|s| **s == Some(0)).count(),
        outcomes: records.to_vec(),
        selections,
    }
}

fn criterion_5(runs: &FilterRuns) -> Verdict {
    let tally: Vec<String> = runs.selections.iter().map(|s| s.map_or("-".into(), |k| ["1.8", "1.0"][k].to_string())).collect();
    verdict(runs.selected_true >= 18, format!("1.8 selected in {}/20 runs [{}]", runs.selected_true, tally.join(" ")))
}

/// `S(P^{1.8}, P^{1.0})` from `(D_200 - D_10) / 190`, where `D_n` is the
/// divergence of the length-n word distributions.
fn entropy_slope() -> (f64, f64) {
    let (p, ps) = invariant(1.8);
    let (q, qs) = invariant(1.0);
    let d10 = 10.0 * entropy_rate_exhaustive(&p, &ps, &q, &qs, 10).unwrap().estimate;
    let mc = entropy_rate_monte_carlo(&p, &ps, &q, &qs, 200, 20_000, 2024, Execution::Parallel).unwrap();
    let d200 = 200.0 * mc.estimate;
    ((d200 - d10) / 190.0, 200.0 * mc.standard_error / 190.0)
}

fn criterion_6(runs: &FilterRuns) -> Verdict {
    let (s, s_se) = entropy_slope();
    let cands = pair_set(1.8, 1.0);
    let rho0 = DensityMatrix::maximally_mixed(2);
    let mut failures = Vec::new();
    let mut checked = 0;
    let mut slopes = Vec::new();
    for (i, (rec, sel)) in runs.outcomes.iter().zip(&runs.selections).enumerate() {
        if *sel != Some(0) {
            continue;
        }
        checked += 1;
        let trace = trace_record(&cands, &rho0, rec, None).unwrap();
        let l = lyapunov_estimate(&trace, 1, 0).unwrap();
        slopes.push(l.slope);
        let bound = -s + 3.0 * l.standard_error;
        if !(l.slope < 0.0 && l.slope <= bound) {
            failures.push(format!("seed {}: slope {:.4} se {:.4} bound {:.4}", i + 1, l.slope, l.standard_error, bound));
        }
    }
    let mean = slopes.iter().sum::<f64>() / slopes.len().max(1) as f64;
    verdict(
        failures.is_empty() && checked > 0,
        format!(
            "S = {s:.5} (+/- {s_se:.5}); {checked} selecting runs, mean slope {mean:.5}; violations: {}",
            if failures.is_empty() { "none".into() } else { failures.join("; ") }
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = seeded(707);
    let (mut worst_sub, mut worst_mean): (f64, f64) = (f64::INFINITY, 0.0);
    for k in 0..200 {
        let d = 2 + k % 2;
        let outcomes = 2 + k % 3;
        let truth = random_model(d, outcomes, 2, &mut rng);
        let other = random_model(d, outcomes, 2, &mut rng);
        let cands = CandidateSet::new(
            vec![Candidate::new("true", truth.clone()), Candidate::new("other", other)],
            vec![0.5, 0.5],
        )
        .unwrap();
        let mut filter = qtraj::discrimination::init_filter(&cands, &random_state(d, &mut rng)).unwrap();
        let rho = random_state(d, &mut rng);
        // a few outcomes drawn from the truth to move away from the prior
        let warmup = trajectory::run(&truth, &rho, 3, k as u64, true).unwrap();
        for &y in &warmup.outcomes {
            filter.update(y).unwrap();
        }
        let rho = warmup.states.unwrap().pop().unwrap();
        let before = filter.posteriors()[0] * fidelity_matrices(rho.matrix(), filter.state(0).matrix()).unwrap();
        let mut after = 0.0;
        let mut mean = CMatrix::zeros(d, d);
        for y in truth.outcomes() {
            let img = truth.apply_kraus(y, &rho).unwrap();
            let prob = linalg::trace_re(&img);
            if prob < 1e-14 {
                continue;
            }
            let next = img.unscale(prob);
            mean += next.scale(prob);
            let mut f = filter.clone();
            let post = f.update(y).unwrap();
            after += prob * post[0] * fidelity_matrices(&next, f.state(0).matrix()).unwrap();
        }
        worst_sub = worst_sub.min(after - before);
        worst_mean = worst_mean.max(linalg::max_abs(&(mean - truth.channel_map(rho.matrix()))));
    }
    verdict(
        worst_sub >= -1e-8 && worst_mean <= 1e-10,
        format!("min(E[pi'F'] - pi F) = {worst_sub:.3e}; max |E[rho'] - Phi(rho)| = {worst_mean:.2e}"),
    )
}

fn criterion_8(records: &[Vec<Outcome>]) -> Verdict {
    let entry = lookup(EXAMPLE_FAMILY).unwrap();
    let cfg = RefineConfig::new(0.0, 3.0);
    let mut close = 0;
    let mut first_ok = true;
    let mut widths_ok = true;
    let mut estimates = Vec::new();
    for rec in records {
        let t = refine(rec, entry, &cfg).unwrap();
        first_ok &= t.rounds.first().map(|r| (r.a, r.b)) == Some((1.0, 2.0));
        for w in t.rounds.windows(2) {
            let prev = w[0].proposed.1 - w[0].proposed.0;
            let next = w[1].proposed.1 - w[1].proposed.0;
            widths_ok &= (next - prev * 2.0 / 3.0).abs() <= 1e-12;
        }
        if (t.estimate - 1.8).abs() <= 0.3 {
            close += 1;
        }
        estimates.push(format!("{:.3}", t.estimate));
    }
    verdict(
        first_ok && widths_ok && close >= 16,
        format!(
            "first pair (1, 2): {first_ok}; widths 2/3: {widths_ok}; |p - 1.8| <= 0.3 in {close}/20 [{}]",
            estimates.join(" ")
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_qtraj"))
        .args(args)
        .current_dir(dir)
        .env_remove("QTRAJ_OUT_DIR")
        .output()
        .expect("spawn qtraj");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn criterion_9() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let script: &[&[&str]] = &[
        &["simulate", "--param", "1.8", "--init", "invariant", "--seed", "7", "--out", "r.rec", "--states-out", "s.csv", "--json-out", "sim.json"],
        &["simulate", "--param", "1.8", "--seed", "3", "--repeat", "4", "--jobs", "3", "--out", "batch.rec", "--json-out", "batch.json"],
        &["discriminate", "--record", "r.rec", "--candidates", "1.8,1.0", "--out", "d.csv", "--json-out", "d.json"],
        &["refine", "--record", "r.rec", "--out", "rf.csv", "--json-out", "rf.json"],
        &["entropy-rate", "--params", "1.8,1.0", "--n", "50", "--samples", "500", "--seed", "5", "--json-out", "e.json"],
        &["identifiability", "--params", "1.0,2.0", "--max-len", "6", "--json-out", "id.json"],
        &["analyze", "--param", "1.8", "--json-out", "an.json"],
    ];
    for args in script {
        run_cli(dir.path(), args);
    }
    let first = snapshot(dir.path());
    for args in script {
        run_cli(dir.path(), args);
    }
    let second = snapshot(dir.path());
    run_cli(dir.path(), &["entropy-rate", "--params", "1.8,1.0", "--n", "50", "--samples", "500", "--seed", "5", "--sequential", "--json-out", "e.json"]);
    let sequential_same = std::fs::read(dir.path().join("e.json")).unwrap() == first["e.json"];
    let differing: Vec<&String> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
    verdict(
        differing.is_empty() && first.len() == second.len() && sequential_same,
        format!(
            "{} files compared, differing: {:?}; sequential entropy run identical: {sequential_same}",
            first.len(),
            differing
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, budget: Duration, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let pass = o.pass && took <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {n}: {} ({:.2}s, budget {}s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    };
    report(1, Duration::from_secs(5), &mut criterion_1);
    report(2, Duration::from_secs(1), &mut criterion_2);
    report(3, Duration::from_secs(1), &mut criterion_3);
    report(4, Duration::from_secs(30), &mut criterion_4);
    let records = records_at_truth();
    let mut runs = None;
    report(5, Duration::from_secs(30), &mut || {
        let r = filter_runs(&records);
        let o = criterion_5(&r);
        runs = Some(r);
        o
    });
    let runs = runs.unwrap();
    report(6, Duration::from_secs(120), &mut || criterion_6(&runs));
    report(7, Duration::from_secs(10), &mut criterion_7);
    report(8, Duration::from_secs(300), &mut || criterion_8(&records));
    report(9, Duration::from_secs(60), &mut criterion_9);
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
