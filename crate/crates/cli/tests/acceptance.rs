//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero on any unexpected outcome.
//!
//! Run with `cargo test -p slpca-cli --test acceptance`.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slpca::batch::{fit_batch, BatchConfig, BatchFitReport};
use slpca::diagnostics::{omega_hat, regret, sequential_loss, surrogate_loss};
use slpca::io::write_trace_jsonl;
use slpca::loss::{loading_gradient, loading_hessian_norm, row_gradients, row_loss, surrogate_value, SurrogateAnchor};
use slpca::reconstruct::{hamming_error, reconstruct, Factors};
use slpca::simgen::{
    column_means, gen_correlated_bernoulli, gen_planted_lowrank, mean_pairwise_correlation, CorrelatedBernoulliSpec,
};
use slpca::stream::{init_stream, run_stream, StreamTrace};
use slpca::{signed_transform, BinaryMatrix, Hyperparams, SignedRow, StepSchedule};

const BIN: &str = env!("CARGO_BIN_EXE_slpca");

struct Outcome {
    pass: bool,
    detail: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            detail: Vec::new(),
        }
    }

    /// Records one sub-check.
    fn check(&mut self, ok: bool, line: String) -> bool {
        self.pass &= ok;
        self.detail.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
        ok
    }

    fn note(&mut self, line: String) {
        self.detail.push(format!("     {line}"));
    }

    fn failing(&self) -> Vec<&str> {
        self.detail
            .iter()
            .filter_map(|d| d.strip_prefix("FAIL "))
            .collect()
    }
}

/// The reference configuration on correlated Bernoulli data, shared by
/// criteria 2 to 6.
struct ReferenceRun {
    data: BinaryMatrix,
    diminishing: StreamTrace,
    diminishing_time: Duration,
    constant: StreamTrace,
    constant_time: Duration,
    batch: BatchFitReport,
}

fn reference_data() -> BinaryMatrix {
    gen_correlated_bernoulli(&CorrelatedBernoulliSpec::default()).expect("generator")
}

fn stream(data: &BinaryMatrix, schedule: StepSchedule) -> (StreamTrace, Duration) {
    let params = Hyperparams {
        schedule_constant: schedule.constant,
        ..Hyperparams::default()
    };
    let start = Instant::now();
    let state = init_stream(data.ncols(), 1, schedule, params, 0).expect("init");
    let (_, trace) = run_stream(state, data, true).expect("stream");
    (trace, start.elapsed())
}

fn reference_run() -> ReferenceRun {
    let data = reference_data();
    let (diminishing, diminishing_time) = stream(&data, StepSchedule::diminishing(0.2).unwrap());
    let (constant, constant_time) = stream(&data, StepSchedule::constant(0.05).unwrap());
    let batch = fit_batch(&data, &Hyperparams::default(), &BatchConfig::default()).expect("batch fit");
    ReferenceRun {
        data,
        diminishing,
        diminishing_time,
        constant,
        constant_time,
        batch,
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, half: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-half..=half))
}

fn random_row(rng: &mut ChaCha8Rng, p: usize) -> SignedRow {
    let bits: Vec<u8> = (0..p).map(|_| u8::from(rng.random_bool(0.5))).collect();
    signed_transform(&bits).unwrap()
}

fn fro(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn criterion_1() -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let p = [1, 8][i % 2];
        let r = [1, 2][(i / 2) % 2];
        let x = random_row(&mut rng, p);
        let a = uniform_matrix(&mut rng, 1, r, 3.0).row(0).to_owned();
        let v = uniform_matrix(&mut rng, p, r, 3.0);
        let g = row_gradients(&x, a.view(), v.view(), 0.0).unwrap();
        let f = |a: &Array1<f64>, v: &Array2<f64>| row_loss(&x, a.view(), v.view()).unwrap();

        let mut fd_a = Array1::zeros(r);
        for k in 0..r {
            let (mut up, mut dn) = (a.clone(), a.clone());
            up[k] += h;
            dn[k] -= h;
            fd_a[k] = (f(&up, &v) - f(&dn, &v)) / (2.0 * h);
        }
        let mut fd_v = Array2::zeros((p, r));
        for j in 0..p {
            for k in 0..r {
                let (mut up, mut dn) = (v.clone(), v.clone());
                up[[j, k]] += h;
                dn[[j, k]] -= h;
                fd_v[[j, k]] = (f(&a, &up) - f(&a, &dn)) / (2.0 * h);
            }
        }
        let err_a = norm(&(&g.grad_scores - &fd_a)) / norm(&fd_a).max(norm(&g.grad_scores)).max(1e-300);
        let err_v = fro(&(&g.grad_loadings - &fd_v)) / fro(&fd_v).max(fro(&g.grad_loadings)).max(1e-300);
        let via_fn = loading_gradient(&x, a.view(), v.view()).unwrap();
        worst = worst.max(err_a).max(err_v).max(fro(&(&via_fn - &g.grad_loadings)));
    }
    let elapsed = start.elapsed();
    out.check(worst < 1e-5, format!("worst relative error {worst:.3e} over 100 instances (< 1e-5)"));
    out.check(elapsed < Duration::from_secs(1), format!("runtime {elapsed:.2?} (< 1 s)"));
    out
}

fn criterion_2(run: &ReferenceRun) -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut norm_m, mut sqrt_p_m, mut hess_m, mut ident_m) =
        (f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut norm_violations = 0;
    for _ in 0..1000 {
        let p = rng.random_range(1..=10);
        let r = rng.random_range(1..=3usize).min(p);
        let x = random_row(&mut rng, p);
        let a = uniform_matrix(&mut rng, 1, r, 3.0).row(0).to_owned();
        let v = uniform_matrix(&mut rng, p, r, 3.0);
        let g = row_gradients(&x, a.view(), v.view(), 0.0).unwrap();
        let a_norm = norm(&a);
        let gv = fro(&g.grad_loadings);
        let m = a_norm - gv;
        if m < -1e-10 {
            norm_violations += 1;
        }
        norm_m = norm_m.min(m);
        sqrt_p_m = sqrt_p_m.min((p as f64).sqrt() * a_norm - gv);
        let hess = loading_hessian_norm(&x, a.view(), v.view()).unwrap();
        hess_m = hess_m.min(0.25 * a_norm * a_norm - hess);
        let lhs = a.dot(&g.grad_scores);
        let rhs: f64 = v.iter().zip(g.grad_loadings.iter()).map(|(p, q)| p * q).sum();
        ident_m = ident_m.min(-(lhs - rhs).abs());
    }
    out.check(
        norm_m >= -1e-10,
        format!(
            "gradient norm bound ||grad_V h|| <= ||a||: min margin {norm_m:.3e}, {norm_violations}/1000 instances below -1e-10"
        ),
    );
    out.note(format!(
        "row-count-scaled form ||grad_V h|| <= sqrt(P)||a|| (what the entrywise derivative supports): min margin {sqrt_p_m:.3e}"
    ));
    out.check(hess_m >= -1e-10, format!("Hessian bound <= ||a||^2/4: min margin {hess_m:.3e}"));
    out.check(ident_m >= -1e-10, format!("<a,grad_a h> = <V,grad_V h>: min margin {ident_m:.3e}"));

    let trace = &run.diminishing;
    let snaps = trace.snapshots.as_ref().expect("reference run keeps snapshots");
    let omega = omega_hat(trace);
    let gamma = trace.params.gamma;
    let (mut step_worst, mut step_bad, mut cor_worst): (f64, usize, f64) = (f64::NEG_INFINITY, 0, 0.0);
    let (mut sum_eta, mut sum_eta_sq, mut growth_min) = (0.0, 0.0, f64::INFINITY);
    for (i, rec) in trace.records.iter().enumerate() {
        let prev = &snaps[i];
        let next = snaps.get(i + 1).unwrap_or(&trace.final_loadings);
        let a = Array1::from(rec.score.clone());
        let a_norm = norm(&a);
        let delta = fro(&(next - prev));
        let bound = rec.eta * a_norm;
        let excess = (delta - bound) / bound.max(f64::MIN_POSITIVE);
        if excess > 1e-8 {
            step_bad += 1;
        }
        step_worst = step_worst.max(excess);

        let grad = loading_gradient(&run.data.signed_row(i), a.view(), prev.view()).unwrap();
        let inner: f64 = -rec.eta * prev.iter().zip(grad.iter()).map(|(p, q)| p * q).sum::<f64>();
        cor_worst = cor_worst.max(rel_err(inner, rec.eta * gamma * a_norm * a_norm));

        sum_eta += rec.eta;
        sum_eta_sq += rec.eta * rec.eta;
        let growth = omega * omega * sum_eta_sq + 2.0 * gamma * omega * omega * sum_eta;
        growth_min = growth_min.min(growth - fro(next).powi(2));
    }
    let n = trace.len();
    out.check(
        step_bad == 0,
        format!("step size ||V^t - V^(t-1)|| <= eta_t ||a_t||: worst relative excess {step_worst:.3e}, {step_bad}/{n} steps beyond 1e-8"),
    );
    out.check(
        cor_worst <= 1e-8,
        format!("eta gamma ||a||^2 = <V^(t-1), V^t - V^(t-1)>: worst relative error {cor_worst:.3e} (<= 1e-8)"),
    );
    out.check(
        growth_min >= 0.0,
        format!("cumulative loading norm bound at every t: min margin {growth_min:.3e}"),
    );
    let elapsed = start.elapsed();
    out.check(elapsed < Duration::from_secs(5), format!("runtime {elapsed:.2?} (< 5 s)"));
    out
}

fn criterion_3(run: &ReferenceRun) -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = f64::INFINITY;
    for _ in 0..50 {
        let p = rng.random_range(1..=10);
        let r = rng.random_range(1..=3usize).min(p);
        let x = random_row(&mut rng, p);
        let a = uniform_matrix(&mut rng, 1, r, 3.0).row(0).to_owned();
        let anchor_v = uniform_matrix(&mut rng, p, r, 3.0);
        let anchor = SurrogateAnchor::at(&x, a.view(), anchor_v.view()).unwrap();
        for k in 0..100 {
            let scale = [1e-3, 1e-1, 1.0, 5.0][k % 4];
            let v = &anchor_v + &uniform_matrix(&mut rng, p, r, scale);
            let upper = surrogate_value(&anchor, v.view()).unwrap();
            let loss = row_loss(&x, a.view(), v.view()).unwrap();
            worst = worst.min((upper - loss) / (1.0 + loss.abs()));
        }
    }
    out.check(
        worst >= -1e-12,
        format!("surrogate minus loss over 5000 perturbations: min relative margin {worst:.3e}"),
    );
    let trace = &run.diminishing;
    let seq = sequential_loss(trace, trace.final_loadings.view(), &run.data).unwrap();
    let sur = surrogate_loss(trace, trace.final_loadings.view(), &run.data).unwrap();
    out.check(sur >= seq, format!("surrogate average {sur:.8} >= sequential average {seq:.8}"));
    out
}

fn gap_check(out: &mut Outcome, run: &ReferenceRun, trace: &StreamTrace, bound: impl Fn(f64) -> f64) {
    let seq = sequential_loss(trace, trace.final_loadings.view(), &run.data).unwrap();
    let re = regret(trace).unwrap();
    let omega = omega_hat(trace);
    let gap = (re - seq).abs();
    let b = bound(omega);
    out.check(
        gap <= b,
        format!("|Re_N - Chat_N| = {gap:.4e} <= bound {b:.4e} (Omega_hat = {omega:.4})"),
    );
}

fn criterion_4(run: &ReferenceRun) -> Outcome {
    let mut out = Outcome::new();
    let trace = &run.diminishing;
    out.check(
        run.diminishing_time < Duration::from_secs(10),
        format!("stream runtime {:.2?} (< 10 s)", run.diminishing_time),
    );
    let c = run.batch.batch_loss;
    let seq = sequential_loss(trace, trace.final_loadings.view(), &run.data).unwrap();
    let sur = surrogate_loss(trace, trace.final_loadings.view(), &run.data).unwrap();
    out.check(
        c <= seq + 1e-6 && seq <= sur + 1e-6,
        format!("ordering C_N {c:.6} <= Chat_N {seq:.6} <= Ctilde_N {sur:.6} (slack 1e-6)"),
    );
    let (n, cc, gamma) = (trace.len() as f64, 0.2, 0.1);
    gap_check(&mut out, run, trace, |o| {
        let o2 = o * o;
        o2 * cc / 2.0 * n.ln() / n + o2 * cc / 4.0 * n.ln() / n.sqrt() + o2 * (2.0 * gamma + cc) / (2.0 * n.sqrt())
            + gamma * o2 / 2.0
    });
    let first = trace.records[0].loss_at_anchor;
    let target = 8.0 * std::f64::consts::LN_2;
    out.check(
        rel_err(first, target) <= 0.01,
        format!("first-step loss {first:.5} vs 8 ln 2 = {target:.5} (within 1%)"),
    );
    out
}

fn criterion_5(run: &ReferenceRun) -> Outcome {
    let mut out = Outcome::new();
    out.check(
        run.constant_time < Duration::from_secs(10),
        format!("stream runtime {:.2?} (< 10 s)", run.constant_time),
    );
    gap_check(&mut out, run, &run.constant, |o| 0.1 * o * o + 0.05 * o * o);
    out
}

fn criterion_6(run: &ReferenceRun) -> Outcome {
    let mut out = Outcome::new();
    let hist = &run.batch.objective_history;
    let worst_rise = hist
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    out.check(
        worst_rise <= 0.0,
        format!("objective over {} alternations: largest change {worst_rise:.3e} (<= 0)", hist.len()),
    );
    out.check(
        run.batch.max_subproblem_residual <= 1e-5,
        format!("final row-subproblem residual {:.3e} (<= 1e-5)", run.batch.max_subproblem_residual),
    );
    out
}

fn criterion_7() -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    for (magnitude, limit) in [(4.0, 0.05), (50.0, 0.0)] {
        let (data, _) = gen_planted_lowrank(200, 8, 1, magnitude, 1.0, 7).unwrap();
        let fit = fit_batch(&data, &Hyperparams::default(), &BatchConfig::default()).unwrap();
        let series = reconstruct(Factors::Batch(&fit.model)).unwrap();
        let err = hamming_error(&series.states, &data).unwrap();
        out.check(err <= limit, format!("|theta| >= {magnitude}: Hamming error {err:.4} (<= {limit})"));
    }
    let elapsed = start.elapsed();
    out.check(elapsed < Duration::from_secs(5), format!("runtime {elapsed:.2?} (< 5 s)"));
    out
}

fn criterion_8() -> Outcome {
    let mut out = Outcome::new();
    let spec = CorrelatedBernoulliSpec {
        length: 10_000,
        ..CorrelatedBernoulliSpec::default()
    };
    let data = gen_correlated_bernoulli(&spec).unwrap();
    let corr = mean_pairwise_correlation(&data).unwrap();
    out.check(
        (corr - 0.49).abs() <= 0.05,
        format!("mean pairwise correlation {corr:.4} (0.49 +/- 0.05)"),
    );
    let band = 3.0 * (0.25f64 / 10_000.0).sqrt();
    let means = column_means(&data);
    let worst = means.iter().map(|m| (m - 0.5).abs()).fold(0.0, f64::max);
    out.check(
        worst <= band,
        format!("largest column-mean deviation {worst:.4} (three-sigma band {band:.4})"),
    );
    out
}

fn slpca(args: &[&str]) -> (i32, String, String) {
    let o = Command::new(BIN).args(args).output().expect("spawn slpca");
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

/// Day/night pipeline through the binary. Returns the exit codes and the
/// reconstruct table.
fn pipeline(dir: &Path) -> Vec<(String, i32, String)> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let (data, batch, trace, curves, rec, bounds) = (
        p("daynight.csv"),
        p("batch.json"),
        p("trace.jsonl"),
        p("curves.csv"),
        p("reconstruction"),
        p("bounds.json"),
    );
    let steps: Vec<(&str, Vec<&str>)> = vec![
        ("simulate", vec!["simulate", "--generator", "day-night", "--seed", "9", "--out", &data]),
        ("fit-batch", vec!["fit-batch", "--data", &data, "--out", &batch]),
        (
            "fit-stream",
            vec![
                "fit-stream", "--data", &data, "--out", &trace, "--schedule", "constant", "--step-constant", "0.05",
                "--snapshots",
            ],
        ),
        ("evaluate", vec!["evaluate", "--data", &data, "--trace", &trace, "--batch", &batch, "--curves", &curves]),
        (
            "reconstruct",
            vec!["reconstruct", "--data", &data, "--trace", &trace, "--batch", &batch, "--out-dir", &rec],
        ),
        (
            "check-bounds",
            vec!["check-bounds", "--data", &data, "--trace", &trace, "--batch", &batch, "--out", &bounds],
        ),
    ];
    steps
        .into_iter()
        .map(|(name, args)| {
            let (code, stdout, stderr) = slpca(&args);
            (name.to_string(), code, format!("{stdout}{stderr}"))
        })
        .collect()
}

fn criterion_9(dir: &Path) -> Outcome {
    let mut out = Outcome::new();
    let steps = pipeline(dir);
    for (name, code, text) in &steps {
        if !out.check(*code == 0, format!("{name} exit status {code}")) {
            out.note(text.trim().replace('\n', " | "));
        }
    }
    let rows = |path: PathBuf| fs::read_to_string(path).map(|s| s.lines().count()).unwrap_or(0);
    let curve_rows = rows(dir.join("curves.csv"));
    out.check(curve_rows == 2017, format!("curves.csv has {curve_rows} lines (header + 2016)"));
    out.check(dir.join("curves.json").exists(), "curve sidecar curves.json written".into());
    let rec = dir.join("reconstruction");
    for file in ["batch.csv", "sequential-final.csv", "regret.csv", "aggregate.csv"] {
        let n = rows(rec.join(file));
        out.check(n == 2017, format!("{file} has {n} lines"));
    }
    let table = fs::read_to_string(rec.join("hamming.csv")).unwrap_or_default();
    out.check(table.lines().count() == 4, "hamming.csv compares three pairings".into());
    if let Some((_, _, text)) = steps.iter().find(|(n, _, _)| n == "reconstruct") {
        for line in text.lines().filter(|l| !l.starts_with("wrote")) {
            out.note(line.to_string());
        }
    }
    out
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_path_buf();
                files.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn trace_bytes(trace: &StreamTrace) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace_jsonl(&mut buf, &trace.records).unwrap();
    buf
}

fn criterion_10(run: &ReferenceRun, first_dir: &Path, second_dir: &Path) -> Outcome {
    let mut out = Outcome::new();
    pipeline(second_dir);
    let (a, b) = (read_tree(first_dir), read_tree(second_dir));
    let differing: Vec<String> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(*v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    out.check(
        a.len() == b.len() && !a.is_empty() && differing.is_empty(),
        format!("pipeline rerun: {} files, differing: {:?}", a.len(), differing),
    );
    let again = reference_run();
    out.check(again.data == run.data, "correlated generator rerun identical".into());
    out.check(
        trace_bytes(&again.diminishing) == trace_bytes(&run.diminishing)
            && trace_bytes(&again.constant) == trace_bytes(&run.constant),
        "stream traces rerun byte-identical".into(),
    );
    out.check(again.batch == run.batch, "batch fit rerun identical".into());
    out
}

/// Criteria whose literal statement cannot hold, with the sub-checks
/// allowed to fail. The criterion still prints FAIL.
const KNOWN: &[(usize, &[&str], &str)] = &[(
    2,
    &["gradient norm bound", "step size"],
    "the loading gradient has one row per feature, each of norm up to ||a||, so only the sqrt(P)-scaled form holds for P > 1",
)];

type Criterion<'a> = (usize, &'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let total = Instant::now();
    let first = tempfile::tempdir().expect("tempdir");
    let second = tempfile::tempdir().expect("tempdir");
    let run = reference_run();

    let criteria: Vec<Criterion<'_>> = vec![
        (1, "gradient correctness", Box::new(criterion_1)),
        (2, "per-step inequality suite", Box::new(|| criterion_2(&run))),
        (3, "majorization", Box::new(|| criterion_3(&run))),
        (4, "reference configuration, diminishing step", Box::new(|| criterion_4(&run))),
        (5, "reference configuration, constant step", Box::new(|| criterion_5(&run))),
        (6, "batch monotonicity", Box::new(|| criterion_6(&run))),
        (7, "planted-model recovery", Box::new(criterion_7)),
        (8, "generator calibration", Box::new(criterion_8)),
        (9, "day/night substitute pipeline", Box::new(|| criterion_9(first.path()))),
        (10, "determinism", Box::new(|| criterion_10(&run, first.path(), second.path()))),
    ];

    let mut unexpected = Vec::new();
    let mut lines = Vec::new();
    for (id, name, f) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
            let mut o = Outcome::new();
            o.check(false, "panicked".into());
            o
        });
        let known = KNOWN.iter().find(|(k, _, _)| k == id);
        let verdict = match (outcome.pass, known) {
            (true, None) => "PASS".to_string(),
            (false, None) => {
                unexpected.push(*id);
                "FAIL".to_string()
            }
            (false, Some((_, allowed, why))) => {
                let only_known = outcome
                    .failing()
                    .iter()
                    .all(|f| allowed.iter().any(|a| f.starts_with(a)));
                if !only_known {
                    unexpected.push(*id);
                }
                format!("FAIL (known: {why})")
            }
            (true, Some(_)) => {
                unexpected.push(*id);
                "PASS (listed as a known failure; update the list)".to_string()
            }
        };
        println!("criterion {id:>2} {name}: {verdict}");
        for d in &outcome.detail {
            println!("      {d}");
        }
        lines.push(format!("criterion {id:>2}: {}", &verdict[..4]));
    }
    println!();
    for l in &lines {
        println!("{l}");
    }
    println!("acceptance suite finished in {:.2?}", total.elapsed());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcomes in criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
