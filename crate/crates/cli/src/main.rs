mod args;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::Parser;
use slpca::batch::fit_batch;
use slpca::diagnostics::{check_all_bounds, evaluate, BoundStatus, CurveOptions};
use slpca::io::{
    read_batch_report, read_binary_csv, read_trace, write_binary_csv_path, write_curves_path, write_evaluation,
    write_json, write_reconstruction_path, write_trace, BatchReportFile, CsvData,
};
use slpca::reconstruct::{aggregate_as_f64, dominant_period, hamming_error, reconstruct, Factors, Pairing};
use slpca::simgen::{
    gen_correlated_bernoulli, gen_day_night, gen_planted_lowrank, CorrelatedBernoulliSpec, DayNightSpec,
};
use slpca::stream::{init_stream, run_stream};
use slpca::{FactorModel, StepSchedule};

use args::{
    CheckBoundsArgs, Cli, Command, DataArgs, EvaluateArgs, FitBatchArgs, FitStreamArgs, Generator, PairingArg,
    ReconstructArgs, SimulateArgs,
};

/// Exit status of a run whose bound check found a gating failure.
const BOUNDS_FAILED: u8 = 1;
const RUN_FAILED: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(RUN_FAILED)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Simulate(a) => simulate(&a).map(|()| 0),
        Command::FitBatch(a) => fit_batch_cmd(&a).map(|()| 0),
        Command::FitStream(a) => fit_stream(&a).map(|()| 0),
        Command::Evaluate(a) => evaluate_cmd(&a).map(|()| 0),
        Command::Reconstruct(a) => reconstruct_cmd(&a).map(|()| 0),
        Command::CheckBounds(a) => check_bounds(&a),
    }
}

fn load_data(args: &DataArgs) -> Result<CsvData> {
    read_binary_csv(&args.data, args.timestamp.into())
        .with_context(|| format!("reading data from {}", args.data.display()))
}

fn load_batch(path: &Path) -> Result<FactorModel> {
    let (_, model) = read_batch_report(path).with_context(|| format!("reading batch fit {}", path.display()))?;
    Ok(model)
}

fn load_trace(path: &Path) -> Result<slpca::stream::StreamTrace> {
    read_trace(path).with_context(|| format!("reading trace {}", path.display()))
}

/// `d03-14:20` style label for slot `t` of a day with `period` samples.
fn slot_label(t: usize, period: usize) -> String {
    let minutes = (t % period) * 1440 / period;
    format!("d{:02}-{:02}:{:02}", t / period, minutes / 60, minutes % 60)
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let data = match a.generator {
        Generator::Correlated => {
            let spec = CorrelatedBernoulliSpec {
                dims: a.p.unwrap_or(8),
                length: a.n.unwrap_or(1000),
                marginal_p: a.marginal_p,
                mixing_prob: a.mixing_prob,
                seed: a.seed,
            };
            CsvData::from_matrix(gen_correlated_bernoulli(&spec)?)
        }
        Generator::DayNight => {
            let spec = DayNightSpec {
                dims: a.p.unwrap_or(6),
                period: a.period,
                day_on_prob: a.day_on_prob,
                night_on_prob: a.night_on_prob,
                day_fraction: a.day_fraction,
                length: a.n.unwrap_or(2016),
                seed: a.seed,
            };
            let matrix = gen_day_night(&spec)?;
            let stamps = (0..matrix.nrows()).map(|t| slot_label(t, spec.period)).collect();
            let columns = (1..=matrix.ncols()).map(|j| format!("appliance{j}")).collect();
            println!(
                "note: day/night data is a synthetic substitute for measured appliance data ({} days of {} samples)",
                matrix.nrows().div_ceil(spec.period),
                spec.period
            );
            CsvData {
                matrix,
                columns,
                timestamps: Some(("ts".into(), stamps)),
            }
        }
        Generator::Planted => {
            let (matrix, _) = gen_planted_lowrank(
                a.n.unwrap_or(200),
                a.p.unwrap_or(8),
                a.rank,
                a.magnitude,
                a.fraction,
                a.seed,
            )?;
            CsvData::from_matrix(matrix)
        }
    };
    write_binary_csv_path(&a.out, &data)?;
    println!(
        "wrote {}x{} binary matrix to {}",
        data.matrix.nrows(),
        data.matrix.ncols(),
        a.out.display()
    );
    Ok(())
}

fn fit_batch_cmd(a: &FitBatchArgs) -> Result<()> {
    let params = a.solver.params(0.2);
    params.validate()?;
    ensure!(a.rank >= 1, "--rank must be at least 1");
    ensure!(a.tol.is_finite() && a.tol > 0.0, "--tol must be positive, got {}", a.tol);
    ensure!(a.max_alternations >= 1, "--max-alternations must be at least 1");
    let data = load_data(&a.data)?;
    let report = fit_batch(&data.matrix, &params, &a.config())?;
    write_json(&a.out, &BatchReportFile::new(&report, &params, a.seed))?;
    println!(
        "batch fit: N={} P={} rank={} loss={:.6} alternations={} converged={} max residual={:.2e}",
        data.matrix.nrows(),
        data.matrix.ncols(),
        a.rank,
        report.batch_loss,
        report.alternations,
        report.converged,
        report.max_subproblem_residual
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

fn fit_stream(a: &FitStreamArgs) -> Result<()> {
    let params = a.solver.params(a.step_constant);
    params.validate()?;
    let schedule = StepSchedule::new(a.schedule.into(), a.step_constant)?;
    ensure!(a.rank >= 1, "--rank must be at least 1");
    let data = load_data(&a.data)?;
    let state = init_stream(data.matrix.ncols(), a.rank, schedule, params, a.seed)?;
    let (_, trace) = run_stream(state, &data.matrix, a.snapshots)?;
    write_trace(&a.out, &trace)?;
    let last = trace.records.last().map_or(f64::NAN, |r| r.post_update_loss);
    println!(
        "stream: N={} P={} rank={} schedule={} C={} final post-update loss={last:.6}",
        trace.len(),
        trace.nfeatures(),
        trace.rank(),
        schedule.kind,
        schedule.constant
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    ensure!(a.stride >= 1, "--stride must be at least 1");
    if a.curves.is_some() && a.batch.is_none() {
        bail!("the C_t curve needs a batch fit: run `slpca fit-batch --data <csv> --out <batch.json>` and pass it with --batch");
    }
    let data = load_data(&a.data)?;
    let trace = load_trace(&a.trace)?;
    let batch = a.batch.as_deref().map(load_batch).transpose()?;
    let options = a.curves.as_ref().map(|_| CurveOptions {
        stride: a.stride,
        refit: a.refit.then(|| {
            let model = batch.as_ref().expect("checked above");
            (
                trace.params.clone(),
                slpca::batch::BatchConfig {
                    rank: model.rank(),
                    ..Default::default()
                },
            )
        }),
    });
    let report = evaluate(&trace, &data.matrix, batch.as_ref(), options.as_ref())?;

    if let Some(b) = report.batch_loss {
        println!("C_N       (batch)              {b:.10}");
    }
    println!("Chat_N    (sequential)         {:.10}", report.sequential_loss);
    match report.surrogate_loss {
        Some(s) => println!("Ctilde_N  (surrogate)          {s:.10}"),
        None => println!("Ctilde_N  (surrogate)          n/a (trace has no snapshots)"),
    }
    println!("Re_N      (regret)             {:.10}", report.regret);
    println!("Omega_hat                      {:.10}", report.omega_hat);
    println!("score norm certificate         {:.10}", report.omega_certificate);
    println!(
        "gap |Re_N - Chat_N| = {:.3e}  bound = {:.3e}  {}",
        report.gap,
        report.gap_bound,
        if report.gap <= report.gap_bound { "within bound" } else { "EXCEEDS BOUND" }
    );

    let sidecar: Option<PathBuf> = a
        .out
        .clone()
        .or_else(|| a.curves.as_ref().map(|c| c.with_extension("json")));
    if let (Some(path), Some(curves)) = (&a.curves, &report.curves) {
        write_curves_path(path, curves)?;
        println!("wrote {} ({} rows)", path.display(), curves.t.len());
    }
    if let Some(path) = sidecar {
        write_evaluation(&path, &report)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn reconstruct_cmd(a: &ReconstructArgs) -> Result<()> {
    let pairings: Vec<Pairing> = match a.pairing {
        PairingArg::Batch => vec![Pairing::Batch],
        PairingArg::SequentialFinal => vec![Pairing::SequentialFinal],
        PairingArg::Regret => vec![Pairing::Regret],
        PairingArg::All => Pairing::ALL.to_vec(),
    };
    let needs_batch = pairings.contains(&Pairing::Batch);
    let needs_trace = pairings.iter().any(|p| *p != Pairing::Batch);
    if needs_batch && a.batch.is_none() {
        bail!("batch pairing needs --batch <batch.json> from `slpca fit-batch`");
    }
    if needs_trace && a.trace.is_none() {
        bail!("streamed pairings need --trace <trace.jsonl> from `slpca fit-stream`");
    }
    let data = load_data(&a.data)?;
    let batch = if needs_batch { a.batch.as_deref().map(load_batch).transpose()? } else { None };
    let trace = if needs_trace { a.trace.as_deref().map(load_trace).transpose()? } else { None };
    if pairings.contains(&Pairing::Regret) && trace.as_ref().is_some_and(|t| t.snapshots.is_none()) {
        bail!("regret pairing needs a trace recorded with `slpca fit-stream --snapshots`");
    }
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;

    let observed = data.matrix.row_sums();
    let mut aggregates: Vec<(Pairing, Vec<usize>)> = Vec::new();
    let mut table = String::from("pairing,hamming_error,mean_on_count\n");
    println!("{:<18} {:>14} {:>14} {:>14}", "pairing", "hamming error", "mean on-count", "cycle (lags)");
    for pairing in pairings {
        let factors = match pairing {
            Pairing::Batch => Factors::Batch(batch.as_ref().expect("checked above")),
            Pairing::SequentialFinal => Factors::SequentialFinal(trace.as_ref().expect("checked above")),
            Pairing::Regret => Factors::Regret(trace.as_ref().expect("checked above")),
        };
        let series = reconstruct(factors)?;
        ensure!(
            series.states.nrows() == data.matrix.nrows() && series.states.ncols() == data.matrix.ncols(),
            "{pairing} factors are {}x{} but the data is {}x{}",
            series.states.nrows(),
            series.states.ncols(),
            data.matrix.nrows(),
            data.matrix.ncols()
        );
        let err = hamming_error(&series.states, &data.matrix)?;
        let agg = aggregate_as_f64(&series.aggregate);
        let mean = agg.iter().sum::<f64>() / agg.len() as f64;
        let max_lag = (agg.len() - 1).min(400);
        let period = dominant_period(&agg, 2, max_lag).map_or("-".to_string(), |p| p.to_string());
        println!("{:<18} {err:>14.6} {mean:>14.4} {period:>14}", pairing.to_string());
        table.push_str(&format!("{pairing},{err:.16e},{mean:.16e}\n"));
        let path = a.out_dir.join(format!("{pairing}.csv"));
        write_reconstruction_path(&path, &series, &data.columns, data.timestamps.as_ref())?;
        aggregates.push((pairing, series.aggregate));
    }
    let table_path = a.out_dir.join("hamming.csv");
    fs::write(&table_path, table).with_context(|| format!("writing {}", table_path.display()))?;

    let mut agg_csv = String::from(data.timestamps.as_ref().map_or("t", |(n, _)| n.as_str()));
    agg_csv.push_str(",observed");
    for (p, _) in &aggregates {
        agg_csv.push_str(&format!(",{p}"));
    }
    agg_csv.push('\n');
    for (t, obs) in observed.iter().enumerate() {
        let label = data
            .timestamps
            .as_ref()
            .and_then(|(_, s)| s.get(t).cloned())
            .unwrap_or_else(|| (t + 1).to_string());
        agg_csv.push_str(&format!("{label},{obs}"));
        for (_, agg) in &aggregates {
            agg_csv.push_str(&format!(",{}", agg[t]));
        }
        agg_csv.push('\n');
    }
    let agg_path = a.out_dir.join("aggregate.csv");
    fs::write(&agg_path, agg_csv).with_context(|| format!("writing {}", agg_path.display()))?;
    println!("wrote reconstructions, aggregate.csv and hamming.csv to {}", a.out_dir.display());
    Ok(())
}

fn check_bounds(a: &CheckBoundsArgs) -> Result<u8> {
    let data = load_data(&a.data)?;
    let trace = load_trace(&a.trace)?;
    let batch = a.batch.as_deref().map(load_batch).transpose()?;
    let report = check_all_bounds(&trace, &data.matrix, batch.as_ref())?;
    println!(
        "{:<28} {:>7} {:>6} {:>13} {:>13} {:>13} {:>6}",
        "check", "gating", "status", "margin", "bound", "measured", "step"
    );
    for e in &report.entries {
        let status = match e.status {
            BoundStatus::Pass => "pass",
            BoundStatus::Fail => "FAIL",
            BoundStatus::NotApplicable => "n/a",
        };
        println!(
            "{:<28} {:>7} {:>6} {:>13.4e} {:>13.4e} {:>13.4e} {:>6}",
            e.name,
            if e.gating { "yes" } else { "no" },
            status,
            e.margin,
            e.bound_value,
            e.measured_value,
            e.at_step.map_or("-".to_string(), |s| s.to_string())
        );
    }
    if let Some(path) = &a.out {
        write_json(path, &report)?;
        println!("wrote {}", path.display());
    }
    if report.passed() {
        println!("all gating checks passed over {} steps", report.steps);
        Ok(0)
    } else {
        let failed: Vec<&str> = report
            .failures()
            .filter(|e| e.gating)
            .map(|e| e.name.as_str())
            .collect();
        println!("gating checks failed: {}", failed.join(", "));
        Ok(BOUNDS_FAILED)
    }
}
