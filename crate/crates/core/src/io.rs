//! File formats: binary CSV data, JSON-lines traces with JSON sidecars,
//! curve CSVs and batch reports.
//!
//! Every `parse_*` function accepts arbitrary bytes or text and returns an
//! error rather than panicking on malformed input.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::batch::BatchFitReport;
use crate::diagnostics::{EvaluationReport, PhaseCurves};
use crate::error::{Error, Result};
use crate::model::{BinaryMatrix, FactorModel, Hyperparams, StepSchedule};
use crate::reconstruct::ReconstructionSeries;
use crate::stream::{StepRecord, StreamTrace};

/// Header names taken to mean a leading timestamp column.
pub const TIMESTAMP_NAMES: [&str; 7] = ["t", "ts", "time", "timestamp", "date", "datetime", "index"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TimestampColumn {
    /// Present when the first header is one of [`TIMESTAMP_NAMES`].
    #[default]
    Auto,
    Present,
    Absent,
}

/// A parsed data file: the matrix plus what is needed to write it back.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvData {
    pub matrix: BinaryMatrix,
    pub columns: Vec<String>,
    /// Header of the timestamp column and its raw values, when present.
    pub timestamps: Option<(String, Vec<String>)>,
}

impl CsvData {
    /// Wraps a matrix with columns named x1..xP and no timestamps.
    pub fn from_matrix(matrix: BinaryMatrix) -> Self {
        let columns = (1..=matrix.ncols()).map(|j| format!("x{j}")).collect();
        Self {
            matrix,
            columns,
            timestamps: None,
        }
    }
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

pub fn parse_binary_csv(bytes: &[u8], mode: TimestampColumn) -> Result<CsvData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(Error::Empty("no header row".into())),
        Some(rec) => rec.map_err(|e| csv_err(&e))?,
    };
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let has_ts = match mode {
        TimestampColumn::Present => true,
        TimestampColumn::Absent => false,
        TimestampColumn::Auto => names
            .first()
            .is_some_and(|h| TIMESTAMP_NAMES.contains(&h.to_ascii_lowercase().as_str())),
    };
    let skip = usize::from(has_ts);
    if names.len() <= skip {
        return Err(parse_err(1, 1, "header has no binary columns"));
    }
    let p = names.len() - skip;

    let mut values = Vec::new();
    let mut stamps = Vec::new();
    let mut n = 0usize;
    for rec in records {
        let rec = rec.map_err(|e| csv_err(&e))?;
        let line = rec.position().map_or(n + 2, |pos| pos.line() as usize);
        if rec.len() != names.len() {
            return Err(parse_err(
                line,
                rec.len().min(names.len()) + 1,
                format!("expected {} fields, found {}", names.len(), rec.len()),
            ));
        }
        if has_ts {
            stamps.push(rec[0].to_string());
        }
        for (j, cell) in rec.iter().enumerate().skip(skip) {
            match cell.trim() {
                "0" => values.push(0u8),
                "1" => values.push(1u8),
                other => {
                    return Err(parse_err(
                        line,
                        j + 1,
                        format!("cell {other:?} is not 0 or 1"),
                    ))
                }
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("file has a header but no data rows".into()));
    }
    let matrix = BinaryMatrix::from_shape_vec(n, p, values)?;
    Ok(CsvData {
        matrix,
        columns: names[skip..].to_vec(),
        timestamps: has_ts.then(|| (names[0].clone(), stamps)),
    })
}

fn csv_err(e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_err(line, 0, e.to_string())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_binary_csv(path: &Path, mode: TimestampColumn) -> Result<CsvData> {
    parse_binary_csv(&read_bytes(path)?, mode).map_err(|e| match e {
        Error::Parse { line, column, message } => Error::Parse {
            line,
            column,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn write_binary_csv<W: Write>(out: W, data: &CsvData) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = Vec::new();
    if let Some((name, _)) = &data.timestamps {
        header.push(name);
    }
    header.extend(data.columns.iter().map(String::as_str));
    w.write_record(&header)?;
    for t in 0..data.matrix.nrows() {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        if let Some((_, stamps)) = &data.timestamps {
            row.push(stamps.get(t).cloned().unwrap_or_default());
        }
        row.extend(data.matrix.row(t).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn write_binary_csv_path(path: &Path, data: &CsvData) -> Result<()> {
    let mut w = create(path)?;
    write_binary_csv(&mut w, data)?;
    finish(path, w)
}

fn to_nested(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_nested(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let n = rows.len();
    let r = rows.first().map_or(0, Vec::len);
    if n == 0 || r == 0 {
        return Err(Error::Empty(format!("{what} has no entries")));
    }
    if rows.iter().any(|row| row.len() != r) {
        return Err(Error::Dimension(format!("{what} rows have unequal lengths")));
    }
    let flat: Vec<f64> = rows.concat();
    if !flat.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    Array2::from_shape_vec((n, r), flat).map_err(|e| Error::Dimension(e.to_string()))
}

/// Run-level data stored beside a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub p: usize,
    pub rank: usize,
    pub steps: usize,
    pub schedule: StepSchedule,
    pub params: Hyperparams,
    pub snapshots: bool,
    pub initial_loadings: Vec<Vec<f64>>,
    pub final_loadings: Vec<Vec<f64>>,
}

/// `dir/name.jsonl` → `dir/name.meta.json` and `dir/name.snapshots.json`.
pub fn trace_sidecars(path: &Path) -> (PathBuf, PathBuf) {
    let stem = path
        .file_stem()
        .map_or_else(|| "trace".to_string(), |s| s.to_string_lossy().into_owned());
    (
        path.with_file_name(format!("{stem}.meta.json")),
        path.with_file_name(format!("{stem}.snapshots.json")),
    )
}

pub fn write_trace_jsonl<W: Write>(mut out: W, records: &[StepRecord]) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n").map_err(|e| Error::io("<trace>", e))?;
    }
    Ok(())
}

/// Writes the JSON-lines trace plus its meta sidecar, and the snapshot
/// sidecar when the trace kept snapshots.
pub fn write_trace(path: &Path, trace: &StreamTrace) -> Result<()> {
    let mut w = create(path)?;
    write_trace_jsonl(&mut w, &trace.records)?;
    finish(path, w)?;
    let (meta_path, snap_path) = trace_sidecars(path);
    let meta = TraceMeta {
        p: trace.nfeatures(),
        rank: trace.rank(),
        steps: trace.len(),
        schedule: trace.schedule,
        params: trace.params.clone(),
        snapshots: trace.snapshots.is_some(),
        initial_loadings: to_nested(&trace.initial_loadings),
        final_loadings: to_nested(&trace.final_loadings),
    };
    write_json(&meta_path, &meta)?;
    match &trace.snapshots {
        Some(snaps) => {
            let nested: Vec<Vec<Vec<f64>>> = snaps.iter().map(to_nested).collect();
            write_json(&snap_path, &nested)?;
        }
        None => {
            // a stale file from an earlier run would pair with the wrong trace
            if snap_path.exists() {
                fs::remove_file(&snap_path).map_err(|e| Error::io(&snap_path, e))?;
            }
        }
    }
    Ok(())
}

pub fn parse_trace_jsonl(text: &str) -> Result<Vec<StepRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: StepRecord = serde_json::from_str(line).map_err(|e| parse_err(i + 1, e.column(), e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn parse_trace_meta(text: &str) -> Result<TraceMeta> {
    let meta: TraceMeta = serde_json::from_str(text)?;
    meta.params.validate()?;
    StepSchedule::new(meta.schedule.kind, meta.schedule.constant)?;
    let init = from_nested(&meta.initial_loadings, "initial loadings")?;
    let fin = from_nested(&meta.final_loadings, "final loadings")?;
    if init.dim() != (meta.p, meta.rank) || fin.dim() != (meta.p, meta.rank) {
        return Err(Error::Dimension(format!(
            "meta declares {}x{} loadings, found {:?} and {:?}",
            meta.p,
            meta.rank,
            init.dim(),
            fin.dim()
        )));
    }
    Ok(meta)
}

/// Snapshots as nested arrays; each must be `p`×`rank`.
pub fn parse_snapshots(text: &str, p: usize, rank: usize) -> Result<Vec<Array2<f64>>> {
    let nested: Vec<Vec<Vec<f64>>> = serde_json::from_str(text)?;
    nested
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let a = from_nested(m, &format!("snapshot {i}"))?;
            if a.dim() != (p, rank) {
                return Err(Error::Dimension(format!(
                    "snapshot {i} is {:?}, expected ({p}, {rank})",
                    a.dim()
                )));
            }
            Ok(a)
        })
        .collect()
}

/// Builds and validates a trace from its three parts.
pub fn assemble_trace(
    records: Vec<StepRecord>,
    meta: &TraceMeta,
    snapshots: Option<Vec<Array2<f64>>>,
) -> Result<StreamTrace> {
    if records.len() != meta.steps {
        return Err(Error::Dimension(format!(
            "meta declares {} steps, trace has {}",
            meta.steps,
            records.len()
        )));
    }
    let trace = StreamTrace {
        records,
        schedule: meta.schedule,
        params: meta.params.clone(),
        initial_loadings: from_nested(&meta.initial_loadings, "initial loadings")?,
        final_loadings: from_nested(&meta.final_loadings, "final loadings")?,
        snapshots,
    };
    trace.validate()?;
    Ok(trace)
}

pub fn read_trace(path: &Path) -> Result<StreamTrace> {
    let records = parse_trace_jsonl(&read_text(path)?)?;
    let (meta_path, snap_path) = trace_sidecars(path);
    let meta = parse_trace_meta(&read_text(&meta_path)?)?;
    let snapshots = if meta.snapshots {
        Some(parse_snapshots(&read_text(&snap_path)?, meta.p, meta.rank)?)
    } else {
        None
    };
    assemble_trace(records, &meta, snapshots)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

/// 17 significant digits, enough to recover every f64 exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_curves<W: Write>(out: W, curves: &PhaseCurves) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "C_t", "Chat_t", "Regret_t"])?;
    for (i, t) in curves.t.iter().enumerate() {
        w.write_record([
            t.to_string(),
            format_float(curves.batch[i]),
            format_float(curves.sequential[i]),
            format_float(curves.regret[i]),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<curves>", e))
}

pub fn write_curves_path(path: &Path, curves: &PhaseCurves) -> Result<()> {
    let mut w = create(path)?;
    write_curves(&mut w, curves)?;
    finish(path, w)
}

pub fn parse_curves(bytes: &[u8]) -> Result<PhaseCurves> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut curves = PhaseCurves {
        t: vec![],
        batch: vec![],
        sequential: vec![],
        regret: vec![],
    };
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_err(&e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 4 {
            return Err(parse_err(line, 1, "expected 4 fields"));
        }
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(line, j + 1, e.to_string()))
        };
        curves.t.push(rec[0].trim().parse().map_err(|_| parse_err(line, 1, "bad step index"))?);
        curves.batch.push(num(1)?);
        curves.sequential.push(num(2)?);
        curves.regret.push(num(3)?);
    }
    Ok(curves)
}

/// Evaluation scalars without the curves, for the sidecar of a curve CSV.
pub fn write_evaluation(path: &Path, report: &EvaluationReport) -> Result<()> {
    let scalars = EvaluationReport {
        curves: None,
        ..report.clone()
    };
    write_json(path, &scalars)
}

pub fn parse_evaluation(text: &str) -> Result<EvaluationReport> {
    Ok(serde_json::from_str(text)?)
}

/// Serialized batch fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReportFile {
    pub n: usize,
    pub p: usize,
    pub rank: usize,
    pub params: Hyperparams,
    pub seed: u64,
    pub batch_loss: f64,
    pub alternations: usize,
    pub converged: bool,
    pub max_subproblem_residual: f64,
    pub subproblems_converged: bool,
    pub objective_history: Vec<f64>,
    pub scores: Vec<Vec<f64>>,
    pub loadings: Vec<Vec<f64>>,
}

impl BatchReportFile {
    pub fn new(report: &BatchFitReport, params: &Hyperparams, seed: u64) -> Self {
        Self {
            n: report.model.nrows(),
            p: report.model.ncols(),
            rank: report.model.rank(),
            params: params.clone(),
            seed,
            batch_loss: report.batch_loss,
            alternations: report.alternations,
            converged: report.converged,
            max_subproblem_residual: report.max_subproblem_residual,
            subproblems_converged: report.subproblems_converged,
            objective_history: report.objective_history.clone(),
            scores: to_nested(&report.model.scores().to_owned()),
            loadings: to_nested(&report.model.loadings().to_owned()),
        }
    }

    pub fn model(&self) -> Result<FactorModel> {
        let scores = from_nested(&self.scores, "batch scores")?;
        let loadings = from_nested(&self.loadings, "batch loadings")?;
        if scores.dim() != (self.n, self.rank) || loadings.dim() != (self.p, self.rank) {
            return Err(Error::Dimension(format!(
                "report declares N={}, P={}, rank={}, found scores {:?} and loadings {:?}",
                self.n,
                self.p,
                self.rank,
                scores.dim(),
                loadings.dim()
            )));
        }
        FactorModel::new(scores, loadings)
    }
}

pub fn parse_batch_report(text: &str) -> Result<(BatchReportFile, FactorModel)> {
    let file: BatchReportFile = serde_json::from_str(text)?;
    let model = file.model()?;
    Ok((file, model))
}

pub fn read_batch_report(path: &Path) -> Result<(BatchReportFile, FactorModel)> {
    parse_batch_report(&read_text(path)?)
}

/// Reconstruction as CSV: timestamp (or row index), states, probabilities
/// and the aggregate count.
pub fn write_reconstruction<W: Write>(
    out: W,
    series: &ReconstructionSeries,
    columns: &[String],
    timestamps: Option<&(String, Vec<String>)>,
) -> Result<()> {
    let p = series.states.ncols();
    if columns.len() != p {
        return Err(Error::Dimension(format!(
            "{} column names for {p} columns",
            columns.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![timestamps.map_or("t".to_string(), |(n, _)| n.clone())];
    header.extend(columns.iter().map(|c| format!("state_{c}")));
    header.extend(columns.iter().map(|c| format!("prob_{c}")));
    header.push("aggregate".into());
    w.write_record(&header)?;
    for t in 0..series.states.nrows() {
        let mut row = vec![timestamps
            .and_then(|(_, s)| s.get(t).cloned())
            .unwrap_or_else(|| (t + 1).to_string())];
        row.extend(series.states.row(t).iter().map(|v| v.to_string()));
        row.extend(series.probabilities.row(t).iter().map(|&v| format_float(v)));
        row.push(series.aggregate[t].to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<reconstruction>", e))
}

pub fn write_reconstruction_path(
    path: &Path,
    series: &ReconstructionSeries,
    columns: &[String],
    timestamps: Option<&(String, Vec<String>)>,
) -> Result<()> {
    let mut w = create(path)?;
    write_reconstruction(&mut w, series, columns, timestamps)?;
    finish(path, w)
}
