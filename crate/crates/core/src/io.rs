//! File formats: data matrices (CSV or binary), label files, sparse
//! coefficient triplets, and versioned key-value reports.
//!
//! Binary matrices are `b"PMS1"`, then `D` and `N` as little-endian `u64`,
//! then `D·N` little-endian `f64` in column-major order (one point after
//! another). Positions in parse errors are 1-based line and field numbers.
//!
//! Reports are TOML documents. Every real number is written with 17
//! significant digits so that loading a saved report reproduces it exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::experiment::{MetricSummary, SweepCellResult, SynthOutcome, TrialSummary};
use crate::metrics::ResidualDiagnostics;
use crate::types::{ClusteringReport, CoeffMatrix, DataMatrix, Params, SparseCoeffVector};

pub const MATRIX_MAGIC: &[u8; 4] = b"PMS1";
pub const REPORT_SCHEMA: &str = "pmssc-report/1";
pub const SYNTH_SCHEMA: &str = "pmssc-synth/1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: parse error at {row}:{col}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        message: String,
    },

    #[error("{path}: non-finite value at {row}:{col}")]
    NonFiniteValue { path: PathBuf, row: usize, col: usize },

    #[error("{0}: file is empty")]
    EmptyFile(PathBuf),

    #[error("{0}: malformed binary matrix: {1}")]
    BadBinary(PathBuf, String),

    #[error("{0}: malformed report: {1}")]
    BadReport(PathBuf, String),

    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |e| IoError::Io(path.to_path_buf(), e)
}

/// Orientation of a CSV matrix file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layout {
    /// One point per line (N lines of D values).
    #[default]
    RowsArePoints,
    /// One coordinate per line (D lines of N values).
    ColumnsArePoints,
}

impl std::str::FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rows-are-points" => Ok(Layout::RowsArePoints),
            "columns-are-points" => Ok(Layout::ColumnsArePoints),
            other => Err(format!(
                "unknown layout `{other}` (expected rows-are-points|columns-are-points)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv(Layout),
    Binary,
}

/// Reads a CSV or binary matrix; binary files are recognized by their magic
/// bytes and ignore `layout`.
pub fn load_matrix(path: &Path, layout: Layout) -> Result<DataMatrix, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.starts_with(MATRIX_MAGIC) {
        return parse_binary(path, &bytes);
    }
    let rows = parse_csv(path, &bytes)?;
    let built = match layout {
        Layout::RowsArePoints => DataMatrix::from_columns(&rows),
        Layout::ColumnsArePoints => DataMatrix::from_rows(&rows),
    };
    built.map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        row: 1,
        col: 1,
        message: e.to_string(),
    })
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<Vec<Vec<f64>>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            row: e.position().map_or(0, |p| p.line() as usize),
            col: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        let mut row = Vec::with_capacity(record.len());
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| IoError::Parse {
                path: path.to_path_buf(),
                row: line,
                col: c + 1,
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(IoError::NonFiniteValue {
                    path: path.to_path_buf(),
                    row: line,
                    col: c + 1,
                });
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(IoError::Parse {
                    path: path.to_path_buf(),
                    row: line,
                    col: row.len().min(first.len()) + 1,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(IoError::EmptyFile(path.to_path_buf()));
    }
    Ok(rows)
}

fn parse_binary(path: &Path, bytes: &[u8]) -> Result<DataMatrix, IoError> {
    let bad = |m: String| IoError::BadBinary(path.to_path_buf(), m);
    if bytes.len() < 20 {
        return Err(bad("truncated header".into()));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[4 + 8 * k..12 + 8 * k].try_into().unwrap());
    let (d, n) = (word(0), word(1));
    if d == 0 || n == 0 {
        return Err(IoError::EmptyFile(path.to_path_buf()));
    }
    let count = d
        .checked_mul(n)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| bad(format!("dimensions {d}x{n} overflow")))?;
    let body = &bytes[20..];
    if body.len() != count * 8 {
        return Err(bad(format!("expected {} data bytes, found {}", count * 8, body.len())));
    }
    let mut data = Vec::with_capacity(count);
    for (k, chunk) in body.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            // Report the value as (coordinate, point), both 1-based.
            return Err(IoError::NonFiniteValue {
                path: path.to_path_buf(),
                row: k % d as usize + 1,
                col: k / d as usize + 1,
            });
        }
        data.push(v);
    }
    DataMatrix::from_column_major(d as usize, n as usize, data).map_err(|e| bad(e.to_string()))
}

pub fn save_matrix(path: &Path, x: &DataMatrix, format: MatrixFormat) -> Result<(), IoError> {
    let bytes = match format {
        MatrixFormat::Binary => {
            let mut out = Vec::with_capacity(20 + 8 * x.as_slice().len());
            out.extend_from_slice(MATRIX_MAGIC);
            out.extend_from_slice(&(x.dim() as u64).to_le_bytes());
            out.extend_from_slice(&(x.n_points() as u64).to_le_bytes());
            for v in x.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out
        }
        MatrixFormat::Csv(layout) => {
            // `{}` prints the shortest representation that parses back exactly.
            let line = |vals: &mut dyn Iterator<Item = f64>| {
                vals.map(|v| format!("{v}")).collect::<Vec<_>>().join(",") + "\n"
            };
            let mut s = String::new();
            match layout {
                Layout::RowsArePoints => {
                    for c in x.columns() {
                        s += &line(&mut c.iter().copied());
                    }
                }
                Layout::ColumnsArePoints => {
                    for r in 0..x.dim() {
                        s += &line(&mut (0..x.n_points()).map(|j| x.get(r, j)));
                    }
                }
            }
            s.into_bytes()
        }
    };
    fs::write(path, bytes).map_err(io_err(path))
}

/// Labels densified to `0..k` in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    pub labels: Vec<usize>,
    /// `mapping[dense] = original`.
    pub mapping: Vec<usize>,
}

impl LabelSet {
    pub fn num_clusters(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &m)| i == m)
    }
}

/// One nonnegative integer per line. Trailing blank lines are ignored.
pub fn load_labels(path: &Path) -> Result<LabelSet, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let lines: Vec<&str> = text.trim_end().lines().collect();
    if text.trim().is_empty() {
        return Err(IoError::Parse {
            path: path.to_path_buf(),
            row: 1,
            col: 1,
            message: "no labels".into(),
        });
    }
    let mut mapping: Vec<usize> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut labels = Vec::with_capacity(lines.len());
    for (r, line) in lines.iter().enumerate() {
        let raw: usize = line.trim().parse().map_err(|_| IoError::Parse {
            path: path.to_path_buf(),
            row: r + 1,
            col: 1,
            message: format!("`{}` is not a nonnegative integer", line.trim()),
        })?;
        let dense = *index.entry(raw).or_insert_with(|| {
            mapping.push(raw);
            mapping.len() - 1
        });
        labels.push(dense);
    }
    Ok(LabelSet { labels, mapping })
}

pub fn save_labels(path: &Path, labels: &[usize]) -> Result<(), IoError> {
    let mut s = String::with_capacity(labels.len() * 3);
    for l in labels {
        writeln!(s, "{l}").unwrap();
    }
    fs::write(path, s).map_err(io_err(path))
}

/// Nonzero entries of `C` as `row,col,value` lines.
pub fn save_coefficients(path: &Path, c: &CoeffMatrix) -> Result<(), IoError> {
    let mut s = String::from("row,col,value\n");
    for (j, col) in c.columns().iter().enumerate() {
        for &(i, v) in col.entries() {
            writeln!(s, "{i},{j},{v}").unwrap();
        }
    }
    fs::write(path, s).map_err(io_err(path))
}

pub fn load_coefficients(path: &Path, n: usize) -> Result<CoeffMatrix, IoError> {
    let text = fs::read(path).map_err(io_err(path))?;
    let parse_err = |row: usize, col: usize, message: String| IoError::Parse {
        path: path.to_path_buf(),
        row,
        col,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(&text[..]);
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(0, 0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(parse_err(line, 1, format!("expected 3 fields, found {}", record.len())));
        }
        let index = |k: usize| -> Result<usize, IoError> {
            let v: usize = record[k]
                .parse()
                .map_err(|_| parse_err(line, k + 1, format!("`{}` is not an index", &record[k])))?;
            if v >= n {
                return Err(parse_err(line, k + 1, format!("index {v} out of range for {n} points")));
            }
            Ok(v)
        };
        let (i, j) = (index(0)?, index(1)?);
        let v: f64 = record[2]
            .parse()
            .map_err(|_| parse_err(line, 3, format!("`{}` is not a number", &record[2])))?;
        if !v.is_finite() {
            return Err(IoError::NonFiniteValue {
                path: path.to_path_buf(),
                row: line,
                col: 3,
            });
        }
        columns[j].push((i, v));
    }
    let cols = columns
        .into_iter()
        .map(|e| SparseCoeffVector::new(n, e))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| parse_err(0, 0, e.to_string()))?;
    CoeffMatrix::new(cols).map_err(|e| parse_err(0, 0, e.to_string()))
}

/// Real number with 17 significant digits, spelled as a TOML float.
fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn num_list(vs: &[f64]) -> String {
    format!("[{}]", vs.iter().map(|&v| num(v)).collect::<Vec<_>>().join(", "))
}

fn write_params(s: &mut String, p: &Params) {
    writeln!(s, "num_subsets = {}", p.num_subsets).unwrap();
    writeln!(s, "sampling_rate = {}", num(p.sampling_rate)).unwrap();
    writeln!(s, "sparsity = {}", p.sparsity).unwrap();
    writeln!(s, "epsilon = {}", num(p.epsilon)).unwrap();
    writeln!(s, "num_clusters = {}", p.num_clusters).unwrap();
    writeln!(s, "seed = {}", p.seed).unwrap();
    writeln!(s, "threads = {}", p.threads).unwrap();
    writeln!(s, "sampling = {}", quoted(p.sampling.as_str())).unwrap();
}

pub fn mode_name(p: &Params) -> &'static str {
    if p.is_ssc_omp_equivalent() {
        "SSC-OMP-equivalent"
    } else {
        "PMSSC"
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
pub struct MetricsBlock {
    pub accuracy_pct: Option<f64>,
    pub sre_pct: Option<f64>,
    pub connectivity: Option<f64>,
}

/// The on-disk form of a [`ClusteringReport`] plus its run context.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReportDocument {
    pub schema: String,
    pub mode: String,
    pub labels_path: Option<String>,
    pub n_points: usize,
    pub uncovered_points: usize,
    pub runtime_seconds: f64,
    pub params: Params,
    pub metrics: MetricsBlock,
    pub residuals: Option<ResidualDiagnostics>,
}

impl ReportDocument {
    pub fn new(report: &ClusteringReport, params: &Params, uncovered_points: usize, labels_path: Option<&Path>) -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            mode: mode_name(params).into(),
            labels_path: labels_path.map(|p| p.display().to_string()),
            n_points: report.labels.len(),
            uncovered_points,
            runtime_seconds: report.runtime_seconds,
            params: params.clone(),
            metrics: MetricsBlock {
                accuracy_pct: report.accuracy_pct,
                sre_pct: report.sre_pct,
                connectivity: report.connectivity,
            },
            residuals: report.residuals.clone(),
        }
    }

    /// Params must have `seed ≤ i64::MAX` to be representable.
    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "schema = {}", quoted(&self.schema)).unwrap();
        writeln!(s, "mode = {}", quoted(&self.mode)).unwrap();
        if let Some(p) = &self.labels_path {
            writeln!(s, "labels_path = {}", quoted(p)).unwrap();
        }
        writeln!(s, "n_points = {}", self.n_points).unwrap();
        writeln!(s, "uncovered_points = {}", self.uncovered_points).unwrap();
        writeln!(s, "runtime_seconds = {}", num(self.runtime_seconds)).unwrap();
        s += "\n[params]\n";
        write_params(&mut s, &self.params);
        s += "\n[metrics]\n";
        for (key, v) in [
            ("accuracy_pct", self.metrics.accuracy_pct),
            ("sre_pct", self.metrics.sre_pct),
            ("connectivity", self.metrics.connectivity),
        ] {
            if let Some(v) = v {
                writeln!(s, "{key} = {}", num(v)).unwrap();
            }
        }
        if let Some(r) = &self.residuals {
            s += "\n[residuals]\n";
            writeln!(s, "per_subset_mean = {}", num_list(&r.per_subset_mean)).unwrap();
            writeln!(s, "combined_mean = {}", num(r.combined_mean)).unwrap();
        }
        s
    }
}

pub fn save_report(doc: &ReportDocument, path: &Path) -> Result<(), IoError> {
    fs::write(path, doc.render()).map_err(io_err(path))
}

pub fn load_report(path: &Path) -> Result<ReportDocument, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let doc: ReportDocument = toml::from_str(&text).map_err(|e| IoError::BadReport(path.to_path_buf(), e.to_string()))?;
    if doc.schema != REPORT_SCHEMA {
        return Err(IoError::BadReport(path.to_path_buf(), format!("unknown schema `{}`", doc.schema)));
    }
    Ok(doc)
}

fn write_summary(s: &mut String, key: &str, m: &MetricSummary) {
    writeln!(s, "{key}_mean = {}", num(m.mean)).unwrap();
    if let Some(sd) = m.std {
        writeln!(s, "{key}_std = {}", num(sd)).unwrap();
    }
}

fn write_trial_block(s: &mut String, name: &str, t: &TrialSummary) {
    writeln!(s, "\n[{name}]").unwrap();
    writeln!(s, "mode = {}", quoted(mode_name(&t.params))).unwrap();
    write_summary(s, "accuracy_pct", &t.accuracy_pct);
    write_summary(s, "sre_pct", &t.sre_pct);
    write_summary(s, "connectivity", &t.connectivity);
    write_summary(s, "runtime_seconds", &t.runtime_seconds);
    writeln!(s, "uncovered_points_total = {}", t.uncovered_points_total).unwrap();
}

/// Key-value summary of repeated synthetic trials; one block per method.
pub fn render_synth(outcome: &SynthOutcome) -> String {
    let mut s = String::new();
    writeln!(s, "schema = {}", quoted(SYNTH_SCHEMA)).unwrap();
    writeln!(s, "trials = {}", outcome.trials).unwrap();
    s += "\n[spec]\n";
    let spec = &outcome.spec;
    writeln!(s, "num_subspaces = {}", spec.num_subspaces).unwrap();
    writeln!(s, "subspace_dim = {}", spec.subspace_dim).unwrap();
    writeln!(s, "ambient_dim = {}", spec.ambient_dim).unwrap();
    writeln!(s, "points_per_subspace = {}", spec.points_per_subspace).unwrap();
    writeln!(s, "noise_sigma = {}", num(spec.noise_sigma)).unwrap();
    writeln!(s, "seed = {}", spec.seed).unwrap();
    s += "\n[params]\n";
    write_params(&mut s, &outcome.pmssc.params);
    write_trial_block(&mut s, "pmssc", &outcome.pmssc);
    if let Some(b) = &outcome.baseline {
        write_trial_block(&mut s, "ssc_omp", b);
    }
    s
}

pub const SWEEP_HEADER: &str = "points_per_subspace,num_subsets,sampling_rate,sparsity,trials,status,\
accuracy_pct_mean,accuracy_pct_std,sre_pct_mean,sre_pct_std,connectivity_mean,connectivity_std,\
runtime_seconds_mean,runtime_seconds_std,error";

/// One CSV line per sweep cell; failing cells carry their error message and
/// empty metric fields.
pub fn render_sweep(cells: &[SweepCellResult]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for cell in cells {
        let c = &cell.cell;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        let mut fields = vec![
            c.points_per_subspace.to_string(),
            c.num_subsets.to_string(),
            num(c.sampling_rate),
            c.sparsity.to_string(),
            cell.trials.to_string(),
        ];
        match &cell.outcome {
            Ok(t) => {
                fields.push("ok".into());
                for m in [&t.accuracy_pct, &t.sre_pct, &t.connectivity, &t.runtime_seconds] {
                    fields.push(num(m.mean));
                    fields.push(opt(m.std));
                }
                fields.push(String::new());
            }
            Err(e) => {
                fields.push("error".into());
                fields.extend(std::iter::repeat_n(String::new(), 8));
                fields.push(e.clone());
            }
        }
        w.write_record(&fields).unwrap();
        s += &String::from_utf8(w.into_inner().unwrap()).unwrap();
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(io_err(path))
}
