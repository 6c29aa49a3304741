//! CSV and JSON serialization for matrices, data sets, graphs, penalty
//! grids, and run reports.
//!
//! Floating-point values are written as `{:.16e}` (17 significant
//! digits), which round-trips every finite f64 exactly; rerunning a
//! pipeline on its own outputs therefore reproduces files byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::{DataSet, PenaltyPair, SparsityGraph};
use crate::penalty::PenaltyGrid;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn parse_field(path: &Path, line_no: usize, tok: &str) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .map_err(|e| parse_err(path, line_no, format!("bad number {tok:?}: {e}")))
}

/// Writes rows of comma-separated values with no header.
pub fn write_dataset(path: &Path, y: &DataSet) -> Result<()> {
    write_dataset_rows(path, y, None)
}

/// As [`write_dataset`], with a `V1..Vp` header line first.
pub fn write_dataset_with_header(path: &Path, y: &DataSet) -> Result<()> {
    let names: Vec<String> = (1..=y.p()).map(|j| format!("V{j}")).collect();
    write_dataset_rows(path, y, Some(&names.join(",")))
}

fn write_dataset_rows(path: &Path, y: &DataSet, header: Option<&str>) -> Result<()> {
    let mut text = String::new();
    if let Some(h) = header {
        let _ = writeln!(text, "{h}");
    }
    for i in 0..y.n() {
        let line: Vec<String> = y.row(i).iter().copied().map(fmt_f64).collect();
        let _ = writeln!(text, "{}", line.join(","));
    }
    write_text(path, &text)
}

fn parse_rows(path: &Path, text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut header_skipped = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        // A first content line with any non-numeric field is a header.
        if rows.is_empty() && !header_skipped {
            if fields.iter().any(|f| f.trim().parse::<f64>().is_err()) {
                header_skipped = true;
                continue;
            }
        }
        let row = fields
            .iter()
            .map(|f| parse_field(path, idx + 1, f))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no data rows"));
    }
    Ok(rows)
}

/// Reads a numeric CSV into a data set. A leading line containing any
/// non-numeric field is treated as a header and skipped.
pub fn read_dataset(path: &Path) -> Result<DataSet> {
    DataSet::from_rows(parse_rows(path, &read_text(path)?)?)
}

/// Reads a numeric CSV whose last column holds class labels; returns the
/// feature rows and the label strings.
pub fn read_labeled_dataset(path: &Path) -> Result<(DataSet, Vec<String>)> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut saw_content = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(parse_err(path, idx + 1, "need at least one feature and a label"));
        }
        let (label, feats) = fields.split_last().unwrap();
        if !saw_content && feats.iter().any(|f| f.trim().parse::<f64>().is_err()) {
            saw_content = true; // header line
            continue;
        }
        saw_content = true;
        let row = feats
            .iter()
            .map(|f| parse_field(path, idx + 1, f))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
        labels.push(label.trim().to_owned());
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no data rows"));
    }
    Ok((DataSet::from_rows(rows)?, labels))
}

/// Writes a symmetric matrix as a dense p x p CSV.
pub fn write_sym_matrix(path: &Path, a: &SymMatrix) -> Result<()> {
    let p = a.dim();
    let mut text = String::new();
    for j in 0..p {
        let line: Vec<String> = (0..p).map(|k| fmt_f64(a.get(j, k))).collect();
        let _ = writeln!(text, "{}", line.join(","));
    }
    write_text(path, &text)
}

/// Reads a dense CSV as a symmetric matrix, rejecting asymmetric input.
pub fn read_sym_matrix(path: &Path) -> Result<SymMatrix> {
    SymMatrix::from_rows(&parse_rows(path, &read_text(path)?)?)
}

/// Writes one whitespace-separated `j k` line per edge (0-based) after a
/// `# p = <p>` comment.
pub fn write_graph(path: &Path, g: &SparsityGraph) -> Result<()> {
    let mut text = format!("# p = {}\n", g.p());
    for (j, k) in g.edges() {
        let _ = writeln!(text, "{j} {k}");
    }
    write_text(path, &text)
}

/// Reads a whitespace-separated `j k` edge list over `p` vertices; `#`
/// lines are comments.
pub fn read_graph(path: &Path, p: usize) -> Result<SparsityGraph> {
    let text = read_text(path)?;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(path, idx + 1, "expected exactly two fields"));
        }
        let parse = |tok: &str| -> Result<usize> {
            tok.parse::<usize>()
                .map_err(|e| parse_err(path, idx + 1, format!("bad vertex: {e}")))
        };
        edges.push((parse(fields[0])?, parse(fields[1])?));
    }
    SparsityGraph::from_edges(p, &edges)
}

/// Writes a `lambda,kappa` CSV of grid points.
pub fn write_grid(path: &Path, grid: &PenaltyGrid) -> Result<()> {
    let mut text = String::from("lambda,kappa\n");
    for pair in &grid.points {
        let _ = writeln!(text, "{},{}", fmt_f64(pair.lambda()), fmt_f64(pair.kappa()));
    }
    write_text(path, &text)
}

/// Reads a `lambda,kappa` CSV back into a grid.
pub fn read_grid(path: &Path) -> Result<PenaltyGrid> {
    let text = read_text(path)?;
    let mut points = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header && line.split(',').any(|f| f.trim().parse::<f64>().is_err()) {
            saw_header = true;
            continue;
        }
        saw_header = true;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(parse_err(path, idx + 1, "expected lambda,kappa"));
        }
        let lambda = parse_field(path, idx + 1, fields[0])?;
        let kappa = parse_field(path, idx + 1, fields[1])?;
        points.push(PenaltyPair::new(lambda, kappa)?);
    }
    PenaltyGrid::from_points(points)
}

/// Writes per-pair cross-validation results as
/// `lambda,kappa,score,failures` rows.
pub fn write_scores(
    path: &Path,
    pairs: &[PenaltyPair],
    scores: &[f64],
    failures: &[usize],
) -> Result<()> {
    let mut text = String::from("lambda,kappa,score,failures\n");
    for ((pair, score), failed) in pairs.iter().zip(scores).zip(failures) {
        let _ = writeln!(
            text,
            "{},{},{},{failed}",
            fmt_f64(pair.lambda()),
            fmt_f64(pair.kappa()),
            fmt_f64(*score),
        );
    }
    write_text(path, &text)
}

/// Summary of one penalized fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub p: usize,
    pub n: usize,
    pub lambda: f64,
    pub kappa: f64,
    pub converged: bool,
    pub outer_iterations: usize,
    pub final_objective: f64,
    pub objective_trace: Vec<f64>,
    /// Unordered pairs {j, k} with a nonzero estimated entry.
    pub detected_edges: Vec<[usize; 2]>,
    /// True when every off-diagonal entry is exactly zero.
    pub diagonal_solution: bool,
}

/// Summary of a cross-validation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub p: usize,
    pub n: usize,
    pub folds: usize,
    pub seed: u64,
    pub grid_size: usize,
    pub best_lambda: f64,
    pub best_kappa: f64,
    pub best_score: f64,
    /// Grid pairs with at least one failed fold.
    pub failed_pairs: usize,
}

/// Summary of a simulated banded model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateReport {
    pub p: usize,
    pub n: usize,
    pub seed: u64,
    pub band: usize,
    pub edge_density: f64,
    pub diagonal_shift: f64,
    pub cond_target_reached: bool,
}

/// Estimator-vs-truth metrics against a reference sparsity pattern.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: f64,
    pub entropy_loss: f64,
    /// Spectral condition number of the estimate.
    pub condition_number: f64,
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
    pub tpr: f64,
    pub tnr: f64,
    pub ppv: f64,
    pub f1: f64,
    /// Detected edges over all unordered pairs.
    pub estimated_density: f64,
}

/// Grid construction summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridReport {
    pub p: usize,
    pub grid_size: usize,
    pub lambda_max_at_zero: f64,
    pub lambda_levels: Vec<f64>,
    /// kappa_max at each lambda level, in level order.
    pub kappa_ceilings: Vec<f64>,
    pub degenerate: bool,
}

/// Penalty pair chosen for one class inside an outer training split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QdaChoiceReport {
    pub label: String,
    pub lambda: f64,
    pub kappa: f64,
}

/// One outer fold of the discriminant-analysis protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QdaFoldReport {
    pub fold: usize,
    pub failed: bool,
    pub test_rows: usize,
    pub misclassified: usize,
    /// None when the fold failed.
    pub error_percent: Option<f64>,
    pub chosen: Vec<QdaChoiceReport>,
}

/// Class sizes over the full labeled data set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QdaClassCount {
    pub label: String,
    pub n: usize,
}

/// Summary of a cross-validated discriminant-analysis run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QdaReport {
    pub p: usize,
    pub n: usize,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
    pub classes: Vec<QdaClassCount>,
    pub folds: Vec<QdaFoldReport>,
    pub failed_folds: usize,
    /// Misclassified over tested rows across non-failed folds, percent.
    pub aggregate_error_percent: f64,
}

/// Writes any serializable report as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    write_text(path, &(body + "\n"))
}

/// Reads a JSON report back.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))
}
