//! Command-line front end for the covariance estimation library.
//!
//! Subcommands: `simulate`, `fit`, `grid`, `cv`, `eval`, `qda`. Each is a
//! thin adapter around the library: inputs are parsed, the corresponding
//! library calls run, and results land in `--out` as CSV/JSON. All
//! randomness is seeded, so reruns reproduce output files byte for byte.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 numeric or dimension
//! error, 3 when every cross-validation candidate failed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use gicf::error::Error;
use gicf::linalg::SymMatrix;
use gicf::model::{self, DataSet, PenaltyPair, SparsityGraph};
use gicf::penalty;
use gicf::rng::SplitMix64;
use gicf::selection::{self, CvOptions};
use gicf::simulate::{self, Bandwidth};
use gicf::solver::GicfConfig;
use gicf::{evaluate, io};

type CmdResult = Result<(), (u8, String)>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Cv(args) => cmd_cv(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Qda(args) => cmd_qda(args),
    }
}

#[derive(Parser)]
#[command(
    name = "gicf",
    version,
    about = "Sparse Gaussian covariance estimation: graph constraints, \
             l1 penalties, and ridge regularization with cross-validated selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a banded covariance model and draw Gaussian rows
    Simulate(SimulateArgs),
    /// Fit a penalized covariance estimate to a data CSV
    Fit(FitArgs),
    /// Build the (lambda, kappa) candidate grid for a data set
    Grid(GridArgs),
    /// Select the penalty pair by M-fold cross-validation
    Cv(CvArgs),
    /// Compare an estimated covariance against a ground truth
    Eval(EvalArgs),
    /// Cross-validated quadratic discriminant analysis on labeled rows
    Qda(QdaArgs),
}

/// Optional JSON defaults; explicit flags always win.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    p: Option<usize>,
    n: Option<usize>,
    band: Option<usize>,
    density: Option<f64>,
    lambda: Option<f64>,
    kappa: Option<f64>,
    seed: Option<u64>,
    folds: Option<usize>,
    inner_folds: Option<usize>,
    grid_r: Option<usize>,
    grid_s1: Option<usize>,
    kappa_ceiling: Option<f64>,
    zero_tol: Option<f64>,
    center: Option<bool>,
    header: Option<bool>,
    include_lambda_zero: Option<bool>,
    ridge_only: Option<bool>,
    refit: Option<bool>,
    warm_start: Option<bool>,
    max_outer_iterations: Option<usize>,
    outer_tolerance: Option<f64>,
    max_inner_iterations: Option<usize>,
    inner_tolerance: Option<f64>,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Output directory (created if missing)
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// JSON file with default parameter values; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Dimension of the covariance matrix
    #[arg(long)]
    p: Option<usize>,
    /// Number of rows to draw
    #[arg(long)]
    n: Option<usize>,
    /// Half-bandwidth of the banded truth
    #[arg(long, conflicts_with = "density")]
    band: Option<usize>,
    /// Target edge density, resolved to the nearest half-bandwidth
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write a V1..Vp header line in data.csv
    #[arg(long)]
    header: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct FitArgs {
    /// Data CSV (rows = observations)
    #[arg(long)]
    data: PathBuf,
    /// Edge-list file; omitted means the complete graph
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Subtract column means before fitting
    #[arg(long)]
    center: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Number of lambda levels
    #[arg(long)]
    grid_r: Option<usize>,
    /// Kappa count at the first lambda level
    #[arg(long)]
    grid_s1: Option<usize>,
    /// Make lambda = 0 the first level
    #[arg(long)]
    include_lambda_zero: bool,
    #[arg(long)]
    center: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Number of cross-validation folds
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_r: Option<usize>,
    #[arg(long)]
    grid_s1: Option<usize>,
    #[arg(long)]
    include_lambda_zero: bool,
    /// Read candidate pairs from a lambda,kappa CSV instead of building them
    #[arg(long, conflicts_with_all = ["grid_r", "grid_s1", "ridge_only", "include_lambda_zero"])]
    grid_file: Option<PathBuf>,
    /// Grid over kappa only, at lambda = 0
    #[arg(long, requires = "kappa_ceiling")]
    ridge_only: bool,
    /// Largest kappa of the ridge-only grid (grid-s1 sets the count)
    #[arg(long)]
    kappa_ceiling: Option<f64>,
    /// Center each training split and shift test rows by training means
    #[arg(long)]
    center: bool,
    /// Disable warm starts along each kappa ladder
    #[arg(long)]
    no_warm_start: bool,
    /// Refit on all rows at the selected pair and write sigma_hat.csv
    #[arg(long)]
    refit: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Estimated covariance CSV
    #[arg(long)]
    estimate: PathBuf,
    /// Ground-truth covariance CSV
    #[arg(long)]
    truth: PathBuf,
    /// Reference sparsity pattern for support recovery
    #[arg(long)]
    graph: PathBuf,
    /// Entries with |value| <= zero-tol count as zero
    #[arg(long)]
    zero_tol: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct QdaArgs {
    /// Labeled CSV: feature columns then a class label column
    #[arg(long)]
    data: PathBuf,
    /// Per-class edge lists, one per class in ascending label order
    #[arg(long)]
    graph: Vec<PathBuf>,
    /// Outer folds for the test-error estimate
    #[arg(long)]
    folds: Option<usize>,
    /// Inner folds for per-class penalty selection
    #[arg(long)]
    inner_folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_r: Option<usize>,
    #[arg(long)]
    grid_s1: Option<usize>,
    #[arg(long)]
    include_lambda_zero: bool,
    #[command(flatten)]
    common: CommonArgs,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } | Error::Parse { .. } => 1,
        Error::AllPairsFailed => 3,
        _ => 2,
    }
}

fn lib<T>(res: gicf::Result<T>) -> Result<T, (u8, String)> {
    res.map_err(|e| (exit_code(&e), e.to_string()))
}

fn usage(msg: impl Into<String>) -> (u8, String) {
    (1, msg.into())
}

fn load_config(path: &Option<PathBuf>) -> Result<FileConfig, (u8, String)> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| usage(format!("bad config {}: {e}", p.display())))
        }
    }
}

fn solver_config(file: &FileConfig) -> GicfConfig {
    let mut cfg = GicfConfig::default();
    if let Some(v) = file.max_outer_iterations {
        cfg.max_outer_iterations = v;
    }
    if let Some(v) = file.outer_tolerance {
        cfg.outer_tolerance = v;
    }
    if let Some(v) = file.max_inner_iterations {
        cfg.max_inner_iterations = v;
    }
    if let Some(v) = file.inner_tolerance {
        cfg.inner_tolerance = v;
    }
    cfg
}

fn prepare_out(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir)
        .map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))
}

/// Rejects configurations that would read and write the same path.
fn ensure_distinct(inputs: &[&Path], outputs: &[PathBuf]) -> CmdResult {
    for input in inputs {
        let abs_in = std::path::absolute(input)
            .map_err(|e| usage(format!("bad path {}: {e}", input.display())))?;
        for output in outputs {
            let abs_out = std::path::absolute(output)
                .map_err(|e| usage(format!("bad path {}: {e}", output.display())))?;
            if abs_in == abs_out {
                return Err(usage(format!(
                    "{} is both an input and an output",
                    input.display()
                )));
            }
        }
    }
    Ok(())
}

fn read_graph_or_complete(
    graph: &Option<PathBuf>,
    p: usize,
) -> Result<SparsityGraph, (u8, String)> {
    match graph {
        None => Ok(SparsityGraph::complete(p)),
        Some(path) => lib(io::read_graph(path, p)),
    }
}

fn load_data(path: &Path, center: bool) -> Result<DataSet, (u8, String)> {
    let y = lib(io::read_dataset(path))?;
    Ok(if center { y.center_columns() } else { y })
}

fn cmd_simulate(args: SimulateArgs) -> CmdResult {
    let file = load_config(&args.common.config)?;
    let p = args
        .p
        .or(file.p)
        .ok_or_else(|| usage("--p is required"))?;
    let n = args
        .n
        .or(file.n)
        .ok_or_else(|| usage("--n is required"))?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let header = args.header || file.header.unwrap_or(false);
    let bw = match (args.band.or(file.band), args.density.or(file.density)) {
        (Some(b), None) => Bandwidth::Bands(b),
        (None, Some(d)) => Bandwidth::TargetDensity(d),
        (None, None) => return Err(usage("one of --band or --density is required")),
        (Some(_), Some(_)) => return Err(usage("--band conflicts with --density")),
    };

    let truth = lib(simulate::make_banded_sigma(p, bw, seed))?;
    let data = lib(simulate::sample_gaussian(&truth.sigma, n, seed.wrapping_add(1)))?;

    prepare_out(&args.common.out)?;
    let data_path = args.common.out.join("data.csv");
    let sigma_path = args.common.out.join("sigma_truth.csv");
    let graph_path = args.common.out.join("graph.edges");
    let report_path = args.common.out.join("simulate_report.json");
    if header {
        lib(io::write_dataset_with_header(&data_path, &data))?;
    } else {
        lib(io::write_dataset(&data_path, &data))?;
    }
    lib(io::write_sym_matrix(&sigma_path, &truth.sigma))?;
    lib(io::write_graph(&graph_path, &truth.graph))?;
    let report = io::SimulateReport {
        p,
        n,
        seed,
        band: truth.band,
        edge_density: truth.graph.density(),
        diagonal_shift: truth.diagonal_shift,
        cond_target_reached: truth.cond_target_reached,
    };
    lib(io::write_json(&report_path, &report))?;
    println!(
        "simulated {n} x {p} rows (band {}) into {}",
        truth.band,
        args.common.out.display()
    );
    Ok(())
}

fn detected_edges(sigma: &SymMatrix) -> Vec<[usize; 2]> {
    let p = sigma.dim();
    let mut edges = Vec::new();
    for j in 0..p {
        for k in (j + 1)..p {
            if sigma.get(j, k) != 0.0 {
                edges.push([j, k]);
            }
        }
    }
    edges
}

fn cmd_fit(args: FitArgs) -> CmdResult {
    let file = load_config(&args.common.config)?;
    let lambda = args.lambda.or(file.lambda).unwrap_or(0.0);
    let kappa = args.kappa.or(file.kappa).unwrap_or(0.0);
    let center = args.center || file.center.unwrap_or(false);
    let config = solver_config(&file);

    let sigma_path = args.common.out.join("sigma_hat.csv");
    let report_path = args.common.out.join("fit_report.json");
    let mut inputs: Vec<&Path> = vec![&args.data];
    if let Some(g) = &args.graph {
        inputs.push(g);
    }
    ensure_distinct(&inputs, &[sigma_path.clone(), report_path.clone()])?;

    let y = load_data(&args.data, center)?;
    let (n, p) = (y.n(), y.p());
    let graph = read_graph_or_complete(&args.graph, p)?;
    let pair = lib(PenaltyPair::new(lambda, kappa))?;
    let s = model::sums_of_squares(&y);

    let fit = gicf::solver::fit(&s, n, &graph, &pair, &config).map_err(|e| {
        if matches!(e, Error::NotPositiveDefinite) && kappa == 0.0 && n <= p {
            (
                2,
                format!(
                    "sample second-moment matrix is singular (n = {n} <= p = {p}); \
                     kappa = 0 requires positive definite S — retry with --kappa > 0"
                ),
            )
        } else {
            (exit_code(&e), e.to_string())
        }
    })?;

    let edges = detected_edges(&fit.sigma_hat);
    let final_objective = match fit.objective_trace.last() {
        Some(&v) => v,
        None => lib(model::loglik(&s, &fit.sigma_hat))?
            - lib(model::penalty_value(&fit.sigma_hat, &pair))?,
    };
    let report = io::FitReport {
        p,
        n,
        lambda,
        kappa,
        converged: fit.converged,
        outer_iterations: fit.outer_iterations,
        final_objective,
        objective_trace: fit.objective_trace.clone(),
        diagonal_solution: edges.is_empty(),
        detected_edges: edges,
    };
    prepare_out(&args.common.out)?;
    lib(io::write_sym_matrix(&sigma_path, &fit.sigma_hat))?;
    lib(io::write_json(&report_path, &report))?;
    println!(
        "fit lambda = {lambda}, kappa = {kappa}: {} sweeps, objective {final_objective:.6}",
        fit.outer_iterations
    );
    Ok(())
}

fn cmd_grid(args: GridArgs) -> CmdResult {
    let file = load_config(&args.common.config)?;
    let r = args.grid_r.or(file.grid_r).unwrap_or(10);
    let s1 = args.grid_s1.or(file.grid_s1).unwrap_or(10);
    let include_zero = args.include_lambda_zero || file.include_lambda_zero.unwrap_or(false);
    let center = args.center || file.center.unwrap_or(false);

    let grid_path = args.common.out.join("grid.csv");
    let report_path = args.common.out.join("grid_report.json");
    let mut inputs: Vec<&Path> = vec![&args.data];
    if let Some(g) = &args.graph {
        inputs.push(g);
    }
    ensure_distinct(&inputs, &[grid_path.clone(), report_path.clone()])?;

    let y = load_data(&args.data, center)?;
    let graph = read_graph_or_complete(&args.graph, y.p())?;
    let s = model::sums_of_squares(&y);
    let grid = lib(penalty::build_grid(&s, &graph, r, s1, include_zero))?;
    if grid.degenerate {
        eprintln!("warning: every permitted-edge sample covariance vanishes; emitting the single pair (0, 0)");
    }

    prepare_out(&args.common.out)?;
    lib(io::write_grid(&grid_path, &grid))?;
    let report = io::GridReport {
        p: y.p(),
        grid_size: grid.points.len(),
        lambda_max_at_zero: lib(penalty::lambda_max(&s, &graph, 0.0))?,
        lambda_levels: grid.lambda_levels.clone(),
        kappa_ceilings: grid.kappa_ceilings.clone(),
        degenerate: grid.degenerate,
    };
    lib(io::write_json(&report_path, &report))?;
    println!(
        "grid with {} pairs over {} lambda levels",
        grid.points.len(),
        grid.lambda_levels.len()
    );
    Ok(())
}

fn cmd_cv(args: CvArgs) -> CmdResult {
    let file = load_config(&args.common.config)?;
    let folds = args.folds.or(file.folds).unwrap_or(5);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let r = args.grid_r.or(file.grid_r).unwrap_or(10);
    let s1 = args.grid_s1.or(file.grid_s1).unwrap_or(10);
    let include_zero = args.include_lambda_zero || file.include_lambda_zero.unwrap_or(false);
    let ridge_only = args.ridge_only || file.ridge_only.unwrap_or(false);
    let center = args.center || file.center.unwrap_or(false);
    let refit = args.refit || file.refit.unwrap_or(false);
    let warm_start = if args.no_warm_start {
        false
    } else {
        file.warm_start.unwrap_or(true)
    };
    let config = solver_config(&file);

    let scores_path = args.common.out.join("cv_scores.csv");
    let best_path = args.common.out.join("cv_best.json");
    let sigma_path = args.common.out.join("sigma_hat.csv");
    let mut inputs: Vec<&Path> = vec![&args.data];
    if let Some(g) = &args.graph {
        inputs.push(g);
    }
    if let Some(g) = &args.grid_file {
        inputs.push(g);
    }
    ensure_distinct(
        &inputs,
        &[scores_path.clone(), best_path.clone(), sigma_path.clone()],
    )?;

    let y = load_data(&args.data, false)?;
    let graph = read_graph_or_complete(&args.graph, y.p())?;
    let y_for_grid = if center { y.center_columns() } else { y.clone() };
    let s_full = model::sums_of_squares(&y_for_grid);

    let grid = if let Some(path) = &args.grid_file {
        lib(io::read_grid(path))?
    } else if ridge_only {
        let ceiling = args
            .kappa_ceiling
            .or(file.kappa_ceiling)
            .ok_or_else(|| usage("--ridge-only requires --kappa-ceiling"))?;
        lib(penalty::ridge_path(ceiling, s1))?
    } else {
        lib(penalty::build_grid(&s_full, &graph, r, s1, include_zero))?
    };

    let plan = lib(selection::make_folds(y.n(), folds, seed))?;
    let options = CvOptions { center, warm_start };
    let result = lib(selection::cross_validate(
        &y, &graph, &grid, &plan, &config, &options,
    ))?;

    prepare_out(&args.common.out)?;
    lib(io::write_scores(
        &scores_path,
        &result.pairs,
        &result.scores,
        &result.failures,
    ))?;
    let best = result.best_pair();
    let report = io::CvReport {
        p: y.p(),
        n: y.n(),
        folds,
        seed,
        grid_size: result.pairs.len(),
        best_lambda: best.lambda(),
        best_kappa: best.kappa(),
        best_score: result.best_score(),
        failed_pairs: result.failures.iter().filter(|&&f| f > 0).count(),
    };
    lib(io::write_json(&best_path, &report))?;
    if refit {
        let fit = lib(gicf::solver::fit(
            &s_full,
            y.n(),
            &graph,
            &best,
            &config,
        ))?;
        lib(io::write_sym_matrix(&sigma_path, &fit.sigma_hat))?;
    }
    println!(
        "selected lambda = {}, kappa = {} (score {:.6})",
        best.lambda(),
        best.kappa(),
        result.best_score()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let file = load_config(&args.common.config)?;
    let zero_tol = args.zero_tol.or(file.zero_tol).unwrap_or(1e-12);

    let eval_path = args.common.out.join("eval.json");
    ensure_distinct(
        &[&args.estimate, &args.truth, &args.graph],
        &[eval_path.clone()],
    )?;

    let est = lib(io::read_sym_matrix(&args.estimate))?;
    let truth = lib(io::read_sym_matrix(&args.truth))?;
    let graph = lib(io::read_graph(&args.graph, est.dim()))?;

    let confusion = lib(evaluate::edge_confusion(&est, &graph, zero_tol))?;
    let p = est.dim();
    let pairs = if p < 2 { 0 } else { p * (p - 1) / 2 };
    let detected = confusion.true_positive + confusion.false_positive;
    let report = io::EvalReport {
        rmse: lib(evaluate::rmse(&est, &truth))?,
        entropy_loss: lib(evaluate::entropy_loss(&est, &truth))?,
        condition_number: lib(gicf::linalg::condition_number(&est))?,
        true_positive: confusion.true_positive,
        false_positive: confusion.false_positive,
        true_negative: confusion.true_negative,
        false_negative: confusion.false_negative,
        tpr: confusion.tpr(),
        tnr: confusion.tnr(),
        ppv: confusion.ppv(),
        f1: confusion.f1(),
        estimated_density: if pairs == 0 {
            0.0
        } else {
            detected as f64 / pairs as f64
        },
    };
    prepare_out(&args.common.out)?;
    lib(io::write_json(&eval_path, &report))?;
    println!(
        "rmse {:.6e}, entropy loss {:.6}, F1 {:.4}",
        report.rmse, report.entropy_loss, report.f1
    );
    Ok(())
}

/// Per-(fold, class) seed for inner-CV fold assignment, derived so runs
/// are reproducible and distinct across folds and classes.
fn inner_seed(seed: u64, fold: usize, class: usize) -> u64 {
    let mut mix = SplitMix64::new(seed ^ ((fold as u64) << 32) ^ class as u64);
    mix.next_u64()
}

fn cmd_qda(args: QdaArgs) -> CmdResult {
    let file = load_config(&args.common.config)?;
    let outer_folds = args.folds.or(file.folds).unwrap_or(5);
    let inner_folds = args.inner_folds.or(file.inner_folds).unwrap_or(10);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let r = args.grid_r.or(file.grid_r).unwrap_or(10);
    let s1 = args.grid_s1.or(file.grid_s1).unwrap_or(10);
    let include_zero = args.include_lambda_zero || file.include_lambda_zero.unwrap_or(false);
    let config = solver_config(&file);

    let report_path = args.common.out.join("qda_report.json");
    let mut inputs: Vec<&Path> = vec![&args.data];
    for g in &args.graph {
        inputs.push(g);
    }
    ensure_distinct(&inputs, &[report_path.clone()])?;

    let (rows, labels) = lib(io::read_labeled_dataset(&args.data))?;
    let p = rows.p();
    let n = rows.n();

    let mut class_names: Vec<String> = labels.clone();
    class_names.sort();
    class_names.dedup();
    if class_names.len() < 2 {
        return Err((
            2,
            format!("need at least two classes, found {}", class_names.len()),
        ));
    }
    let graphs: Vec<SparsityGraph> = if args.graph.is_empty() {
        vec![SparsityGraph::complete(p); class_names.len()]
    } else if args.graph.len() == class_names.len() {
        args.graph
            .iter()
            .map(|path| lib(io::read_graph(path, p)))
            .collect::<Result<_, _>>()?
    } else {
        return Err(usage(format!(
            "got {} --graph files for {} classes (pass one per class in ascending label order)",
            args.graph.len(),
            class_names.len()
        )));
    };

    let plan = lib(selection::make_folds(n, outer_folds, seed))?;
    let mut fold_reports = Vec::with_capacity(outer_folds);
    for fold in 0..outer_folds {
        let report = run_qda_fold(
            &rows,
            &labels,
            &class_names,
            &graphs,
            &plan,
            fold,
            inner_folds,
            seed,
            r,
            s1,
            include_zero,
            &config,
        );
        fold_reports.push(match report {
            Ok(rep) => rep,
            Err(reason) => {
                eprintln!("warning: fold {fold} failed: {reason}");
                io::QdaFoldReport {
                    fold,
                    failed: true,
                    test_rows: plan.folds[fold].len(),
                    misclassified: 0,
                    error_percent: None,
                    chosen: Vec::new(),
                }
            }
        });
    }

    let tested: usize = fold_reports
        .iter()
        .filter(|f| !f.failed)
        .map(|f| f.test_rows)
        .sum();
    let wrong: usize = fold_reports
        .iter()
        .filter(|f| !f.failed)
        .map(|f| f.misclassified)
        .sum();
    if tested == 0 {
        return Err((3, "every outer fold failed".to_owned()));
    }
    let failed_folds = fold_reports.iter().filter(|f| f.failed).count();
    let report = io::QdaReport {
        p,
        n,
        outer_folds,
        inner_folds,
        seed,
        classes: class_names
            .iter()
            .map(|name| io::QdaClassCount {
                label: name.clone(),
                n: labels.iter().filter(|l| *l == name).count(),
            })
            .collect(),
        folds: fold_reports,
        failed_folds,
        aggregate_error_percent: 100.0 * wrong as f64 / tested as f64,
    };
    prepare_out(&args.common.out)?;
    lib(io::write_json(&report_path, &report))?;
    println!(
        "cross-validated error {:.2}% over {tested} rows ({failed_folds} failed folds)",
        report.aggregate_error_percent
    );
    Ok(())
}

/// One outer fold: per-class inner CV on the training rows, a QDA fit at
/// the chosen pairs, and the error on the held-out rows.
#[allow(clippy::too_many_arguments)]
fn run_qda_fold(
    rows: &DataSet,
    labels: &[String],
    class_names: &[String],
    graphs: &[SparsityGraph],
    plan: &gicf::selection::CvPlan,
    fold: usize,
    inner_folds: usize,
    seed: u64,
    r: usize,
    s1: usize,
    include_zero: bool,
    config: &GicfConfig,
) -> Result<io::QdaFoldReport, String> {
    let test_rows = &plan.folds[fold];
    let train_rows: Vec<usize> = {
        let mut v: Vec<usize> = (0..rows.n())
            .filter(|i| !test_rows.contains(i))
            .collect();
        v.sort_unstable();
        v
    };

    let mut class_data = BTreeMap::new();
    let mut class_graphs = BTreeMap::new();
    let mut class_pairs = BTreeMap::new();
    let mut chosen = Vec::new();
    for (class_idx, name) in class_names.iter().enumerate() {
        let members: Vec<usize> = train_rows
            .iter()
            .copied()
            .filter(|&i| &labels[i] == name)
            .collect();
        if members.len() < 2 {
            return Err(format!(
                "class {name:?} has {} training rows in this split",
                members.len()
            ));
        }
        let y_class = rows
            .rows_subset(&members)
            .map_err(|e| e.to_string())?;
        let centered = y_class.center_columns();
        let s_class = model::sums_of_squares(&centered);
        let grid = penalty::build_grid(&s_class, &graphs[class_idx], r, s1, include_zero)
            .map_err(|e| e.to_string())?;
        let m = inner_folds.min(y_class.n());
        let inner_plan = selection::make_folds(y_class.n(), m, inner_seed(seed, fold, class_idx))
            .map_err(|e| e.to_string())?;
        let options = CvOptions {
            center: true,
            warm_start: true,
        };
        let best = selection::cross_validate(
            &y_class,
            &graphs[class_idx],
            &grid,
            &inner_plan,
            config,
            &options,
        )
        .map_err(|e| e.to_string())?
        .best_pair();
        chosen.push(io::QdaChoiceReport {
            label: name.clone(),
            lambda: best.lambda(),
            kappa: best.kappa(),
        });
        class_data.insert(name.clone(), y_class);
        class_graphs.insert(name.clone(), graphs[class_idx].clone());
        class_pairs.insert(name.clone(), best);
    }

    let model = evaluate::qda_fit(&class_data, &class_graphs, &class_pairs, config)
        .map_err(|e| e.to_string())?;
    let mut wrong = 0usize;
    for &row in test_rows {
        let want = class_names
            .iter()
            .position(|name| name == &labels[row])
            .expect("test label seen in full data");
        let got = model.classify(rows.row(row)).map_err(|e| e.to_string())?;
        if got != want {
            wrong += 1;
        }
    }
    Ok(io::QdaFoldReport {
        fold,
        failed: false,
        test_rows: test_rows.len(),
        misclassified: wrong,
        error_percent: Some(100.0 * wrong as f64 / test_rows.len() as f64),
        chosen,
    })
}
