//! Penalty selection by M-fold cross-validation.
//!
//! Each grid pair is scored by the predictive log-likelihood
//! sum_m loglik(S_test_m, Sigma_hat(train_m)); a pair whose fit (or
//! scoring) fails on any fold scores -inf. Folds come from a seeded
//! permutation dealt round-robin, so the split depends only on (n, M,
//! seed).
//!
//! Fits are independent across folds and lambda levels and may run in
//! parallel; within a level the kappa ladder is walked in ascending order
//! so each fit can warm-start from its predecessor. Results are written
//! into (pair, fold) cells and reduced in a fixed order afterwards — the
//! outcome is bit-identical regardless of scheduling, and grid points are
//! processed in canonical (lambda, kappa) order no matter how the caller
//! ordered them, so reordering the grid cannot change the selection.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::{self, DataSet, PenaltyPair, SparsityGraph};
use crate::penalty::PenaltyGrid;
use crate::rng::SplitMix64;
use crate::solver::{self, FitResult, GicfConfig, Initialization};

/// Row partition for cross-validation. Fold sizes differ by at most one
/// and every row appears in exactly one fold.
#[derive(Debug, Clone)]
pub struct CvPlan {
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

/// Seeded fold assignment: a Fisher-Yates permutation of 0..n dealt
/// round-robin into m folds. Rows within a fold are sorted ascending.
pub fn make_folds(n: usize, m: usize, seed: u64) -> Result<CvPlan> {
    if m < 2 || m > n {
        return Err(Error::BadFoldCount { m, n });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut perm);
    let mut folds = vec![Vec::with_capacity(n / m + 1); m];
    for (idx, &row) in perm.iter().enumerate() {
        folds[idx % m].push(row);
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(CvPlan { folds, seed })
}

#[derive(Debug, Clone)]
pub struct CvOptions {
    /// Center columns on each training split and shift the held-out rows
    /// by the training means (never by their own).
    pub center: bool,
    /// Warm-start successive kappa fits at the same lambda level.
    pub warm_start: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            center: false,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvResult {
    /// Grid pairs in the caller's order.
    pub pairs: Vec<PenaltyPair>,
    /// Summed predictive log-likelihood per pair; -inf if any fold failed.
    pub scores: Vec<f64>,
    /// Failed folds per pair.
    pub failures: Vec<usize>,
    pub best_index: usize,
}

impl CvResult {
    pub fn best_pair(&self) -> PenaltyPair {
        self.pairs[self.best_index]
    }

    pub fn best_score(&self) -> f64 {
        self.scores[self.best_index]
    }
}

struct FoldData {
    s_train: SymMatrix,
    n_train: usize,
    s_test: SymMatrix,
}

fn prepare_fold(y: &DataSet, plan: &CvPlan, fold: usize, center: bool) -> Result<FoldData> {
    let test_rows = &plan.folds[fold];
    let train_rows: Vec<usize> = {
        let mut rows: Vec<usize> = plan
            .folds
            .iter()
            .enumerate()
            .filter(|(m, _)| *m != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        rows.sort_unstable();
        rows
    };
    let train = y.rows_subset(&train_rows)?;
    let test = y.rows_subset(test_rows)?;
    let (train, test) = if center {
        let means = train.column_means();
        (train.center_columns(), test.subtract_offsets(&means)?)
    } else {
        (train, test)
    };
    Ok(FoldData {
        s_train: model::sums_of_squares(&train),
        n_train: train.n(),
        s_test: model::sums_of_squares(&test),
    })
}

/// One (pair, fold) fit-and-score; `None` marks a soft failure.
fn fit_and_score(
    fold: &FoldData,
    g: &SparsityGraph,
    pair: &PenaltyPair,
    config: &GicfConfig,
    warm: Option<&SymMatrix>,
) -> Option<FitResult> {
    let mut cfg = config.clone();
    if let Some(w) = warm {
        cfg.initialization = Initialization::WarmStart(w.clone());
    }
    solver::fit(&fold.s_train, fold.n_train, g, pair, &cfg).ok()
}

/// Scores every grid pair over the plan's folds and selects the best;
/// ties go to the largest lambda, then the largest kappa.
pub fn cross_validate(
    y: &DataSet,
    g: &SparsityGraph,
    grid: &PenaltyGrid,
    plan: &CvPlan,
    config: &GicfConfig,
    options: &CvOptions,
) -> Result<CvResult> {
    let n = y.n();
    if g.p() != y.p() {
        return Err(Error::DimensionMismatch {
            expected: y.p(),
            got: g.p(),
        });
    }
    let m = plan.folds.len();
    if m < 2 || m > n {
        return Err(Error::BadFoldCount { m, n });
    }
    let mut seen = vec![0usize; n];
    for fold in &plan.folds {
        if fold.is_empty() {
            return Err(Error::BadFoldCount { m, n });
        }
        for &row in fold {
            if row >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row,
                });
            }
            seen[row] += 1;
        }
    }
    if seen.iter().any(|&c| c != 1) {
        return Err(Error::BadFoldCount { m, n });
    }
    let n_points = grid.points.len();
    if n_points == 0 {
        return Err(Error::OutOfRange {
            what: "grid size",
            value: 0.0,
        });
    }

    let folds: Vec<FoldData> = (0..m)
        .map(|f| prepare_fold(y, plan, f, options.center))
        .collect::<Result<Vec<_>>>()?;

    // Canonical processing order: lambda-major, kappa ascending. The warm
    // chain then walks each kappa ladder upward regardless of how the
    // caller ordered the points.
    let mut order: Vec<usize> = (0..n_points).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&grid.points[a], &grid.points[b]);
        pa.lambda()
            .partial_cmp(&pb.lambda())
            .unwrap()
            .then(pa.kappa().partial_cmp(&pb.kappa()).unwrap())
    });
    let mut levels: Vec<Vec<usize>> = Vec::new();
    for &idx in &order {
        match levels.last() {
            Some(level)
                if grid.points[level[0]].lambda() == grid.points[idx].lambda() =>
            {
                levels.last_mut().unwrap().push(idx)
            }
            _ => levels.push(vec![idx]),
        }
    }

    let tasks: Vec<(usize, usize)> = (0..m)
        .flat_map(|f| (0..levels.len()).map(move |l| (f, l)))
        .collect();
    let cell_results: Vec<(usize, Vec<(usize, Option<f64>)>)> = tasks
        .par_iter()
        .map(|&(fold_idx, level_idx)| {
            let fold = &folds[fold_idx];
            let mut warm: Option<SymMatrix> = None;
            let mut out = Vec::with_capacity(levels[level_idx].len());
            for &point_idx in &levels[level_idx] {
                let pair = &grid.points[point_idx];
                let fitted = fit_and_score(
                    fold,
                    g,
                    pair,
                    config,
                    if options.warm_start { warm.as_ref() } else { None },
                );
                let score = fitted.as_ref().and_then(|res| {
                    model::loglik(&fold.s_test, &res.sigma_hat)
                        .ok()
                        .filter(|v| v.is_finite())
                });
                warm = fitted.map(|res| res.sigma_hat);
                out.push((point_idx, score));
            }
            (fold_idx, out)
        })
        .collect();

    // Deterministic reduction into (pair, fold) cells.
    let mut cells: Vec<Vec<Option<f64>>> = vec![vec![None; m]; n_points];
    for (fold_idx, level_scores) in cell_results {
        for (point_idx, score) in level_scores {
            cells[point_idx][fold_idx] = score;
        }
    }
    let mut scores = Vec::with_capacity(n_points);
    let mut failures = Vec::with_capacity(n_points);
    for cell in &cells {
        let failed = cell.iter().filter(|s| s.is_none()).count();
        failures.push(failed);
        if failed > 0 {
            scores.push(f64::NEG_INFINITY);
        } else {
            scores.push(cell.iter().map(|s| s.unwrap()).sum());
        }
    }

    if scores.iter().all(|s| *s == f64::NEG_INFINITY) {
        return Err(Error::AllPairsFailed);
    }
    let mut best_index = 0;
    for i in 1..n_points {
        let (cand, best) = (&grid.points[i], &grid.points[best_index]);
        let better = scores[i] > scores[best_index]
            || (scores[i] == scores[best_index]
                && (cand.lambda() > best.lambda()
                    || (cand.lambda() == best.lambda() && cand.kappa() > best.kappa())));
        if better {
            best_index = i;
        }
    }

    Ok(CvResult {
        pairs: grid.points.clone(),
        scores,
        failures,
        best_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty;
    use crate::simulate;

    #[test]
    fn fold_sizes_differ_by_at_most_one() {
        let plan = make_folds(10, 3, 1).unwrap();
        let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        for (n, m) in [(7usize, 2usize), (9, 4), (12, 12), (100, 7)] {
            let plan = make_folds(n, m, 99).unwrap();
            let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
            assert_eq!(sizes.iter().sum::<usize>(), n);
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut all: Vec<usize> = plan.folds.concat();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn folds_depend_only_on_seed() {
        let a = make_folds(50, 5, 7).unwrap();
        let b = make_folds(50, 5, 7).unwrap();
        let c = make_folds(50, 5, 8).unwrap();
        assert_eq!(a.folds, b.folds);
        assert_ne!(a.folds, c.folds);
    }

    #[test]
    fn fold_count_bounds() {
        assert!(matches!(make_folds(10, 1, 0), Err(Error::BadFoldCount { .. })));
        assert!(matches!(make_folds(10, 11, 0), Err(Error::BadFoldCount { .. })));
        let loo = make_folds(6, 6, 0).unwrap();
        assert!(loo.folds.iter().all(|f| f.len() == 1));
    }

    fn small_instance(seed: u64) -> (DataSet, SparsityGraph) {
        let truth = simulate::make_banded_sigma(4, simulate::Bandwidth::Bands(1), seed)
            .unwrap();
        let y = simulate::sample_gaussian(&truth.sigma, 60, seed ^ 0xABCD).unwrap();
        (y, SparsityGraph::complete(4))
    }

    #[test]
    fn single_candidate_is_selected_and_score_decomposes() {
        let (y, g) = small_instance(5);
        let grid = PenaltyGrid::from_points(vec![PenaltyPair::new(0.05, 0.1).unwrap()]).unwrap();
        let plan = make_folds(y.n(), 5, 11).unwrap();
        let config = GicfConfig::default();
        let options = CvOptions { center: false, warm_start: true };
        let out = cross_validate(&y, &g, &grid, &plan, &config, &options).unwrap();
        assert_eq!(out.best_index, 0);
        assert_eq!(out.failures, vec![0]);

        // Recompute the score fold by fold outside cross_validate.
        let mut expected = 0.0;
        for f in 0..5 {
            let test = y.rows_subset(&plan.folds[f]).unwrap();
            let mut train_rows: Vec<usize> = (0..y.n())
                .filter(|r| !plan.folds[f].contains(r))
                .collect();
            train_rows.sort_unstable();
            let train = y.rows_subset(&train_rows).unwrap();
            let s_train = model::sums_of_squares(&train);
            let fitres = solver::fit(&s_train, train.n(), &g, &grid.points[0], &config).unwrap();
            expected += model::loglik(&model::sums_of_squares(&test), &fitres.sigma_hat).unwrap();
        }
        assert!(
            (out.scores[0] - expected).abs() <= 1e-10 * expected.abs().max(1.0),
            "{} vs {expected}",
            out.scores[0]
        );
    }

    #[test]
    fn grid_order_does_not_change_selection() {
        let (y, g) = small_instance(21);
        let s = model::sums_of_squares(&y);
        let grid = penalty::build_grid(&s, &g, 4, 3, false).unwrap();
        let mut reversed_points = grid.points.clone();
        reversed_points.reverse();
        let reversed = PenaltyGrid::from_points(reversed_points).unwrap();
        let plan = make_folds(y.n(), 4, 3).unwrap();
        let config = GicfConfig::default();
        let options = CvOptions::default();
        let a = cross_validate(&y, &g, &grid, &plan, &config, &options).unwrap();
        let b = cross_validate(&y, &g, &reversed, &plan, &config, &options).unwrap();
        assert_eq!(a.best_pair(), b.best_pair());
        // Cell scores are identical under the canonical processing order.
        let n = a.scores.len();
        for i in 0..n {
            assert_eq!(a.scores[i].to_bits(), b.scores[n - 1 - i].to_bits());
        }
    }

    #[test]
    fn warm_start_toggle_keeps_selection() {
        let (y, g) = small_instance(77);
        let s = model::sums_of_squares(&y);
        let grid = penalty::build_grid(&s, &g, 3, 3, false).unwrap();
        let plan = make_folds(y.n(), 5, 19).unwrap();
        let config = GicfConfig::default();
        let warm = cross_validate(&y, &g, &grid, &plan, &config, &CvOptions::default()).unwrap();
        let cold = cross_validate(
            &y,
            &g,
            &grid,
            &plan,
            &config,
            &CvOptions { center: false, warm_start: false },
        )
        .unwrap();
        assert_eq!(warm.best_pair(), cold.best_pair());
        for (a, b) in warm.scores.iter().zip(&cold.scores) {
            assert!((a - b).abs() <= 1e-4 * a.abs().max(1.0));
        }
    }

    #[test]
    fn rank_deficient_unridged_pairs_fail_softly() {
        // n = 8 rows, p = 12: every training split is rank deficient, so
        // (lambda, 0) fails on every fold while (lambda, kappa > 0) works.
        let truth = simulate::make_banded_sigma(12, simulate::Bandwidth::Bands(1), 3).unwrap();
        let y = simulate::sample_gaussian(&truth.sigma, 8, 99).unwrap();
        let g = SparsityGraph::complete(12);
        let grid = PenaltyGrid::from_points(vec![
            PenaltyPair::new(0.05, 0.0).unwrap(),
            PenaltyPair::new(0.05, 0.5).unwrap(),
        ])
        .unwrap();
        let plan = make_folds(8, 4, 1).unwrap();
        let out = cross_validate(
            &y,
            &g,
            &grid,
            &plan,
            &GicfConfig::default(),
            &CvOptions::default(),
        )
        .unwrap();
        assert_eq!(out.scores[0], f64::NEG_INFINITY);
        assert_eq!(out.failures[0], 4);
        assert!(out.scores[1].is_finite());
        assert_eq!(out.best_index, 1);

        // With only the unridged pair, every candidate fails.
        let dead = PenaltyGrid::from_points(vec![PenaltyPair::new(0.05, 0.0).unwrap()]).unwrap();
        assert!(matches!(
            cross_validate(
                &y,
                &g,
                &dead,
                &plan,
                &GicfConfig::default(),
                &CvOptions::default()
            ),
            Err(Error::AllPairsFailed)
        ));
    }

    #[test]
    fn ties_break_to_larger_lambda_then_kappa() {
        // Both lambdas sit above the collapse boundary of every training
        // split, so the fits (and scores) are bit-identical; the larger
        // lambda must win.
        let (y, g) = small_instance(41);
        let plan = make_folds(y.n(), 5, 2).unwrap();
        let mut lmax: f64 = 0.0;
        for fold in 0..5 {
            let train_rows: Vec<usize> = (0..y.n())
                .filter(|r| !plan.folds[fold].contains(r))
                .collect();
            let s_train = model::sums_of_squares(&y.rows_subset(&train_rows).unwrap());
            lmax = lmax.max(penalty::lambda_max(&s_train, &g, 0.2).unwrap());
        }
        let grid = PenaltyGrid::from_points(vec![
            PenaltyPair::new(1.01 * lmax, 0.2).unwrap(),
            PenaltyPair::new(1.30 * lmax, 0.2).unwrap(),
        ])
        .unwrap();
        let out = cross_validate(
            &y,
            &g,
            &grid,
            &plan,
            &GicfConfig::default(),
            &CvOptions::default(),
        )
        .unwrap();
        assert_eq!(out.scores[0].to_bits(), out.scores[1].to_bits());
        assert_eq!(out.best_index, 1);
    }

    #[test]
    fn large_lambda_wins_on_diagonal_truth() {
        // Data from a diagonal covariance: the best lambda should land in
        // the top half of the grid range in nearly all replicates.
        let mut top_half = 0;
        for seed in 0..10u64 {
            let truth = SymMatrix::from_diag(&[1.0, 1.5, 2.0, 0.8]);
            let y = simulate::sample_gaussian(&truth, 80, 1000 + seed).unwrap();
            let g = SparsityGraph::complete(4);
            let s = model::sums_of_squares(&y);
            let grid = penalty::build_grid(&s, &g, 6, 2, false).unwrap();
            let plan = make_folds(y.n(), 5, seed).unwrap();
            let out = cross_validate(
                &y,
                &g,
                &grid,
                &plan,
                &GicfConfig::default(),
                &CvOptions::default(),
            )
            .unwrap();
            let lmax0 = penalty::lambda_max(&s, &g, 0.0).unwrap();
            if out.best_pair().lambda() >= lmax0 / 2.0 {
                top_half += 1;
            }
        }
        assert!(top_half >= 8, "large lambda selected in only {top_half}/10 runs");
    }
}
