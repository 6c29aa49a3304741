//! Cross-module properties: ridge augmentation equals materialized data
//! augmentation, objective ascent over random instances, subgradient
//! stationarity at convergence, and scheduling-independent selection.

mod common;

use gicf::linalg::SymMatrix;
use gicf::model::{self, DataSet, PenaltyPair};
use gicf::penalty;
use gicf::rng::SplitMix64;
use gicf::selection::{self, CvOptions};
use gicf::simulate::{self, Bandwidth};
use gicf::solver::{self, GicfConfig};

/// fit(S, n, G, lambda, kappa) must match fit on the explicitly
/// materialized augmented rows [Y; sqrt(n kappa) I] with kappa' = 0:
/// the solver's ridge shift is exactly that augmentation in moment form.
#[test]
fn ridge_equals_materialized_augmentation() {
    let mut rng = SplitMix64::new(2024);
    for trial in 0..6 {
        let p = 3 + (trial % 3);
        let n = 40;
        let truth = simulate::make_banded_sigma(p, Bandwidth::Bands(1), 100 + trial as u64)
            .unwrap();
        let y = simulate::sample_gaussian(&truth.sigma, n, 200 + trial as u64).unwrap();
        let s = model::sums_of_squares(&y);
        let graph = common::random_graph(p, 0.7, &mut rng);
        let kappa = 0.2 + 0.1 * trial as f64;
        let lambda = 0.05;

        // Materialize the augmented rows; their second-moment matrix must
        // be normalized by the original n, so rescale sums_of_squares.
        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| y.row(i).to_vec()).collect();
        let scale = (n as f64 * kappa).sqrt();
        for j in 0..p {
            let mut extra = vec![0.0; p];
            extra[j] = scale;
            rows.push(extra);
        }
        let y_aug = DataSet::from_rows(rows).unwrap();
        let s_aug_rows = model::sums_of_squares(&y_aug);
        let mut s_aug = SymMatrix::zeros(p);
        let factor = (n + p) as f64 / n as f64;
        for j in 0..p {
            for k in j..p {
                s_aug.set(j, k, s_aug_rows.get(j, k) * factor);
            }
        }

        let config = GicfConfig::default();
        let ridge = solver::fit(
            &s,
            n,
            &graph,
            &PenaltyPair::new(lambda, kappa).unwrap(),
            &config,
        )
        .unwrap();
        let materialized = solver::fit(
            &s_aug,
            n,
            &graph,
            &PenaltyPair::new(lambda, 0.0).unwrap(),
            &config,
        )
        .unwrap();

        let diff = ridge.sigma_hat.max_abs_diff(&materialized.sigma_hat);
        let scale_ref = ridge.sigma_hat.mean_diag();
        assert!(
            diff <= 1e-10 * scale_ref.max(1.0),
            "trial {trial}: augmented and ridged fits differ by {diff}"
        );
        common::assert_ascent(&ridge.objective_trace, "ridge fit");
        common::assert_ascent(&materialized.objective_trace, "materialized fit");
    }
}

/// Ascent across a varied batch of seeded instances: graphs of all
/// densities, penalties on and off, well- and ill-conditioned data.
#[test]
fn objective_ascends_on_random_instances() {
    let mut rng = SplitMix64::new(77);
    let mut checked = 0;
    for trial in 0..60u64 {
        let p = 2 + (trial % 7) as usize;
        let n = if trial % 3 == 0 { p + 2 } else { 8 * p };
        let truth = common::random_spd(p, &mut rng);
        let y = simulate::sample_gaussian(&truth, n, 300 + trial).unwrap();
        let s = model::sums_of_squares(&y);
        let graph = common::random_graph(p, 0.2 + 0.6 * rng.next_f64(), &mut rng);
        let lambda = if trial % 2 == 0 { 0.0 } else { 0.08 * rng.next_f64() };
        let kappa = if trial % 3 == 0 { 0.3 } else { 0.0 };
        if kappa == 0.0 && n <= p {
            continue;
        }
        let pen = PenaltyPair::new(lambda, kappa).unwrap();
        let fit = match solver::fit(&s, n, &graph, &pen, &GicfConfig::default()) {
            Ok(f) => f,
            Err(gicf::Error::NotPositiveDefinite) => continue,
            Err(e) => panic!("unexpected failure: {e}"),
        };
        common::assert_ascent(&fit.objective_trace, "random instance");
        checked += 1;
    }
    assert!(checked >= 40, "only {checked} instances exercised");
}

/// At a converged fit the finite-difference derivative of the smooth
/// objective must vanish on the diagonal, equal 2 lambda sign(sigma_jk)
/// at nonzero off-diagonal entries, and lie within the subgradient range
/// at zeros. Printed diagnostics record how sharp each bound is.
#[test]
fn converged_fits_are_stationary() {
    let mut rng = SplitMix64::new(4242);
    let mut worst_diag: f64 = 0.0;
    let mut worst_nonzero: f64 = 0.0;
    let mut worst_zero_single: f64 = f64::NEG_INFINITY;
    let mut worst_zero_double: f64 = f64::NEG_INFINITY;
    let mut zeros_seen = 0usize;
    for trial in 0..20u64 {
        let p = 3 + (trial % 4) as usize;
        let n = 10 * p;
        let truth = common::random_spd(p, &mut rng);
        let y = simulate::sample_gaussian(&truth, n, 500 + trial).unwrap();
        let s = model::sums_of_squares(&y);
        let graph = common::random_graph(p, 0.8, &mut rng);
        let s_for_bound = model::ridge_augment(&s, 0.1).unwrap();
        let lmax = penalty::lambda_max(&s_for_bound, &graph, 0.0).unwrap();
        let lambda = (0.15 + 0.5 * rng.next_f64()) * lmax.max(0.05);
        let kappa = if trial % 2 == 0 { 0.1 } else { 0.0 };
        let pen = PenaltyPair::new(lambda, kappa).unwrap();
        let mut config = GicfConfig::default();
        config.outer_tolerance = 1e-10;
        let fit = solver::fit(&s, n, &graph, &pen, &config).unwrap();
        assert!(fit.converged, "trial {trial} did not converge");

        let rep = common::stationarity_report(&s, &fit, &graph, &pen);
        worst_diag = worst_diag.max(rep.max_diag_violation);
        worst_nonzero = worst_nonzero.max(rep.max_nonzero_violation);
        if rep.max_zero_excess_single > f64::NEG_INFINITY {
            worst_zero_single = worst_zero_single.max(rep.max_zero_excess_single);
            worst_zero_double = worst_zero_double.max(rep.max_zero_excess_double);
            zeros_seen += 1;
        }
    }
    println!(
        "stationarity: diag {worst_diag:.3e}, nonzero {worst_nonzero:.3e}, \
         zero excess over lambda {worst_zero_single:.3e}, over 2 lambda {worst_zero_double:.3e} \
         ({zeros_seen} fits with zero entries)"
    );
    assert!(worst_diag <= 1e-4, "diagonal gradient {worst_diag}");
    assert!(worst_nonzero <= 1e-4, "nonzero-entry condition {worst_nonzero}");
    assert!(
        worst_zero_double <= 1e-4,
        "zero-entry subgradient range exceeded by {worst_zero_double}"
    );
}

/// cross_validate must give bit-identical results regardless of how many
/// rayon workers execute the (fold, level) tasks.
#[test]
fn selection_is_schedule_independent() {
    let truth = simulate::make_banded_sigma(6, Bandwidth::Bands(2), 11).unwrap();
    let y = simulate::sample_gaussian(&truth.sigma, 50, 12).unwrap();
    let graph = gicf::SparsityGraph::complete(6);
    let s = model::sums_of_squares(&y);
    let grid = penalty::build_grid(&s, &graph, 4, 3, false).unwrap();
    let plan = selection::make_folds(50, 5, 9).unwrap();
    let config = GicfConfig::default();
    let options = CvOptions::default();

    let wide = selection::cross_validate(&y, &graph, &grid, &plan, &config, &options).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let narrow = pool
        .install(|| selection::cross_validate(&y, &graph, &grid, &plan, &config, &options))
        .unwrap();

    assert_eq!(wide.best_index, narrow.best_index);
    for (a, b) in wide.scores.iter().zip(&narrow.scores) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
