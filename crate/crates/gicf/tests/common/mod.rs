//! Shared helpers for the integration suites: an independent
//! derivative-free maximizer of the penalized objective (used as an
//! oracle against the coordinate solver), finite-difference gradients,
//! and random instance generators.
#![allow(dead_code)]

use gicf::linalg::{self, SymMatrix};
use gicf::model::{self, PenaltyPair, SparsityGraph};
use gicf::rng::SplitMix64;
use gicf::solver::FitResult;

/// Penalized objective the whole suite maximizes:
/// loglik(S, Sigma) - lambda * l1(offdiag) - kappa * tr(Sigma^-1).
pub fn objective(s: &SymMatrix, sigma: &SymMatrix, pen: &PenaltyPair) -> f64 {
    match (model::loglik(s, sigma), model::penalty_value(sigma, pen)) {
        (Ok(ll), Ok(pv)) => ll - pv,
        _ => f64::NEG_INFINITY,
    }
}

/// Asserts the ascent property on a fit's objective trace (slack 1e-9,
/// scaled by the objective magnitude).
pub fn assert_ascent(trace: &[f64], context: &str) {
    for w in trace.windows(2) {
        let slack = 1e-9 * w[0].abs().max(1.0);
        assert!(
            w[1] >= w[0] - slack,
            "{context}: objective decreased {} -> {}",
            w[0],
            w[1]
        );
    }
}

/// Random PD matrix G G' / p + diag boost, entries O(1).
pub fn random_spd(p: usize, rng: &mut SplitMix64) -> SymMatrix {
    let g: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..p).map(|_| rng.next_f64() * 2.0 - 1.0).collect())
        .collect();
    let mut out = SymMatrix::zeros(p);
    for j in 0..p {
        for k in j..p {
            let dot: f64 = (0..p).map(|t| g[j][t] * g[k][t]).sum();
            out.set(j, k, dot / p as f64 + if j == k { 0.5 } else { 0.0 });
        }
    }
    out
}

/// Random graph with each edge present independently with probability q.
pub fn random_graph(p: usize, q: f64, rng: &mut SplitMix64) -> SparsityGraph {
    let mut edges = Vec::new();
    for j in 0..p {
        for k in (j + 1)..p {
            if rng.next_f64() < q {
                edges.push((j, k));
            }
        }
    }
    SparsityGraph::from_edges(p, &edges).expect("edges in range")
}

// ---------------------------------------------------------------------
// Nelder-Mead oracle over Cholesky-parameterized covariance matrices.
// Sigma = L L' with L lower triangular and exp-transformed diagonal, so
// every parameter vector maps to a PD matrix and the search is
// unconstrained. Completely independent of the coordinate solver.
// ---------------------------------------------------------------------

fn theta_dim(p: usize) -> usize {
    p * (p + 1) / 2
}

fn theta_to_sigma(theta: &[f64], p: usize) -> SymMatrix {
    let mut l = vec![vec![0.0; p]; p];
    let mut idx = 0;
    for j in 0..p {
        for k in 0..=j {
            l[j][k] = if j == k { theta[idx].exp() } else { theta[idx] };
            idx += 1;
        }
    }
    let mut sigma = SymMatrix::zeros(p);
    for j in 0..p {
        for k in j..p {
            let dot: f64 = (0..p).map(|t| l[j][t] * l[k][t]).sum();
            sigma.set(j, k, dot);
        }
    }
    sigma
}

/// Starting point whose Sigma equals diag(S): matches the solver's
/// default initialization so both searches start in the same basin.
fn theta_from_diag(s: &SymMatrix) -> Vec<f64> {
    let p = s.dim();
    let mut theta = vec![0.0; theta_dim(p)];
    let mut idx = 0;
    for j in 0..p {
        for k in 0..=j {
            if j == k {
                theta[idx] = 0.5 * s.get(j, j).ln();
            }
            idx += 1;
        }
    }
    theta
}

struct Simplex {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

fn nelder_mead_minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    step: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let dim = start.len();
    let mut sx = Simplex {
        points: Vec::with_capacity(dim + 1),
        values: Vec::with_capacity(dim + 1),
    };
    sx.points.push(start.to_vec());
    for i in 0..dim {
        let mut pt = start.to_vec();
        pt[i] += step;
        sx.points.push(pt);
    }
    sx.values = sx.points.iter().map(|pt| f(pt)).collect();

    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| sx.values[a].partial_cmp(&sx.values[b]).unwrap());
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];
        if (sx.values[worst] - sx.values[best]).abs()
            <= 1e-13 * sx.values[best].abs().max(1.0)
        {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for &i in order.iter().take(dim) {
            for (c, x) in centroid.iter_mut().zip(&sx.points[i]) {
                *c += x / dim as f64;
            }
        }
        let shifted = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&sx.points[worst])
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let reflected = shifted(ALPHA);
        let fr = f(&reflected);
        if fr < sx.values[best] {
            let expanded = shifted(GAMMA);
            let fe = f(&expanded);
            if fe < fr {
                sx.points[worst] = expanded;
                sx.values[worst] = fe;
            } else {
                sx.points[worst] = reflected;
                sx.values[worst] = fr;
            }
        } else if fr < sx.values[second_worst] {
            sx.points[worst] = reflected;
            sx.values[worst] = fr;
        } else {
            let contracted = shifted(-RHO);
            let fc = f(&contracted);
            if fc < sx.values[worst] {
                sx.points[worst] = contracted;
                sx.values[worst] = fc;
            } else {
                let best_pt = sx.points[best].clone();
                for i in 0..=dim {
                    if i == best {
                        continue;
                    }
                    let pt: Vec<f64> = best_pt
                        .iter()
                        .zip(&sx.points[i])
                        .map(|(b, x)| b + SIGMA * (x - b))
                        .collect();
                    sx.values[i] = f(&pt);
                    sx.points[i] = pt;
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=dim {
        if sx.values[i] < sx.values[best] {
            best = i;
        }
    }
    (sx.points[best].clone(), sx.values[best])
}

/// Derivative-free maximizer of the penalized objective with restarts:
/// one start at diag(S), the rest seeded random perturbations of it.
/// Returns the best (Sigma, objective) found.
pub fn nelder_mead_oracle(
    s: &SymMatrix,
    pen: &PenaltyPair,
    restarts: usize,
    seed: u64,
) -> (SymMatrix, f64) {
    let p = s.dim();
    let mut rng = SplitMix64::new(seed);
    let base = theta_from_diag(s);
    let mut best_sigma = theta_to_sigma(&base, p);
    let mut best_val = f64::NEG_INFINITY;
    for restart in 0..restarts {
        let start: Vec<f64> = if restart == 0 {
            base.clone()
        } else {
            base.iter()
                .map(|t| t + (rng.next_f64() - 0.5) * 1.0)
                .collect()
        };
        let neg = |theta: &[f64]| -> f64 {
            let sigma = theta_to_sigma(theta, p);
            -objective(s, &sigma, pen)
        };
        let (theta, val) = nelder_mead_minimize(neg, &start, 0.25, 4000);
        // Polish: a second pass from the found point with a smaller step.
        let (theta, val2) = nelder_mead_minimize(neg, &theta, 0.02, 4000);
        let found = (-val).max(-val2);
        if found > best_val {
            best_val = found;
            best_sigma = theta_to_sigma(&theta, p);
        }
    }
    (best_sigma, best_val)
}

// ---------------------------------------------------------------------
// Finite-difference stationarity checks.
// ---------------------------------------------------------------------

/// Smooth part of the objective: loglik(S, Sigma) - kappa * tr(Sigma^-1).
pub fn smooth_objective(s: &SymMatrix, sigma: &SymMatrix, kappa: f64) -> f64 {
    let ll = model::loglik(s, sigma).expect("PD iterate");
    let ridge = if kappa > 0.0 {
        let inv = linalg::inverse(sigma).expect("PD iterate");
        kappa * (0..sigma.dim()).map(|j| inv.get(j, j)).sum::<f64>()
    } else {
        0.0
    };
    ll - ridge
}

/// Central finite-difference derivative of the smooth part along the
/// move that perturbs sigma_jk (and sigma_kj, when j != k) together.
pub fn fd_smooth_derivative(
    s: &SymMatrix,
    sigma: &SymMatrix,
    kappa: f64,
    j: usize,
    k: usize,
    h: f64,
) -> f64 {
    let mut up = sigma.clone();
    up.set(j, k, sigma.get(j, k) + h);
    let mut down = sigma.clone();
    down.set(j, k, sigma.get(j, k) - h);
    (smooth_objective(s, &up, kappa) - smooth_objective(s, &down, kappa)) / (2.0 * h)
}

/// Largest violation of the subgradient stationarity conditions over all
/// free entries of a fitted matrix. For the symmetric two-entry move the
/// smooth derivative g must vanish on the diagonal, satisfy
/// g = 2 lambda sign(sigma_jk) at nonzero off-diagonal entries, and stay
/// within [-2 lambda, 2 lambda] at zero ones.
pub struct StationarityReport {
    pub max_diag_violation: f64,
    pub max_nonzero_violation: f64,
    pub max_zero_excess_single: f64,
    pub max_zero_excess_double: f64,
}

pub fn stationarity_report(
    s: &SymMatrix,
    fit: &FitResult,
    graph: &SparsityGraph,
    pen: &PenaltyPair,
) -> StationarityReport {
    let sigma = &fit.sigma_hat;
    let p = sigma.dim();
    let s_kappa = model::ridge_augment(s, pen.kappa()).expect("kappa validated");
    let h = 1e-5 * s_kappa.mean_diag();
    let lambda = pen.lambda();
    let mut rep = StationarityReport {
        max_diag_violation: 0.0,
        max_nonzero_violation: 0.0,
        max_zero_excess_single: 0.0,
        max_zero_excess_double: 0.0,
    };
    for j in 0..p {
        let g = fd_smooth_derivative(s, sigma, pen.kappa(), j, j, h);
        rep.max_diag_violation = rep.max_diag_violation.max(g.abs());
        for k in (j + 1)..p {
            if !graph.has_edge(j, k) {
                continue;
            }
            let g = fd_smooth_derivative(s, sigma, pen.kappa(), j, k, h);
            let value = sigma.get(j, k);
            if value != 0.0 {
                let target = 2.0 * lambda * value.signum();
                let viol = (g - target).abs() / g.abs().max(1.0);
                rep.max_nonzero_violation = rep.max_nonzero_violation.max(viol);
            } else {
                rep.max_zero_excess_single =
                    rep.max_zero_excess_single.max(g.abs() - lambda);
                rep.max_zero_excess_double =
                    rep.max_zero_excess_double.max(g.abs() - 2.0 * lambda);
            }
        }
    }
    rep
}
