//! Penalty boundaries and the two-dimensional search grid.
//!
//! Two closed-form thresholds delimit the useful penalty region:
//!
//! * `lambda_max(S, G, kappa)` = max over edges {j,k} of
//!   |s_jk| / ((s_jj + kappa)(s_kk + kappa)). At or above it the solver's
//!   fully-shrunk diagonal start is already stationary, so the fit returns
//!   diag(S + kappa I) unchanged.
//! * `kappa_max(S, G, lambda)` inverts the same boundary in kappa: the
//!   largest root of lambda_max(kappa) = lambda, obtained per edge from
//!   the quadratic (s_jj + kappa)(s_kk + kappa) = |s_jk| / lambda, i.e.
//!   kappa_jk = sqrt((s_jj + s_kk)^2 / 4 + g_jk) - (s_jj + s_kk)/2 with
//!   g_jk = |s_jk| / lambda - s_jj s_kk, maximized over edges with
//!   g_jk >= 0.
//!
//! The two are mutually inverse: lambda_max(kappa_max(lambda)) = lambda for
//! every 0 < lambda <= lambda_max(0).

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::{PenaltyPair, SparsityGraph};

/// Relative slack when testing g_jk >= 0: at lambda == lambda_max(0) the
/// boundary edge's g is an exact zero in real arithmetic but may round to
/// a few ulps below it.
const CANDIDATE_REL_SLACK: f64 = 1e-12;

fn check_dims(s: &SymMatrix, g: &SparsityGraph) -> Result<()> {
    if s.dim() != g.p() {
        return Err(Error::DimensionMismatch {
            expected: g.p(),
            got: s.dim(),
        });
    }
    Ok(())
}

/// Smallest lambda at which the penalized fit collapses to the ridged
/// diagonal. Zero for an edgeless graph.
pub fn lambda_max(s: &SymMatrix, g: &SparsityGraph, kappa: f64) -> Result<f64> {
    check_dims(s, g)?;
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(Error::OutOfRange {
            what: "kappa",
            value: kappa,
        });
    }
    let mut best = 0.0_f64;
    for (j, k) in g.edges() {
        let dj = s.get(j, j) + kappa;
        let dk = s.get(k, k) + kappa;
        if dj <= 0.0 {
            return Err(Error::DegenerateDiagonal { index: j });
        }
        if dk <= 0.0 {
            return Err(Error::DegenerateDiagonal { index: k });
        }
        best = best.max(s.get(j, k).abs() / (dj * dk));
    }
    Ok(best)
}

/// Largest kappa at which `lambda` still lies on or below the collapse
/// boundary. Requires 0 < lambda <= lambda_max(S, G, 0).
pub fn kappa_max(s: &SymMatrix, g: &SparsityGraph, lambda: f64) -> Result<f64> {
    check_dims(s, g)?;
    let lmax0 = lambda_max(s, g, 0.0)?;
    if !lambda.is_finite() || lambda <= 0.0 || lambda > lmax0 {
        return Err(Error::OutOfRange {
            what: "lambda",
            value: lambda,
        });
    }
    let mut best = 0.0_f64;
    for (j, k) in g.edges() {
        let ratio = s.get(j, k).abs() / lambda;
        let prod = s.get(j, j) * s.get(k, k);
        let g_jk = ratio - prod;
        if g_jk < -CANDIDATE_REL_SLACK * (ratio + prod.abs()) {
            continue;
        }
        let half_sum = 0.5 * (s.get(j, j) + s.get(k, k));
        let disc = (half_sum * half_sum + g_jk).max(0.0);
        best = best.max(disc.sqrt() - half_sum);
    }
    Ok(best.max(0.0))
}

/// Penalty search grid: lambda levels ascending, each carrying an ascending
/// kappa ladder; `points` is the flattened (lambda-major) sequence with
/// exact duplicates removed.
#[derive(Debug, Clone)]
pub struct PenaltyGrid {
    pub points: Vec<PenaltyPair>,
    pub lambda_levels: Vec<f64>,
    /// kappa ceiling per lambda level (what the ladder was spaced against).
    pub kappa_ceilings: Vec<f64>,
    /// Set when lambda_max(0) = 0 left nothing to search; the grid is then
    /// the single unpenalized pair (0, 0).
    pub degenerate: bool,
}

fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    let mut out: Vec<f64> = (0..count)
        .map(|i| a + (b - a) * (i as f64 / (count - 1) as f64))
        .collect();
    out[count - 1] = b; // exact endpoint
    out
}

/// Builds the (lambda, kappa) grid from the data moments.
///
/// r lambda levels are equally spaced on [0, lambda_max(0)] — including 0
/// itself only when `include_lambda_zero` — and level i gets
/// s_i = floor(s1 * kappa_max(lambda_i) / kappa_max(lambda_1)) + 1 kappa
/// values (s_1 = s1) equally spaced on [0, kappa_max(lambda_i)]. A leading
/// lambda = 0 level has no finite kappa boundary of its own; its ladder is
/// spaced against kappa_max(lambda_2 / 2).
pub fn build_grid(
    s: &SymMatrix,
    g: &SparsityGraph,
    r: usize,
    s1: usize,
    include_lambda_zero: bool,
) -> Result<PenaltyGrid> {
    if r == 0 || (include_lambda_zero && r < 2) {
        return Err(Error::OutOfRange {
            what: "lambda level count",
            value: r as f64,
        });
    }
    if s1 == 0 {
        return Err(Error::OutOfRange {
            what: "kappa count",
            value: 0.0,
        });
    }
    let lmax0 = lambda_max(s, g, 0.0)?;
    if lmax0 == 0.0 {
        return Ok(PenaltyGrid {
            points: vec![PenaltyPair::new(0.0, 0.0)?],
            lambda_levels: vec![0.0],
            kappa_ceilings: vec![0.0],
            degenerate: true,
        });
    }

    let lambdas: Vec<f64> = if include_lambda_zero {
        linspace(0.0, lmax0, r)
    } else {
        (1..=r).map(|i| lmax0 * (i as f64 / r as f64)).collect()
    };

    // The kappa budget of every level is proportional to its boundary,
    // normalized by the first level's (with the lambda' = lambda_2/2
    // stand-in when the first level is 0).
    let base_lambda = if lambdas[0] == 0.0 {
        lambdas[1] / 2.0
    } else {
        lambdas[0]
    };
    let base_ceiling = kappa_max(s, g, base_lambda)?;

    let mut points = Vec::new();
    let mut ceilings = Vec::with_capacity(r);
    for (idx, &lambda) in lambdas.iter().enumerate() {
        let (count, ceiling) = if idx == 0 {
            (s1, base_ceiling)
        } else {
            let ceiling = kappa_max(s, g, lambda)?;
            let count = if base_ceiling > 0.0 {
                (s1 as f64 * ceiling / base_ceiling).floor() as usize + 1
            } else {
                1
            };
            (count, ceiling)
        };
        ceilings.push(ceiling);
        for kappa in linspace(0.0, ceiling, count) {
            let pair = PenaltyPair::new(lambda, kappa)?;
            if !points.contains(&pair) {
                points.push(pair);
            }
        }
    }

    Ok(PenaltyGrid {
        points,
        lambda_levels: lambdas,
        kappa_ceilings: ceilings,
        degenerate: false,
    })
}

/// A pure ridge path: lambda pinned to 0, kappa equally spaced on
/// [0, ceiling]. The lambda = 0 line has no data-driven kappa boundary, so
/// the ceiling is the caller's to choose.
pub fn ridge_path(ceiling: f64, count: usize) -> Result<PenaltyGrid> {
    if !ceiling.is_finite() || ceiling <= 0.0 {
        return Err(Error::OutOfRange {
            what: "kappa ceiling",
            value: ceiling,
        });
    }
    if count == 0 {
        return Err(Error::OutOfRange {
            what: "kappa count",
            value: 0.0,
        });
    }
    let points = linspace(0.0, ceiling, count)
        .into_iter()
        .map(|kappa| PenaltyPair::new(0.0, kappa))
        .collect::<Result<Vec<_>>>()?;
    Ok(PenaltyGrid {
        points,
        lambda_levels: vec![0.0],
        kappa_ceilings: vec![ceiling],
        degenerate: false,
    })
}

impl PenaltyGrid {
    /// Rebuilds a grid from bare points (e.g. read back from a file).
    /// Levels are the distinct lambdas in order of appearance; ceilings are
    /// the largest kappa seen per level.
    pub fn from_points(points: Vec<PenaltyPair>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::OutOfRange {
                what: "grid size",
                value: 0.0,
            });
        }
        let mut lambda_levels: Vec<f64> = Vec::new();
        let mut kappa_ceilings: Vec<f64> = Vec::new();
        for p in &points {
            match lambda_levels.iter().position(|&l| l == p.lambda()) {
                Some(i) => kappa_ceilings[i] = kappa_ceilings[i].max(p.kappa()),
                None => {
                    lambda_levels.push(p.lambda());
                    kappa_ceilings.push(p.kappa());
                }
            }
        }
        Ok(PenaltyGrid {
            points,
            lambda_levels,
            kappa_ceilings,
            degenerate: false,
        })
    }
}
