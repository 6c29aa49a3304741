//! Synthetic banded covariance models and Gaussian sampling.
//!
//! A banded model is Sigma = B + c I where B has unit diagonal, entries
//! +/-1 (fair coin) inside the band and zeros outside, and c > 0 is chosen
//! by bisection so that cond(Sigma) equals p. With bandwidth 0 the matrix
//! is the identity and no conditioning target applies.

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::model::SparsityGraph;
use crate::rng::{NormalStream, SplitMix64};

const BISECTION_TOL: f64 = 1e-9;

/// Band specification: an explicit half-bandwidth, or a target edge
/// density resolved to the half-bandwidth whose banded graph comes
/// closest (ties to the narrower band).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Bands(usize),
    TargetDensity(f64),
}

/// A generated banded covariance with its sparsity pattern.
#[derive(Debug, Clone)]
pub struct BandedSigma {
    pub sigma: SymMatrix,
    pub graph: SparsityGraph,
    /// Resolved half-bandwidth.
    pub band: usize,
    /// The shift c actually applied to the unit diagonal.
    pub diagonal_shift: f64,
    /// False when the band is empty (identity) and cond = 1 != p.
    pub cond_target_reached: bool,
}

/// Edge density of a banded graph on p vertices with half-bandwidth b.
fn banded_density(p: usize, b: usize) -> f64 {
    if p < 2 {
        return 0.0;
    }
    let edges: usize = (1..=b.min(p - 1)).map(|k| p - k).sum();
    edges as f64 / (p * (p - 1) / 2) as f64
}

fn resolve_band(p: usize, bw: Bandwidth) -> Result<usize> {
    match bw {
        Bandwidth::Bands(b) => {
            if b >= p {
                return Err(Error::OutOfRange {
                    what: "half-bandwidth",
                    value: b as f64,
                });
            }
            Ok(b)
        }
        Bandwidth::TargetDensity(d) => {
            if !(0.0..=1.0).contains(&d) || !d.is_finite() {
                return Err(Error::OutOfRange {
                    what: "target density",
                    value: d,
                });
            }
            let max_b = p.saturating_sub(1);
            let mut best = 0usize;
            let mut best_err = f64::INFINITY;
            for b in 0..=max_b {
                let err = (banded_density(p, b) - d).abs();
                if err < best_err {
                    best = b;
                    best_err = err;
                }
            }
            Ok(best)
        }
    }
}

/// Builds Sigma = B + c I with a seeded +/-1 coin for the in-band entries
/// (row-major over j < k) and c bisected so cond(Sigma) = p.
pub fn make_banded_sigma(p: usize, bw: Bandwidth, seed: u64) -> Result<BandedSigma> {
    if p == 0 {
        return Err(Error::OutOfRange {
            what: "dimension",
            value: 0.0,
        });
    }
    let band = resolve_band(p, bw)?;
    let graph = SparsityGraph::banded(p, band);

    let mut b_mat = SymMatrix::identity(p);
    let mut rng = SplitMix64::new(seed);
    for j in 0..p {
        for k in (j + 1)..p {
            if k - j <= band {
                b_mat.set(j, k, rng.next_sign());
            }
        }
    }

    if band == 0 || p == 1 {
        return Ok(BandedSigma {
            sigma: b_mat,
            graph,
            band,
            diagonal_shift: 0.0,
            cond_target_reached: p == 1,
        });
    }

    let eigs = linalg::sym_eigenvalues(&b_mat);
    let (lambda_min, lambda_max) = (eigs[0], eigs[p - 1]);
    let target = p as f64;

    // cond(B + cI) = (lambda_max + c)/(lambda_min + c) decreases strictly
    // from +inf (at c just above -lambda_min) to 1, so a root exists and
    // bisection cannot stall.
    let mut lo = (-lambda_min).max(0.0) + 1e-9;
    let mut hi = lo.max(1.0);
    while (lambda_max + hi) / (lambda_min + hi) > target {
        hi *= 2.0;
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if (lambda_max + mid) / (lambda_min + mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);

    let mut sigma = b_mat;
    for j in 0..p {
        sigma.set(j, j, sigma.get(j, j) + c);
    }
    Ok(BandedSigma {
        sigma,
        graph,
        band,
        diagonal_shift: c,
        cond_target_reached: true,
    })
}

/// Draws n rows from N(0, sigma) as L z with L the Cholesky factor and z
/// standard normal from a seeded stream.
pub fn sample_gaussian(sigma: &SymMatrix, n: usize, seed: u64) -> Result<crate::model::DataSet> {
    if n == 0 {
        return Err(Error::OutOfRange {
            what: "sample size",
            value: 0.0,
        });
    }
    let p = sigma.dim();
    let l = linalg::cholesky(sigma)?;
    let mut stream = NormalStream::new(seed);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..p).map(|_| stream.next()).collect();
        let mut row = vec![0.0; p];
        for i in 0..p {
            let mut acc = 0.0;
            for (k, zk) in z.iter().enumerate().take(i + 1) {
                acc += l.get(i, k) * zk;
            }
            row[i] = acc;
        }
        rows.push(row);
    }
    crate::model::DataSet::from_rows(rows)
}
