//! Data model for the penalized Gaussian likelihood.
//!
//! The estimator works on the scaled sums-of-squares matrix S = (1/n) Y'Y
//! and the (unnormalized) profile log-likelihood
//!
//! ```text
//! loglik(S, Sigma) = -log|Sigma| - tr(Sigma^-1 S)
//! ```
//!
//! penalized by P(Sigma) = lambda * sum_{j!=k} |sigma_jk| + kappa * sum_j
//! theta_jj with Theta = Sigma^-1. Adding the ridge term is equivalent to
//! replacing S by S + kappa I, which is how the solver consumes it; see
//! `ridge_augment`.

use crate::error::{Error, Result};
use crate::linalg::{self, IndexSet, SymMatrix};

/// n x p observation matrix, rows are samples. Entries must be finite.
#[derive(Debug, Clone)]
pub struct DataSet {
    n: usize,
    p: usize,
    data: Vec<f64>, // row-major
    centered: bool,
}

impl DataSet {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if n == 0 || p == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        for row in &rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    context: "data matrix",
                });
            }
        }
        Ok(DataSet {
            n,
            p,
            data: rows.concat(),
            centered: false,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.n && j < self.p);
        self.data[i * self.p + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.p];
        for i in 0..self.n {
            for (m, v) in means.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= self.n as f64;
        }
        means
    }

    /// Subtracts column means. Constant columns are detected and mapped to
    /// exact zeros (the accumulated mean of a constant column can be off by
    /// an ulp, which would leak a spurious nonzero).
    pub fn center_columns(&self) -> DataSet {
        let means = self.column_means();
        let mut shift = means;
        for j in 0..self.p {
            let first = self.value(0, j);
            if (0..self.n).all(|i| self.value(i, j) == first) {
                shift[j] = first;
            }
        }
        let mut out = self.clone();
        for i in 0..self.n {
            for j in 0..self.p {
                out.data[i * self.p + j] = self.value(i, j) - shift[j];
            }
        }
        out.centered = true;
        out
    }

    /// Shifts every row by `-offset` (used to apply training-split means to
    /// held-out rows without re-estimating them).
    pub fn subtract_offsets(&self, offset: &[f64]) -> Result<DataSet> {
        if offset.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: offset.len(),
            });
        }
        let mut out = self.clone();
        for i in 0..self.n {
            for j in 0..self.p {
                out.data[i * self.p + j] = self.value(i, j) - offset[j];
            }
        }
        out.centered = false;
        Ok(out)
    }

    /// Row subset in the given order. The centered flag does not survive:
    /// a subset of centered data generally has nonzero column means.
    pub fn rows_subset(&self, indices: &[usize]) -> Result<DataSet> {
        if indices.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        let mut data = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            if i >= self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    got: i,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(DataSet {
            n: indices.len(),
            p: self.p,
            data,
            centered: false,
        })
    }
}

/// Undirected sparsity graph on p vertices: an edge {j, k} marks a
/// covariance entry that is allowed to be nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityGraph {
    p: usize,
    adj: Vec<bool>, // p x p, symmetric, false diagonal
}

impl SparsityGraph {
    pub fn empty(p: usize) -> Self {
        assert!(p >= 1, "graph needs at least one vertex");
        SparsityGraph {
            p,
            adj: vec![false; p * p],
        }
    }

    pub fn complete(p: usize) -> Self {
        let mut g = SparsityGraph::empty(p);
        for j in 0..p {
            for k in 0..p {
                if j != k {
                    g.adj[j * p + k] = true;
                }
            }
        }
        g
    }

    /// Edges {j, k} with |j - k| <= b.
    pub fn banded(p: usize, b: usize) -> Self {
        let mut g = SparsityGraph::empty(p);
        for j in 0..p {
            for k in j + 1..p.min(j + b + 1) {
                g.add_edge_unchecked(j, k);
            }
        }
        g
    }

    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = SparsityGraph::empty(p);
        for &(j, k) in edges {
            if j == k || j >= p || k >= p {
                return Err(Error::BadEdge { j, k, p });
            }
            g.add_edge_unchecked(j, k);
        }
        Ok(g)
    }

    fn add_edge_unchecked(&mut self, j: usize, k: usize) {
        self.adj[j * self.p + k] = true;
        self.adj[k * self.p + j] = true;
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn has_edge(&self, j: usize, k: usize) -> bool {
        j != k && self.adj[j * self.p + k]
    }

    /// Neighbours of vertex i, ascending.
    pub fn boundary(&self, i: usize) -> IndexSet {
        IndexSet::new((0..self.p).filter(|&j| self.has_edge(i, j)).collect())
    }

    /// Edges as (j, k) with j < k, lexicographic.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.p {
            for k in j + 1..self.p {
                if self.has_edge(j, k) {
                    out.push((j, k));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    /// Fraction of the p(p-1)/2 possible edges present; 0 for p = 1.
    pub fn density(&self) -> f64 {
        if self.p < 2 {
            return 0.0;
        }
        self.edge_count() as f64 / (self.p * (self.p - 1) / 2) as f64
    }

    /// True when every non-edge entry of `sigma` is zero within `tol`.
    pub fn is_adapted(&self, sigma: &SymMatrix, tol: f64) -> bool {
        if sigma.dim() != self.p {
            return false;
        }
        for j in 0..self.p {
            for k in j + 1..self.p {
                if !self.has_edge(j, k) && sigma.get(j, k).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// Validated penalty weights: lambda scales the off-diagonal l1 term,
/// kappa the inverse-diagonal ridge term. Both nonnegative and finite.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "RawPenaltyPair", into = "RawPenaltyPair")]
pub struct PenaltyPair {
    lambda: f64,
    kappa: f64,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct RawPenaltyPair {
    lambda: f64,
    kappa: f64,
}

impl From<PenaltyPair> for RawPenaltyPair {
    fn from(p: PenaltyPair) -> Self {
        RawPenaltyPair {
            lambda: p.lambda,
            kappa: p.kappa,
        }
    }
}

impl TryFrom<RawPenaltyPair> for PenaltyPair {
    type Error = Error;
    fn try_from(raw: RawPenaltyPair) -> Result<Self> {
        PenaltyPair::new(raw.lambda, raw.kappa)
    }
}

impl PenaltyPair {
    pub fn new(lambda: f64, kappa: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::OutOfRange {
                what: "lambda",
                value: lambda,
            });
        }
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::OutOfRange {
                what: "kappa",
                value: kappa,
            });
        }
        Ok(PenaltyPair { lambda, kappa })
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// S = (1/n) Y'Y, accumulated entrywise over samples (the n x n Gram matrix
/// is never formed).
pub fn sums_of_squares(y: &DataSet) -> SymMatrix {
    let (n, p) = (y.n(), y.p());
    let mut s = SymMatrix::zeros(p);
    for j in 0..p {
        for k in j..p {
            let mut acc = 0.0;
            for i in 0..n {
                acc += y.value(i, j) * y.value(i, k);
            }
            s.set(j, k, acc / n as f64);
        }
    }
    s
}

/// S + kappa I. kappa = 0 returns S bit-identically.
pub fn ridge_augment(s: &SymMatrix, kappa: f64) -> Result<SymMatrix> {
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(Error::OutOfRange {
            what: "kappa",
            value: kappa,
        });
    }
    let mut out = s.clone();
    if kappa > 0.0 {
        for i in 0..s.dim() {
            out.set(i, i, s.get(i, i) + kappa);
        }
    }
    Ok(out)
}

/// -log|Sigma| - tr(Sigma^-1 S). S only needs to be symmetric; Sigma must
/// be positive definite.
pub fn loglik(s: &SymMatrix, sigma: &SymMatrix) -> Result<f64> {
    let p = sigma.dim();
    if s.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: s.dim(),
        });
    }
    let l = linalg::cholesky(sigma)?;
    let log_det = 2.0 * (0..p).map(|i| l.get(i, i).ln()).sum::<f64>();
    let mut trace = 0.0;
    let mut col = vec![0.0; p];
    for j in 0..p {
        for (i, c) in col.iter_mut().enumerate() {
            *c = s.get(i, j);
        }
        trace += linalg::chol_solve(&l, &col)[j];
    }
    Ok(-log_det - trace)
}

/// lambda * sum_{j != k} |sigma_jk| + kappa * tr(Sigma^-1). The inverse is
/// only touched when kappa > 0.
pub fn penalty_value(sigma: &SymMatrix, pen: &PenaltyPair) -> Result<f64> {
    let p = sigma.dim();
    let mut l1 = 0.0;
    for j in 0..p {
        for k in j + 1..p {
            l1 += 2.0 * sigma.get(j, k).abs();
        }
    }
    let mut ridge = 0.0;
    if pen.kappa() > 0.0 {
        let l = linalg::cholesky(sigma)?;
        let mut e = vec![0.0; p];
        for j in 0..p {
            e[j] = 1.0;
            ridge += linalg::chol_solve(&l, &e)[j];
            e[j] = 0.0;
        }
    }
    Ok(pen.lambda() * l1 + pen.kappa() * ridge)
}
