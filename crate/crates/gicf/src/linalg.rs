//! Dense symmetric linear algebra for the covariance solver.
//!
//! Written for the p <= a-few-hundred regime the estimator targets:
//! straightforward O(p^3) kernels, dense storage, no external BLAS.
//! Every routine is deterministic, so repeated runs are bit-identical.

use crate::error::{Error, Result};

/// Cholesky pivots below `CHOL_PIVOT_REL_TOL * max(diag)` mean "not PD".
const CHOL_PIVOT_REL_TOL: f64 = 1e-12;
/// Jacobi sweeps stop once the off-diagonal Frobenius mass drops below
/// `JACOBI_REL_TOL * ||A||_F`. The Frobenius norm is rotation-invariant,
/// so it is computed once up front.
const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense rectangular matrix, row-major. Zero-row matrices are legal (they
/// show up as degenerate submatrix selections).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    got: row.len(),
                });
            }
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Symmetric p x p matrix with *structural* symmetry: writing entry (j, k)
/// writes (k, j) as well, so no code path can ever produce an asymmetric
/// state. Full row-major storage; p >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    p: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(p: usize) -> Self {
        assert!(p >= 1, "SymMatrix dimension must be at least 1");
        SymMatrix {
            p,
            data: vec![0.0; p * p],
        }
    }

    pub fn identity(p: usize) -> Self {
        let mut m = SymMatrix::zeros(p);
        for i in 0..p {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = SymMatrix::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds from explicit rows, which must be square and symmetric within
    /// `1e-8 * max(1, max-abs entry)`. The upper-triangle value wins, so the
    /// result is exactly symmetric even when the input only almost is.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if p == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
        }
        let scale = rows
            .iter()
            .flatten()
            .fold(1.0_f64, |acc, &v| acc.max(v.abs()));
        let mut dev = 0.0_f64;
        for j in 0..p {
            for k in j + 1..p {
                dev = dev.max((rows[j][k] - rows[k][j]).abs());
            }
        }
        if !(dev <= 1e-8 * scale) {
            return Err(Error::NotSymmetric { max_deviation: dev });
        }
        let mut m = SymMatrix::zeros(p);
        for j in 0..p {
            for k in j..p {
                m.set(j, k, rows[j][k]);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        debug_assert!(j < self.p && k < self.p);
        self.data[j * self.p + k]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, v: f64) {
        debug_assert!(j < self.p && k < self.p);
        self.data[j * self.p + k] = v;
        self.data[k * self.p + j] = v;
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.p).map(|i| self.get(i, i)).collect()
    }

    pub fn mean_diag(&self) -> f64 {
        self.diag().iter().sum::<f64>() / self.p as f64
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.p, other.p);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Bitwise equality, distinguishing 0.0 from -0.0 and NaN payloads.
    pub fn bits_eq(&self, other: &SymMatrix) -> bool {
        self.p == other.p
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Strictly increasing index subset of {0, .., p-1}. Construction sorts and
/// deduplicates, so the ordering invariant holds by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        IndexSet(indices)
    }

    /// Complement within {0, .., p-1}. Indices >= p must not be present.
    pub fn complement(&self, p: usize) -> IndexSet {
        debug_assert!(self.0.iter().all(|&i| i < p));
        let mut out = Vec::with_capacity(p - self.0.len());
        let mut it = self.0.iter().peekable();
        for i in 0..p {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        IndexSet(out)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }
}

/// Lower-triangular Cholesky factor L with A = L L^T. Fails with
/// `NotPositiveDefinite` when a pivot falls to `1e-12 * max(diag(A))` or
/// below (NaN pivots fail the same way).
pub fn cholesky(a: &SymMatrix) -> Result<Matrix> {
    let p = a.dim();
    let max_diag = (0..p).map(|i| a.get(i, i)).fold(f64::NEG_INFINITY, f64::max);
    let tol = CHOL_PIVOT_REL_TOL * max_diag.max(0.0);
    let mut l = Matrix::zeros(p, p);
    for j in 0..p {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > tol) {
            return Err(Error::NotPositiveDefinite);
        }
        let ljj = d.sqrt();
        l.set(j, j, ljj);
        for i in j + 1..p {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}

/// Solves L L^T x = b given the lower factor L.
pub fn chol_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let p = l.rows();
    debug_assert_eq!(b.len(), p);
    let mut x = b.to_vec();
    for i in 0..p {
        let mut v = x[i];
        for k in 0..i {
            v -= l.get(i, k) * x[k];
        }
        x[i] = v / l.get(i, i);
    }
    for i in (0..p).rev() {
        let mut v = x[i];
        for k in i + 1..p {
            v -= l.get(k, i) * x[k];
        }
        x[i] = v / l.get(i, i);
    }
    x
}

/// log |A| via Cholesky: 2 * sum(log L_ii).
pub fn log_det(a: &SymMatrix) -> Result<f64> {
    let l = cholesky(a)?;
    Ok(2.0 * (0..a.dim()).map(|i| l.get(i, i).ln()).sum::<f64>())
}

/// A^-1 via Cholesky solves against the identity columns. The lower triangle
/// of each solution column is stored through the symmetric writer, so the
/// output is exactly symmetric.
pub fn inverse(a: &SymMatrix) -> Result<SymMatrix> {
    let p = a.dim();
    let l = cholesky(a)?;
    let mut inv = SymMatrix::zeros(p);
    let mut e = vec![0.0; p];
    for j in 0..p {
        e[j] = 1.0;
        let x = chol_solve(&l, &e);
        e[j] = 0.0;
        for i in j..p {
            inv.set(i, j, x[i]);
        }
    }
    Ok(inv)
}

/// Rectangular selection A[rows, cols]. Empty selections are fine and give
/// a matrix with zero rows (or columns).
pub fn submatrix(a: &SymMatrix, rows: &IndexSet, cols: &IndexSet) -> Matrix {
    let mut m = Matrix::zeros(rows.len(), cols.len());
    for (ri, &r) in rows.iter().enumerate() {
        for (ci, &c) in cols.iter().enumerate() {
            m.set(ri, ci, a.get(r, c));
        }
    }
    m
}

/// Principal submatrix A[keep, keep], staying in symmetric form.
pub fn principal_submatrix(a: &SymMatrix, keep: &IndexSet) -> SymMatrix {
    assert!(!keep.is_empty(), "principal submatrix needs at least one index");
    let mut m = SymMatrix::zeros(keep.len());
    for (ri, &r) in keep.iter().enumerate() {
        for (ci, &c) in keep.iter().enumerate().skip(ri) {
            m.set(ri, ci, a.get(r, c));
        }
    }
    m
}

/// Eigenvalues of a symmetric matrix (any signature), ascending, by cyclic
/// Jacobi rotations. Convergence is quadratic; the sweep cap is far above
/// anything reachable at the supported sizes.
pub fn sym_eigenvalues(a: &SymMatrix) -> Vec<f64> {
    let p = a.dim();
    let mut m = a.clone();
    let norm: f64 = (0..p)
        .flat_map(|j| (0..p).map(move |k| (j, k)))
        .map(|(j, k)| m.get(j, k) * m.get(j, k))
        .sum::<f64>()
        .sqrt();
    if norm > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..p)
                .flat_map(|j| (j + 1..p).map(move |k| (j, k)))
                .map(|(j, k)| 2.0 * m.get(j, k) * m.get(j, k))
                .sum::<f64>()
                .sqrt();
            if off < JACOBI_REL_TOL * norm {
                break;
            }
            for jp in 0..p {
                for jq in jp + 1..p {
                    rotate(&mut m, jp, jq);
                }
            }
        }
    }
    let mut eigs = m.diag();
    eigs.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    eigs
}

/// One Jacobi rotation zeroing m[p][q], in the rounding-stable form with
/// tau = s / (1 + c).
fn rotate(m: &mut SymMatrix, p: usize, q: usize) {
    let apq = m.get(p, q);
    if apq == 0.0 {
        return;
    }
    let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
    let t = if theta.abs() > 1e100 {
        // Guard against theta^2 overflow; the rotation is then negligible.
        0.5 / theta
    } else if theta >= 0.0 {
        1.0 / (theta + (1.0 + theta * theta).sqrt())
    } else {
        1.0 / (theta - (1.0 + theta * theta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);
    let app = m.get(p, p);
    let aqq = m.get(q, q);
    m.set(p, p, app - t * apq);
    m.set(q, q, aqq + t * apq);
    m.set(p, q, 0.0);
    let dim = m.dim();
    for r in 0..dim {
        if r == p || r == q {
            continue;
        }
        let g = m.get(r, p);
        let h = m.get(r, q);
        m.set(r, p, g - s * (h + tau * g));
        m.set(r, q, h + s * (g - tau * h));
    }
}

/// Spectral condition number lambda_max / lambda_min of a positive definite
/// matrix; non-positive spectrum reports `NotPositiveDefinite`.
pub fn condition_number(a: &SymMatrix) -> Result<f64> {
    let eigs = sym_eigenvalues(a);
    let min = eigs[0];
    let max = eigs[eigs.len() - 1];
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(max / min)
}
