//! Estimator quality metrics and quadratic discriminant analysis built on
//! fitted covariance models.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SymMatrix};
use crate::model::{self, DataSet, PenaltyPair, SparsityGraph};
use crate::solver::{self, GicfConfig};

/// Frobenius-norm error scaled by the number of entries:
/// ||est - truth||_F / p^2.
pub fn rmse(est: &SymMatrix, truth: &SymMatrix) -> Result<f64> {
    let p = est.dim();
    if truth.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: truth.dim(),
        });
    }
    let mut sq = 0.0;
    for j in 0..p {
        for k in 0..p {
            let d = est.get(j, k) - truth.get(j, k);
            sq += d * d;
        }
    }
    Ok(sq.sqrt() / (p * p) as f64)
}

/// Gaussian entropy loss tr(est truth^-1) + log det(truth) - log det(est).
/// Equals p when est == truth and is invariant to a common congruence by
/// any invertible matrix.
pub fn entropy_loss(est: &SymMatrix, truth: &SymMatrix) -> Result<f64> {
    let p = est.dim();
    if truth.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: truth.dim(),
        });
    }
    let truth_inv = linalg::inverse(truth)?;
    let mut trace = 0.0;
    for j in 0..p {
        for k in 0..p {
            trace += est.get(j, k) * truth_inv.get(k, j);
        }
    }
    Ok(trace + linalg::log_det(truth)? - linalg::log_det(est)?)
}

/// Support-recovery counts over unordered off-diagonal pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeConfusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl EdgeConfusion {
    fn rate(num: usize, den: usize) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    /// Sensitivity: recovered edges over true edges (0 when edgeless).
    pub fn tpr(&self) -> f64 {
        Self::rate(self.true_positive, self.true_positive + self.false_negative)
    }

    /// Specificity: preserved zeros over true zeros (0 when complete).
    pub fn tnr(&self) -> f64 {
        Self::rate(self.true_negative, self.true_negative + self.false_positive)
    }

    /// Precision among detected edges (0 when nothing is detected).
    pub fn ppv(&self) -> f64 {
        Self::rate(self.true_positive, self.true_positive + self.false_positive)
    }

    pub fn f1(&self) -> f64 {
        let denom = 2 * self.true_positive + self.false_positive + self.false_negative;
        Self::rate(2 * self.true_positive, denom)
    }
}

/// Compares the support of an estimate (entries with |value| > zero_tol)
/// against a reference edge set.
pub fn edge_confusion(
    est: &SymMatrix,
    truth: &SparsityGraph,
    zero_tol: f64,
) -> Result<EdgeConfusion> {
    let p = est.dim();
    if truth.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: truth.p(),
        });
    }
    if !(zero_tol >= 0.0) {
        return Err(Error::OutOfRange {
            what: "zero tolerance",
            value: zero_tol,
        });
    }
    let mut out = EdgeConfusion {
        true_positive: 0,
        false_positive: 0,
        true_negative: 0,
        false_negative: 0,
    };
    for j in 0..p {
        for k in (j + 1)..p {
            let detected = est.get(j, k).abs() > zero_tol;
            match (truth.has_edge(j, k), detected) {
                (true, true) => out.true_positive += 1,
                (false, true) => out.false_positive += 1,
                (false, false) => out.true_negative += 1,
                (true, false) => out.false_negative += 1,
            }
        }
    }
    Ok(out)
}

/// One fitted class of a quadratic discriminant model.
#[derive(Debug, Clone)]
pub struct QdaClass {
    pub label: String,
    pub prior: f64,
    pub mean: Vec<f64>,
    pub sigma: SymMatrix,
    chol: Matrix,
    log_det: f64,
}

/// Gaussian QDA with per-class covariances fitted by the penalized
/// estimator. Classes are kept in ascending label order.
#[derive(Debug, Clone)]
pub struct QdaModel {
    pub classes: Vec<QdaClass>,
}

/// Fits one covariance per class on mean-centered class data. `graphs`
/// and `penalties` must carry exactly the class labels present in `data`.
pub fn qda_fit(
    data: &BTreeMap<String, DataSet>,
    graphs: &BTreeMap<String, SparsityGraph>,
    penalties: &BTreeMap<String, PenaltyPair>,
    config: &GicfConfig,
) -> Result<QdaModel> {
    if data.len() < 2 {
        return Err(Error::BadClassCount { got: data.len() });
    }
    for (name, map_keys) in [
        ("graphs", graphs.keys().cloned().collect::<Vec<_>>()),
        ("penalties", penalties.keys().cloned().collect::<Vec<_>>()),
    ] {
        let want: Vec<String> = data.keys().cloned().collect();
        if map_keys != want {
            return Err(Error::Parse {
                path: name.to_owned(),
                line: 0,
                msg: format!("class labels {map_keys:?} do not match data labels {want:?}"),
            });
        }
    }
    let total: usize = data.values().map(DataSet::n).sum();
    let p = data.values().next().unwrap().p();
    let mut classes = Vec::with_capacity(data.len());
    for (label, y) in data {
        if y.p() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: y.p(),
            });
        }
        let mean = y.column_means();
        let centered = y.center_columns();
        let s = model::sums_of_squares(&centered);
        let fit = solver::fit(&s, y.n(), &graphs[label], &penalties[label], config)?;
        let sigma = fit.sigma_hat;
        let chol = linalg::cholesky(&sigma)?;
        let log_det = 2.0 * (0..p).map(|j| chol.get(j, j).ln()).sum::<f64>();
        classes.push(QdaClass {
            label: label.clone(),
            prior: y.n() as f64 / total as f64,
            mean,
            sigma,
            chol,
            log_det,
        });
    }
    Ok(QdaModel { classes })
}

impl QdaModel {
    /// Index of the class maximizing the quadratic discriminant score
    /// -log|Sigma_j| - (x-mu_j)' Sigma_j^-1 (x-mu_j) + 2 log prior_j.
    /// Exact ties go to the earliest class in label order.
    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        let p = self.classes[0].mean.len();
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: x.len(),
            });
        }
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (idx, class) in self.classes.iter().enumerate() {
            let diff: Vec<f64> = x.iter().zip(&class.mean).map(|(a, b)| a - b).collect();
            let solved = linalg::chol_solve(&class.chol, &diff);
            let quad: f64 = diff.iter().zip(&solved).map(|(a, b)| a * b).sum();
            let score = -class.log_det - quad + 2.0 * class.prior.ln();
            if score > best_score {
                best = idx;
                best_score = score;
            }
        }
        Ok(best)
    }

    /// Fraction of rows whose predicted class differs from `labels`
    /// (indices into `classes`).
    pub fn error_rate(&self, rows: &DataSet, labels: &[usize]) -> Result<f64> {
        if labels.len() != rows.n() {
            return Err(Error::DimensionMismatch {
                expected: rows.n(),
                got: labels.len(),
            });
        }
        let mut wrong = 0usize;
        for i in 0..rows.n() {
            if self.classify(rows.row(i))? != labels[i] {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / rows.n() as f64)
    }
}
