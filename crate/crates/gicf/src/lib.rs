//! Sparse Gaussian covariance estimation.
//!
//! Fits a covariance matrix by maximizing the Gaussian log-likelihood
//! minus an l1 penalty on the off-diagonal entries, optionally restricted
//! to a sparsity graph and stabilized by a ridge shift of the sample
//! second-moment matrix. The solver cycles through vertices, refitting
//! one row/column at a time against the rest of the current iterate; each
//! sweep can only improve the objective.
//!
//! On top of the solver sit penalty-boundary formulas and grid
//! construction ([`penalty`]), cross-validated selection of the penalty
//! pair ([`selection`]), banded ground-truth simulation ([`simulate`]),
//! estimator metrics and discriminant analysis ([`evaluate`]), and CSV /
//! JSON interchange ([`io`]).

pub mod error;
pub mod evaluate;
pub mod io;
pub mod linalg;
pub mod model;
pub mod penalty;
pub mod rng;
pub mod selection;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::{Matrix, SymMatrix};
pub use model::{DataSet, PenaltyPair, SparsityGraph};
pub use penalty::PenaltyGrid;
pub use selection::{CvOptions, CvPlan, CvResult};
pub use solver::{FitResult, GicfConfig, Initialization};
