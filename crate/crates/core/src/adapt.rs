//! Baseline feature maps: raw sensor values, and CORAL second-order
//! alignment of source features onto target statistics.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Sample, N_FEATURES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptError {
    #[error("{side} features: need at least 2 rows to estimate a covariance, got {rows}")]
    TooFewRows { side: &'static str, rows: usize },
    #[error("column count mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0} features")]
    NonFinite(&'static str),
    #[error("regularization must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
}

pub type Result<T> = std::result::Result<T, AdaptError>;

pub const DEFAULT_CORAL_EPSILON: f64 = 1e-6;

/// Non-fatal conditions noticed while fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CoralWarning {
    /// Fewer than `d + 1` rows, so the sample covariance is singular and the
    /// result leans on the regularization.
    RankDeficient {
        side: String,
        rows: usize,
        dim: usize,
    },
}

/// `x ↦ x · W · R` with `W = C_S^{-1/2}` and `R = C_T^{1/2}`. Means are not
/// re-centred: this is a pure second-moment alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct CoralTransform {
    pub whitening: DMatrix<f64>,
    pub recoloring: DMatrix<f64>,
    pub epsilon: f64,
    pub warnings: Vec<CoralWarning>,
}

impl CoralTransform {
    pub fn dim(&self) -> usize {
        self.whitening.nrows()
    }

    /// The combined `d × d` map `W · R`.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.whitening * &self.recoloring
    }
}

/// Fits the alignment. Matrix powers come from a symmetric eigendecomposition
/// with eigenvalues clamped below at `epsilon`, so directions that the data
/// resolves are matched exactly and only near-null directions are regularized.
pub fn fit_coral(
    source: &DMatrix<f64>,
    target: &DMatrix<f64>,
    epsilon: f64,
) -> Result<CoralTransform> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(AdaptError::InvalidEpsilon(epsilon));
    }
    let d = source.ncols();
    if target.ncols() != d {
        return Err(AdaptError::DimensionMismatch {
            expected: d,
            got: target.ncols(),
        });
    }
    let mut warnings = Vec::new();
    for (side, m) in [("source", source), ("target", target)] {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(AdaptError::NonFinite(side));
        }
        if m.nrows() < 2 {
            return Err(AdaptError::TooFewRows {
                side,
                rows: m.nrows(),
            });
        }
        if m.nrows() < d + 1 {
            warnings.push(CoralWarning::RankDeficient {
                side: side.to_string(),
                rows: m.nrows(),
                dim: d,
            });
        }
    }
    Ok(CoralTransform {
        whitening: matrix_power(&covariance(source), -0.5, epsilon),
        recoloring: matrix_power(&covariance(target), 0.5, epsilon),
        epsilon,
        warnings,
    })
}

pub fn apply_coral(t: &CoralTransform, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if rows.ncols() != t.dim() {
        return Err(AdaptError::DimensionMismatch {
            expected: t.dim(),
            got: rows.ncols(),
        });
    }
    Ok(rows * t.matrix())
}

/// The identity feature map over the 24 raw columns.
pub fn raw_baseline(samples: &[Sample]) -> DMatrix<f64> {
    DMatrix::from_fn(samples.len(), N_FEATURES, |i, j| samples[i][j])
}

/// Unbiased sample covariance of the rows.
pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mean = x.row_mean();
    let mut centred = x.clone();
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }
    let mut c = centred.transpose() * &centred / (n as f64 - 1.0);
    c = (&c + c.transpose()) * 0.5;
    c
}

fn matrix_power(c: &DMatrix<f64>, p: f64, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(c.clone());
    let scaled = eig.eigenvalues.map(|l| l.max(floor).powf(p));
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&scaled) * v.transpose()
}
