//! Number of operating conditions from the eigengap of a graph Laplacian
//! built on the operating-setting features.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{CosmoError, Result};
use crate::dataset::{Sample, N_SETTINGS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigengapConfig {
    /// Largest cluster count considered.
    pub max_k: usize,
    /// Samples beyond this are thinned to an evenly spaced subsample.
    pub max_samples: usize,
}

impl Default for EigengapConfig {
    fn default() -> Self {
        EigengapConfig {
            max_k: 10,
            max_samples: 500,
        }
    }
}

/// Estimates the number of operating conditions.
///
/// The graph is the fully connected Gaussian similarity graph over the three
/// setting features with self-tuning bandwidths: `w_ij = exp(-d_ij² / (σ_i σ_j))`
/// where `σ_i` is the distance from point `i` to its 7th nearest neighbour.
/// The estimate is the `m` with the largest gap between consecutive ascending
/// eigenvalues of the symmetric normalised Laplacian, measured on a log scale
/// (`ln(λ[m+1] + ε) - ln(λ[m] + ε)`), so that `m` numerically-zero eigenvalues
/// followed by a clearly positive one win over a single large step.
pub fn estimate_num_conditions(samples: &[Sample], config: EigengapConfig) -> Result<usize> {
    if samples.len() < 2 {
        return Err(CosmoError::InvalidArgument(
            "eigengap estimate needs at least two samples".into(),
        ));
    }
    if config.max_k == 0 || config.max_samples < 2 {
        return Err(CosmoError::InvalidArgument(
            "max_k must be positive and max_samples at least 2".into(),
        ));
    }
    let points = subsample(samples, config.max_samples);
    let n = points.len();

    let mut dist = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclid(&points[i], &points[j]);
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    let min_positive = dist.iter().copied().filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
    if !min_positive.is_finite() {
        return Ok(1);
    }
    let neighbour = LOCAL_SCALE_NEIGHBOUR.min(n - 1);
    let scale: Vec<f64> = dist
        .row_iter()
        .map(|r| {
            let mut row: Vec<f64> = r.iter().copied().collect();
            row.select_nth_unstable_by(neighbour, f64::total_cmp);
            row[neighbour].max(min_positive)
        })
        .collect();

    let mut w = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (-dist[(i, j)].powi(2) / (scale[i] * scale[j])).exp()
        }
    });
    let inv_sqrt_deg: Vec<f64> = w
        .row_iter()
        .map(|r| {
            let d: f64 = r.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            w[(i, j)] *= -inv_sqrt_deg[i] * inv_sqrt_deg[j];
        }
        w[(i, i)] += 1.0;
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(w)
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0) + EIGEN_FLOOR)
        .collect();
    eig.sort_by(f64::total_cmp);

    let max_k = config.max_k.min(n);
    let mut best = (1, f64::NEG_INFINITY);
    for m in 1..max_k {
        let gap = eig[m].ln() - eig[m - 1].ln();
        if gap > best.1 {
            best = (m, gap);
        }
    }
    Ok(best.0)
}

const LOCAL_SCALE_NEIGHBOUR: usize = 7;
/// Eigenvalues below this are indistinguishable from round-off.
const EIGEN_FLOOR: f64 = 1e-10;

/// Setting triples, sorted so the result does not depend on input order,
/// thinned to at most `cap` evenly spaced points.
fn subsample(samples: &[Sample], cap: usize) -> Vec<[f64; N_SETTINGS]> {
    let mut pts: Vec<[f64; N_SETTINGS]> = samples.iter().map(Sample::settings).collect();
    pts.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if pts.len() <= cap {
        return pts;
    }
    let n = pts.len();
    (0..cap).map(|i| pts[i * n / cap]).collect()
}

fn euclid(a: &[f64; N_SETTINGS], b: &[f64; N_SETTINGS]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
