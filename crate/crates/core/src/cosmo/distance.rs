use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{CosmoError, DistanceMethod, ReferenceGroup, Result};
use crate::dataset::{Sample, N_FEATURES};

/// Per-sample, per-feature peer distances. Row order follows the input.
#[derive(Debug, Clone, PartialEq)]
pub struct CosmoFeatureMatrix {
    pub rows: Vec<[f64; N_FEATURES]>,
}

impl CosmoFeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), N_FEATURES, |i, j| self.rows[i][j])
    }
}

fn validate(group: &ReferenceGroup, method: DistanceMethod) -> Result<()> {
    if let Some(k) = method.k() {
        if k == 0 {
            return Err(CosmoError::InvalidArgument("k must be at least 1".into()));
        }
        if k > group.len() {
            return Err(CosmoError::KTooLarge { k, group: group.len() });
        }
    }
    Ok(())
}

/// Distances of `x` to the group, one value per feature.
pub fn feature_vector(x: &Sample, group: &ReferenceGroup, method: DistanceMethod) -> Result<[f64; N_FEATURES]> {
    validate(group, method)?;
    let mut buf = Vec::with_capacity(method.k().unwrap_or(0));
    Ok(compute(x, group, method, &mut buf))
}

fn compute(x: &Sample, group: &ReferenceGroup, method: DistanceMethod, buf: &mut Vec<f64>) -> [f64; N_FEATURES] {
    let mut theta = [0.0; N_FEATURES];
    for (j, out) in theta.iter_mut().enumerate() {
        let xj = x[j];
        *out = match method {
            DistanceMethod::Mcp => (xj - group.central_value(j)).abs(),
            DistanceMethod::KnnMean { k } => {
                nearest(group.sorted_column(j), xj, k, buf);
                buf.iter().sum::<f64>() / k as f64
            }
            DistanceMethod::MknnMedian { k } => {
                nearest(group.sorted_column(j), xj, k, buf);
                if k % 2 == 1 {
                    buf[k / 2]
                } else {
                    (buf[k / 2 - 1] + buf[k / 2]) / 2.0
                }
            }
        };
    }
    theta
}

/// Fills `buf` with the `k` smallest `|x - c|` over the sorted column, in
/// ascending order.
fn nearest(col: &[f64], x: f64, k: usize, buf: &mut Vec<f64>) {
    buf.clear();
    let split = col.partition_point(|&v| v < x);
    let (mut lo, mut hi) = (split, split);
    while buf.len() < k {
        let left = (lo > 0).then(|| (x - col[lo - 1]).abs());
        let right = (hi < col.len()).then(|| (x - col[hi]).abs());
        match (left, right) {
            (Some(l), Some(r)) if l <= r => {
                buf.push(l);
                lo -= 1;
            }
            (_, Some(r)) => {
                buf.push(r);
                hi += 1;
            }
            (Some(l), None) => {
                buf.push(l);
                lo -= 1;
            }
            (None, None) => unreachable!("k is bounded by the column length"),
        }
    }
}

/// Applies [`feature_vector`] to every sample (rows computed in parallel).
pub fn feature_matrix(samples: &[Sample], group: &ReferenceGroup, method: DistanceMethod) -> Result<CosmoFeatureMatrix> {
    if samples.is_empty() {
        return Err(CosmoError::InvalidArgument("no samples to featurize".into()));
    }
    validate(group, method).map_err(|e| CosmoError::Row {
        row: 0,
        source: Box::new(e),
    })?;
    let rows = samples
        .par_iter()
        .map_init(
            || Vec::with_capacity(method.k().unwrap_or(0)),
            |buf, x| compute(x, group, method, buf),
        )
        .collect();
    Ok(CosmoFeatureMatrix { rows })
}

/// Writes `unit,cycle,theta_1..theta_24` rows. `keys[i]` labels row `i`.
pub fn write_feature_csv<W: Write>(out: W, keys: &[(u32, usize)], features: &CosmoFeatureMatrix) -> csv::Result<()> {
    assert_eq!(keys.len(), features.n_rows(), "one key per feature row");
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["unit".to_string(), "cycle".to_string()];
    header.extend((1..=N_FEATURES).map(|j| format!("theta_{j}")));
    w.write_record(&header)?;
    for ((unit, cycle), row) in keys.iter().zip(&features.rows) {
        let mut rec = vec![unit.to_string(), cycle.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
