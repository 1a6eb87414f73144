//! Prediction metrics: per-unit and fleet MAPE over the degradation period,
//! last-cycle RMSE, and MAPE as a function of the RUL limit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("empty fleet")]
    EmptyFleet,
    #[error("unit {0} has no cycles")]
    EmptyUnit(u32),
    #[error("every unit was excluded at RUL limit {0}")]
    AllExcluded(u32),
    #[error("unit {unit}: {reason}")]
    InvalidUnit { unit: u32, reason: String },
    #[error("RUL limits must be positive and strictly ascending")]
    BadLimits,
}

pub type Result<T> = std::result::Result<T, EvalError>;

pub const DEFAULT_RUL_LIMIT: u32 = 129;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclePrediction {
    pub cycle: u32,
    pub truth: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitPrediction {
    pub unit_id: u32,
    pub cycles: Vec<CyclePrediction>,
}

impl UnitPrediction {
    /// Checks that truths are non-negative, predictions finite and cycles
    /// strictly ascending.
    pub fn new(unit_id: u32, cycles: Vec<CyclePrediction>) -> Result<Self> {
        let invalid = |reason: String| EvalError::InvalidUnit {
            unit: unit_id,
            reason,
        };
        for c in &cycles {
            if !(c.truth >= 0.0 && c.truth.is_finite()) {
                return Err(invalid(format!("truth {} at cycle {}", c.truth, c.cycle)));
            }
            if !c.prediction.is_finite() {
                return Err(invalid(format!("prediction {} at cycle {}", c.prediction, c.cycle)));
            }
        }
        if cycles.windows(2).any(|w| w[0].cycle >= w[1].cycle) {
            return Err(invalid("cycles are not strictly ascending".into()));
        }
        Ok(UnitPrediction { unit_id, cycles })
    }

    /// Builds a unit from parallel truth and prediction slices, numbering
    /// cycles from 1.
    pub fn from_series(unit_id: u32, truths: &[f64], predictions: &[f64]) -> Result<Self> {
        if truths.len() != predictions.len() {
            return Err(EvalError::InvalidUnit {
                unit: unit_id,
                reason: format!("{} truths but {} predictions", truths.len(), predictions.len()),
            });
        }
        let cycles = truths
            .iter()
            .zip(predictions)
            .enumerate()
            .map(|(i, (&truth, &prediction))| CyclePrediction {
                cycle: i as u32 + 1,
                truth,
                prediction,
            })
            .collect();
        Self::new(unit_id, cycles)
    }

    pub fn last(&self) -> Option<&CyclePrediction> {
        self.cycles.last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mape: f64,
    pub rmse_last_cycle: f64,
    pub n_units_included: usize,
    pub n_units_excluded: usize,
    pub rul_limit: u32,
}

/// Mean of `|y - ŷ| / y` over cycles with `1 <= y <= rul_limit`. `None`
/// means the unit has no such cycle and is excluded from fleet averages.
/// Cycles at `y = 0` would divide by zero and are always skipped.
pub fn mape_unit(p: &UnitPrediction, rul_limit: u32) -> Option<f64> {
    let limit = rul_limit as f64;
    let (sum, n) = p
        .cycles
        .iter()
        .filter(|c| c.truth >= 1.0 && c.truth <= limit)
        .fold((0.0, 0usize), |(s, n), c| {
            (s + (c.truth - c.prediction).abs() / c.truth, n + 1)
        });
    (n > 0).then(|| sum / n as f64)
}

/// Unweighted mean of the included units' MAPE, plus last-cycle RMSE over
/// the whole fleet.
pub fn mape_fleet(preds: &[UnitPrediction], rul_limit: u32) -> Result<MetricReport> {
    let rmse = rmse_last_cycle(preds)?;
    let per_unit: Vec<f64> = preds.iter().filter_map(|p| mape_unit(p, rul_limit)).collect();
    if per_unit.is_empty() {
        return Err(EvalError::AllExcluded(rul_limit));
    }
    Ok(MetricReport {
        mape: per_unit.iter().sum::<f64>() / per_unit.len() as f64,
        rmse_last_cycle: rmse,
        n_units_included: per_unit.len(),
        n_units_excluded: preds.len() - per_unit.len(),
        rul_limit,
    })
}

pub fn rmse_last_cycle(preds: &[UnitPrediction]) -> Result<f64> {
    if preds.is_empty() {
        return Err(EvalError::EmptyFleet);
    }
    let mut sq = 0.0;
    for p in preds {
        let last = p.last().ok_or(EvalError::EmptyUnit(p.unit_id))?;
        sq += (last.truth - last.prediction).powi(2);
    }
    Ok((sq / preds.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub limit: u32,
    /// Fleet MAPE at this limit, or why it could not be computed.
    pub mape: Result<f64>,
}

/// One independent fleet MAPE per limit. A limit at which every unit is
/// excluded yields an error for that point only.
pub fn mape_vs_rul_limit(preds: &[UnitPrediction], limits: &[u32]) -> Result<Vec<CurvePoint>> {
    if limits.is_empty() || limits[0] == 0 || limits.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::BadLimits);
    }
    rmse_last_cycle(preds)?;
    Ok(limits
        .iter()
        .map(|&limit| CurvePoint {
            limit,
            mape: mape_fleet(preds, limit).map(|r| r.mape),
        })
        .collect())
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(id: u32, truths: &[f64], preds: &[f64]) -> UnitPrediction {
        UnitPrediction::from_series(id, truths, preds).unwrap()
    }

    #[test]
    fn perfect_prediction_has_zero_mape() {
        assert_eq!(mape_unit(&unit(1, &[10.0, 5.0], &[10.0, 5.0]), 129), Some(0.0));
    }

    #[test]
    fn swapped_prediction_mape() {
        // |10-5|/10 = 0.5 and |5-10|/5 = 1.0
        assert_eq!(mape_unit(&unit(1, &[10.0, 5.0], &[5.0, 10.0]), 129), Some(0.75));
    }

    #[test]
    fn plateau_unit_is_excluded() {
        assert_eq!(mape_unit(&unit(1, &[130.0; 4], &[100.0; 4]), 129), None);
    }

    #[test]
    fn zero_truth_is_skipped() {
        assert_eq!(mape_unit(&unit(1, &[2.0, 1.0, 0.0], &[2.0, 1.0, 9.0]), 129), Some(0.0));
    }

    #[test]
    fn fleet_mean_and_exclusions() {
        let a = unit(1, &[10.0], &[8.0]);
        let b = unit(2, &[10.0], &[6.0]);
        let r = mape_fleet(&[a.clone(), b], 129).unwrap();
        assert!((r.mape - 0.3).abs() < 1e-15);
        assert_eq!((r.n_units_included, r.n_units_excluded), (2, 0));

        let plateau = unit(3, &[130.0], &[130.0]);
        let r = mape_fleet(&[a.clone(), plateau.clone()], 129).unwrap();
        assert_eq!((r.n_units_included, r.n_units_excluded), (1, 1));
        assert_eq!(r.mape, mape_unit(&a, 129).unwrap());
        assert_eq!(mape_fleet(&[plateau], 129), Err(EvalError::AllExcluded(129)));
    }

    #[test]
    fn last_cycle_rmse() {
        let a = unit(1, &[50.0, 20.0], &[0.0, 23.0]);
        let b = unit(2, &[9.0], &[5.0]);
        let r = rmse_last_cycle(&[a.clone(), b]).unwrap();
        assert!((r - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((r - 3.5355339059327378).abs() < 1e-12);
        assert_eq!(rmse_last_cycle(&[a]).unwrap(), 3.0);
        assert_eq!(rmse_last_cycle(&[unit(1, &[4.0], &[4.0])]).unwrap(), 0.0);
        assert_eq!(rmse_last_cycle(&[]), Err(EvalError::EmptyFleet));
        assert_eq!(
            rmse_last_cycle(&[UnitPrediction::new(7, vec![]).unwrap()]),
            Err(EvalError::EmptyUnit(7))
        );
    }

    #[test]
    fn invalid_units() {
        assert!(UnitPrediction::from_series(1, &[-1.0], &[0.0]).is_err());
        assert!(UnitPrediction::from_series(1, &[1.0], &[f64::NAN]).is_err());
        assert!(UnitPrediction::from_series(1, &[1.0], &[]).is_err());
        let c = |cycle| CyclePrediction { cycle, truth: 1.0, prediction: 1.0 };
        assert!(UnitPrediction::new(1, vec![c(2), c(2)]).is_err());
    }

    #[test]
    fn curve_points() {
        let fleet = [unit(1, &[3.0, 2.0, 1.0], &[4.0, 2.0, 1.5]), unit(2, &[140.0, 130.0, 60.0], &[120.0, 120.0, 50.0])];
        let curve = mape_vs_rul_limit(&fleet, &[130]).unwrap();
        assert_eq!(curve[0].mape, Ok(mape_fleet(&fleet, 130).unwrap().mape));
        let curve = mape_vs_rul_limit(&fleet, &[1, 2, 100]).unwrap();
        assert_eq!(curve.len(), 3);
        assert_eq!(curve[0].mape, Ok(mape_fleet(&fleet, 1).unwrap().mape));
        let lone = [unit(3, &[50.0], &[40.0])];
        let curve = mape_vs_rul_limit(&lone, &[10, 60]).unwrap();
        assert_eq!(curve[0].mape, Err(EvalError::AllExcluded(10)));
        assert!(curve[1].mape.is_ok());
        assert_eq!(mape_vs_rul_limit(&fleet, &[5, 5]), Err(EvalError::BadLimits));
        assert_eq!(mape_vs_rul_limit(&fleet, &[0, 5]), Err(EvalError::BadLimits));
        assert_eq!(mape_vs_rul_limit(&fleet, &[]), Err(EvalError::BadLimits));
    }

    #[test]
    fn perfect_curve_is_zero() {
        let t: Vec<f64> = (0..=130).rev().map(f64::from).collect();
        let fleet = [unit(1, &t, &t)];
        let limits: Vec<u32> = (1..=130).collect();
        for p in mape_vs_rul_limit(&fleet, &limits).unwrap() {
            assert_eq!(p.mape, Ok(0.0));
        }
    }

    #[test]
    fn uniform_relative_error_curve_is_flat() {
        let eps = 0.125;
        let t: Vec<f64> = (0..=200).rev().map(|v| f64::from(v).min(130.0)).collect();
        let p: Vec<f64> = t.iter().map(|y| (1.0 + eps) * y).collect();
        let fleet = [unit(1, &t, &p), unit(2, &t[50..], &p[50..])];
        let limits: Vec<u32> = (1..=130).collect();
        for pt in mape_vs_rul_limit(&fleet, &limits).unwrap() {
            assert!((pt.mape.unwrap() - eps).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(mean_std(&[]).0.is_nan());
    }

    fn fleet_strategy() -> impl Strategy<Value = Vec<Vec<(f64, f64)>>> {
        prop::collection::vec(
            prop::collection::vec((0.0f64..200.0, 0.0f64..200.0), 1..30),
            1..6,
        )
    }

    fn build(fleet: &[Vec<(f64, f64)>], scale: f64, shift: f64) -> Vec<UnitPrediction> {
        fleet
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let t: Vec<f64> = u.iter().map(|c| c.0 * scale).collect();
                let p: Vec<f64> = u.iter().map(|c| c.1 * scale + shift).collect();
                unit(i as u32 + 1, &t, &p)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn mape_is_scale_covariant(fleet in fleet_strategy(), c in 0.01f64..100.0) {
            // All qualifying truths at scale 1 stay qualifying under a huge limit.
            let limit = u32::MAX;
            let base = build(&fleet, 1.0, 0.0);
            let scaled = build(&fleet, c, 0.0);
            for (a, b) in base.iter().zip(&scaled) {
                let keep_a: Vec<bool> = a.cycles.iter().map(|x| x.truth >= 1.0).collect();
                let keep_b: Vec<bool> = b.cycles.iter().map(|x| x.truth >= 1.0).collect();
                prop_assume!(keep_a == keep_b);
            }
            match (mape_fleet(&base, limit), mape_fleet(&scaled, limit)) {
                (Ok(x), Ok(y)) => prop_assert!((x.mape - y.mape).abs() <= 1e-9 * (1.0 + x.mape)),
                (x, y) => prop_assert_eq!(x.is_err(), y.is_err()),
            }
        }

        #[test]
        fn rmse_translation(truths in prop::collection::vec(0.0f64..300.0, 1..20), b in -50.0f64..50.0) {
            let fleet: Vec<UnitPrediction> = truths
                .iter()
                .enumerate()
                .map(|(i, &t)| unit(i as u32 + 1, &[t], &[t + b]))
                .collect();
            prop_assert!((rmse_last_cycle(&fleet).unwrap() - b.abs()).abs() < 1e-9);
        }

        #[test]
        fn curve_end_matches_fleet(fleet in fleet_strategy(), top in 1u32..200) {
            let units = build(&fleet, 1.0, 0.0);
            let limits: Vec<u32> = (1..=top).step_by(7).chain(std::iter::once(top)).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
            let curve = mape_vs_rul_limit(&units, &limits).unwrap();
            let last = curve.last().unwrap();
            prop_assert_eq!(last.limit, top);
            prop_assert_eq!(&last.mape, &mape_fleet(&units, top).map(|r| r.mape));
        }
    }
}
