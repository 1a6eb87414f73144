//! Turbofan run-to-failure data: samples, trajectories, RUL targets and
//! nominal (early-life) sample pools.
//!
//! A sample is the 24-dimensional feature vector recorded at one cycle:
//! three operating settings (altitude, Mach number, throttle resolver angle)
//! followed by 21 sensor measurements, all in raw engineering units.

mod cmapss;
mod synth;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cmapss::{
    attach_censored_rul, load_subset, parse_cmapss, parse_rul_file, write_cmapss, write_rul_file,
};
pub use synth::{
    censor_fleet, synthesize_fleet, synthesize_fleet_detailed, write_synthetic_cmapss, FleetSpec,
    SyntheticFleet, UnitTruth, OPERATING_CONDITIONS,
};

/// Number of features per sample.
pub const N_FEATURES: usize = 24;
/// Number of leading operating-setting features.
pub const N_SETTINGS: usize = 3;
/// Default RUL cap of the piecewise-linear target.
pub const DEFAULT_TAU_MAX: u32 = 130;
/// Default number of early cycles treated as nominal.
pub const DEFAULT_NOMINAL_CYCLES: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unit {unit}: {reason}")]
    Structure { unit: u32, reason: String },
    #[error("sample has {0} values, expected {N_FEATURES}")]
    SampleLength(usize),
    #[error("sample value at index {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("{ruls} RUL values for {trajectories} trajectories")]
    RulCountMismatch { ruls: usize, trajectories: usize },
    #[error("negative RUL value {value} for unit {unit}")]
    NegativeRul { unit: u32, value: i64 },
    #[error("unit {0} is right-censored; attach its RUL with attach_censored_rul and use Trajectory::targets")]
    CensoredTrajectory(u32),
    #[error("no trajectories to pool nominal samples from")]
    EmptyPool,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// One cycle's feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample([f64; N_FEATURES]);

impl Sample {
    pub fn new(values: [f64; N_FEATURES]) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(DatasetError::NonFinite { index, value });
        }
        Ok(Sample(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; N_FEATURES] = values
            .try_into()
            .map_err(|_| DatasetError::SampleLength(values.len()))?;
        Self::new(arr)
    }

    pub fn values(&self) -> &[f64; N_FEATURES] {
        &self.0
    }

    pub fn settings(&self) -> [f64; N_SETTINGS] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn sensors(&self) -> &[f64] {
        &self.0[N_SETTINGS..]
    }
}

impl std::ops::Index<usize> for Sample {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

/// One unit's multivariate time series, cycle 1..=l(u).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub unit_id: u32,
    samples: Vec<Sample>,
    /// RUL at the last recorded cycle; `None` for run-to-failure units.
    pub censored_rul: Option<u32>,
}

impl Trajectory {
    pub fn new(unit_id: u32, samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(DatasetError::Structure {
                unit: unit_id,
                reason: "trajectory has no samples".into(),
            });
        }
        Ok(Trajectory {
            unit_id,
            samples,
            censored_rul: None,
        })
    }

    pub fn with_censored_rul(mut self, rul: u32) -> Self {
        self.censored_rul = Some(rul);
        self
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// l(u), the number of recorded cycles.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_run_to_failure(&self) -> bool {
        self.censored_rul.is_none()
    }

    /// Keeps the first `cycles` samples and records the true RUL at the cut.
    pub fn truncate(&self, cycles: usize) -> Result<Trajectory> {
        if cycles == 0 || cycles > self.len() {
            return Err(DatasetError::InvalidArgument(format!(
                "cannot truncate unit {} of length {} to {} cycles",
                self.unit_id,
                self.len(),
                cycles
            )));
        }
        let tail = (self.len() - cycles) as u32;
        Ok(Trajectory {
            unit_id: self.unit_id,
            samples: self.samples[..cycles].to_vec(),
            censored_rul: Some(self.censored_rul.unwrap_or(0) + tail),
        })
    }

    /// Per-cycle targets for either kind of trajectory. Censored units are
    /// back-extended linearly from their final RUL, then capped.
    pub fn targets(&self, tau_max: u32) -> RulTarget {
        let l = self.len() as u64;
        let end = self.censored_rul.unwrap_or(0) as u64;
        let values = (1..=l)
            .map(|t| (end + l - t).min(tau_max as u64) as u32)
            .collect();
        RulTarget { values, tau_max }
    }
}

/// Piecewise-linear per-cycle RUL target, capped at `tau_max`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulTarget {
    /// `values[t - 1]` is the target at cycle t.
    pub values: Vec<u32>,
    pub tau_max: u32,
}

impl RulTarget {
    pub fn at_cycle(&self, t: usize) -> Option<u32> {
        t.checked_sub(1).and_then(|i| self.values.get(i).copied())
    }
}

/// Labels a run-to-failure trajectory: `l(u) - t` over the final `tau_max`
/// cycles and `tau_max` before that.
pub fn label_rul(trajectory: &Trajectory, tau_max: u32) -> Result<RulTarget> {
    if tau_max == 0 {
        return Err(DatasetError::InvalidArgument("tau_max must be positive".into()));
    }
    if !trajectory.is_run_to_failure() {
        return Err(DatasetError::CensoredTrajectory(trajectory.unit_id));
    }
    Ok(trajectory.targets(tau_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubsetId {
    FD001,
    FD002,
    FD003,
    FD004,
}

impl SubsetId {
    pub const ALL: [SubsetId; 4] = [SubsetId::FD001, SubsetId::FD002, SubsetId::FD003, SubsetId::FD004];

    /// Number of distinct operating conditions in the public subset.
    pub fn n_conditions(self) -> usize {
        match self {
            SubsetId::FD001 | SubsetId::FD003 => 1,
            SubsetId::FD002 | SubsetId::FD004 => 6,
        }
    }

    /// Number of fault modes in the public subset.
    pub fn n_fault_modes(self) -> usize {
        match self {
            SubsetId::FD001 | SubsetId::FD002 => 1,
            SubsetId::FD003 | SubsetId::FD004 => 2,
        }
    }

    pub fn train_file(self) -> String {
        format!("train_{self}.txt")
    }

    pub fn test_file(self) -> String {
        format!("test_{self}.txt")
    }

    pub fn rul_file(self) -> String {
        format!("RUL_{self}.txt")
    }
}

impl fmt::Display for SubsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SubsetId::FD001 => "FD001",
            SubsetId::FD002 => "FD002",
            SubsetId::FD003 => "FD003",
            SubsetId::FD004 => "FD004",
        };
        f.write_str(s)
    }
}

impl FromStr for SubsetId {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FD001" | "1" => Ok(SubsetId::FD001),
            "FD002" | "2" => Ok(SubsetId::FD002),
            "FD003" | "3" => Ok(SubsetId::FD003),
            "FD004" | "4" => Ok(SubsetId::FD004),
            other => Err(DatasetError::InvalidArgument(format!("unknown subset '{other}'"))),
        }
    }
}

/// Training (run-to-failure) or testing (right-censored) half of a subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Alpha,
    Beta,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Alpha => "alpha",
            Split::Beta => "beta",
        })
    }
}

impl FromStr for Split {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alpha" | "a" | "train" => Ok(Split::Alpha),
            "beta" | "b" | "test" => Ok(Split::Beta),
            other => Err(DatasetError::InvalidArgument(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subset {
    pub id: SubsetId,
    pub split: Split,
    trajectories: Vec<Trajectory>,
}

impl Subset {
    pub fn new(id: SubsetId, split: Split, trajectories: Vec<Trajectory>) -> Result<Self> {
        for t in &trajectories {
            let ok = match split {
                Split::Alpha => t.is_run_to_failure(),
                Split::Beta => !t.is_run_to_failure(),
            };
            if !ok {
                return Err(DatasetError::Structure {
                    unit: t.unit_id,
                    reason: format!("censoring state does not match the {split} split"),
                });
            }
        }
        Ok(Subset {
            id,
            split,
            trajectories,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn n_samples(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// Canonical cache encoding (JSON, shortest round-trip floats).
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("subset serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let subset: Subset = serde_json::from_str(text).map_err(|e| DatasetError::Parse {
            line: e.line(),
            reason: e.to_string(),
        })?;
        for t in &subset.trajectories {
            for (index, &value) in t.samples.iter().flat_map(|s| s.values().iter()).enumerate() {
                if !value.is_finite() {
                    return Err(DatasetError::NonFinite { index, value });
                }
            }
        }
        Subset::new(subset.id, subset.split, subset.trajectories)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json(&text)
    }
}

/// Early-life samples assumed healthy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalPool {
    pub samples: Vec<Sample>,
    pub tau: usize,
}

impl NominalPool {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Collects every sample with cycle index `t <= tau`.
pub fn extract_nominal(trajectories: &[Trajectory], tau: usize) -> Result<NominalPool> {
    if tau == 0 {
        return Err(DatasetError::InvalidArgument("tau must be at least 1".into()));
    }
    if trajectories.is_empty() {
        return Err(DatasetError::EmptyPool);
    }
    let samples = trajectories
        .iter()
        .flat_map(|t| t.samples().iter().take(tau).copied())
        .collect();
    Ok(NominalPool { samples, tau })
}
