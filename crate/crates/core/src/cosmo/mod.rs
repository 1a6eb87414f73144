//! Peer-group (COSMO) features.
//!
//! Every sample is described by how far each of its features lies from the
//! same feature in a reference group of nominal samples. Distances are taken
//! per feature with the absolute difference, and summarised over the `k`
//! nearest reference values (mean or median) or against the most central
//! reference value. Because a reference group can hold nominal samples from
//! the deployment domain, the resulting features carry over between domains
//! with different operating conditions.

mod distance;
mod eigengap;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{NominalPool, Sample, N_FEATURES};

pub use distance::{feature_matrix, feature_vector, write_feature_csv, CosmoFeatureMatrix};
pub use eigengap::{estimate_num_conditions, EigengapConfig};

/// Default reference group size.
pub const DEFAULT_GROUP_SIZE: usize = 80;
/// Default neighbour count for the kNN-based distances.
pub const DEFAULT_K: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CosmoError {
    #[error("nominal pool holds {pool} samples but the reference group needs {size}")]
    PoolTooSmall { pool: usize, size: usize },
    #[error("reference mode {mode} needs a non-empty {side} nominal pool")]
    MissingPool { mode: ReferenceMode, side: &'static str },
    #[error("k = {k} exceeds the reference group size {group}")]
    KTooLarge { k: usize, group: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<CosmoError>,
    },
}

pub type Result<T> = std::result::Result<T, CosmoError>;

/// Which nominal pools a reference group was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Source,
    Target,
    Both,
}

/// Fixed bag of nominal samples acting as the peer population.
///
/// Columns are kept sorted so that the `k` nearest values of one feature can
/// be found by a binary search and a two-sided walk.
#[derive(Debug, Clone)]
pub struct ReferenceGroup {
    samples: Vec<Sample>,
    pub provenance: Provenance,
    pub seed: u64,
    sorted: Vec<Vec<f64>>,
}

impl PartialEq for ReferenceGroup {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples && self.provenance == other.provenance && self.seed == other.seed
    }
}

impl ReferenceGroup {
    pub fn from_samples(samples: Vec<Sample>, provenance: Provenance, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(CosmoError::InvalidArgument("reference group is empty".into()));
        }
        let sorted = (0..N_FEATURES)
            .map(|j| {
                let mut col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
                col.sort_by(f64::total_cmp);
                col
            })
            .collect();
        Ok(ReferenceGroup {
            samples,
            provenance,
            seed,
            sorted,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub(crate) fn sorted_column(&self, j: usize) -> &[f64] {
        &self.sorted[j]
    }

    /// Reference value minimising the summed L1 distance to the column:
    /// the lower median.
    pub fn central_value(&self, j: usize) -> f64 {
        let col = &self.sorted[j];
        col[(col.len() - 1) / 2]
    }
}

/// Draws `size` samples uniformly without replacement.
pub fn sample_reference_group(pool: &NominalPool, size: usize, seed: u64) -> Result<ReferenceGroup> {
    draw(&pool.samples, size, seed, Provenance::Source)
}

fn draw(pool: &[Sample], size: usize, seed: u64, provenance: Provenance) -> Result<ReferenceGroup> {
    if size == 0 {
        return Err(CosmoError::InvalidArgument("reference group size must be positive".into()));
    }
    if pool.len() < size {
        return Err(CosmoError::PoolTooSmall {
            pool: pool.len(),
            size,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, pool.len(), size)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    ReferenceGroup::from_samples(picked, provenance, seed)
}

/// Side of a reference mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    S,
    T,
    ST,
}

impl Side {
    fn provenance(self) -> Provenance {
        match self {
            Side::S => Provenance::Source,
            Side::T => Provenance::Target,
            Side::ST => Provenance::Both,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::S => "S",
            Side::T => "T",
            Side::ST => "ST",
        })
    }
}

/// Reference groups used when fitting the regressor (`fit`) and when
/// predicting on the target domain (`predict`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReferenceMode {
    fit: Side,
    predict: Side,
}

impl ReferenceMode {
    pub const S_T: ReferenceMode = ReferenceMode { fit: Side::S, predict: Side::T };
    pub const S_ST: ReferenceMode = ReferenceMode { fit: Side::S, predict: Side::ST };
    pub const ST_ST: ReferenceMode = ReferenceMode { fit: Side::ST, predict: Side::ST };
    pub const ST_T: ReferenceMode = ReferenceMode { fit: Side::ST, predict: Side::T };
    pub const ALL: [ReferenceMode; 4] = [Self::S_T, Self::S_ST, Self::ST_ST, Self::ST_T];

    pub fn new(fit: Side, predict: Side) -> Result<Self> {
        let ok = matches!(fit, Side::S | Side::ST) && matches!(predict, Side::T | Side::ST);
        if !ok {
            return Err(CosmoError::InvalidArgument(format!(
                "mode ({fit},{predict}) is not one of (S,T), (S,ST), (ST,ST), (ST,T)"
            )));
        }
        Ok(ReferenceMode { fit, predict })
    }

    pub fn fit_side(self) -> Side {
        self.fit
    }

    pub fn predict_side(self) -> Side {
        self.predict
    }
}

impl fmt::Display for ReferenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.fit, self.predict)
    }
}

impl FromStr for ReferenceMode {
    type Err = CosmoError;

    fn from_str(s: &str) -> Result<Self> {
        let cleaned: String = s
            .chars()
            .filter(|c| !matches!(c, '(' | ')' | ' '))
            .collect::<String>()
            .to_ascii_uppercase();
        let (a, b) = cleaned
            .split_once([',', '-', '_'])
            .ok_or_else(|| CosmoError::InvalidArgument(format!("cannot parse reference mode '{s}'")))?;
        let side = |x: &str| match x {
            "S" => Ok(Side::S),
            "T" => Ok(Side::T),
            "ST" => Ok(Side::ST),
            _ => Err(CosmoError::InvalidArgument(format!("unknown side '{x}' in '{s}'"))),
        };
        ReferenceMode::new(side(a)?, side(b)?)
    }
}

/// Builds the fit-time and predict-time reference groups of a mode.
///
/// Sides with the same provenance share one draw, so under (ST,ST) both
/// groups are the same set of samples.
pub fn build_mode_groups(
    mode: ReferenceMode,
    pool_s: &NominalPool,
    pool_t: &NominalPool,
    size: usize,
    seed: u64,
) -> Result<(ReferenceGroup, ReferenceGroup)> {
    if pool_s.is_empty() {
        return Err(CosmoError::MissingPool { mode, side: "source" });
    }
    if pool_t.is_empty() {
        return Err(CosmoError::MissingPool { mode, side: "target" });
    }
    let group = |side: Side| -> Result<ReferenceGroup> {
        let side_seed = seed ^ match side {
            Side::S => 0x5151_5151,
            Side::T => 0x7A7A_7A7A,
            Side::ST => 0x5757_5757,
        };
        match side {
            Side::S => draw(&pool_s.samples, size, side_seed, side.provenance()),
            Side::T => draw(&pool_t.samples, size, side_seed, side.provenance()),
            Side::ST => {
                let union: Vec<Sample> = pool_s.samples.iter().chain(&pool_t.samples).copied().collect();
                draw(&union, size, side_seed, side.provenance())
            }
        }
    };
    Ok((group(mode.fit)?, group(mode.predict)?))
}

/// How per-feature distances to the group are summarised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceMethod {
    /// Mean of the k smallest distances.
    KnnMean { k: usize },
    /// Median of the k smallest distances.
    MknnMedian { k: usize },
    /// Distance to the most central reference value.
    Mcp,
}

impl DistanceMethod {
    pub fn k(self) -> Option<usize> {
        match self {
            DistanceMethod::KnnMean { k } | DistanceMethod::MknnMedian { k } => Some(k),
            DistanceMethod::Mcp => None,
        }
    }

    /// Short name used in file names and CSV columns.
    pub fn name(self) -> &'static str {
        match self {
            DistanceMethod::KnnMean { .. } => "knn",
            DistanceMethod::MknnMedian { .. } => "mknn",
            DistanceMethod::Mcp => "mcp",
        }
    }

    pub fn parse(name: &str, k: usize) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "knn" | "knn_mean" => Ok(DistanceMethod::KnnMean { k }),
            "mknn" | "m-knn" | "mknn_median" => Ok(DistanceMethod::MknnMedian { k }),
            "mcp" => Ok(DistanceMethod::Mcp),
            other => Err(CosmoError::InvalidArgument(format!("unknown distance method '{other}'"))),
        }
    }
}

impl fmt::Display for DistanceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.k() {
            Some(k) => write!(f, "{}-k{k}", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

/// `k <= group_size / n_conditions`, so the k nearest neighbours can all come
/// from the sample's own operating condition.
pub fn check_k_condition(k: usize, group_size: usize, n_conditions: usize) -> bool {
    if n_conditions == 0 {
        return false;
    }
    k as f64 <= group_size as f64 / n_conditions as f64
}
