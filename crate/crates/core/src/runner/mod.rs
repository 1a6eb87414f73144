//! Cross-domain experiment harness: scenario table, trajectory-level
//! cross-validation, feature pipelines, and result bookkeeping.

mod cli;
pub mod config;
mod output;

pub use cli::cli_main;
pub use output::{
    experiment_rows, read_summary, write_curve_csv, write_experiment, write_result_csv,
    CategoryRow, ErrorEntry, Summary, SummaryEntry, RESULT_HEADER,
};

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapt::{self, AdaptError, CoralWarning, DEFAULT_CORAL_EPSILON};
use crate::cosmo::{
    self, build_mode_groups, CosmoError, DistanceMethod, ReferenceMode, DEFAULT_GROUP_SIZE,
    DEFAULT_K,
};
use crate::dataset::{
    label_rul, load_subset, DatasetError, NominalPool, Sample, Split, Subset, SubsetId,
    Trajectory, DEFAULT_NOMINAL_CYCLES, DEFAULT_TAU_MAX,
};
use crate::eval::{self, mean_std, EvalError, MetricReport, UnitPrediction, DEFAULT_RUL_LIMIT};
use crate::regress::{self, ForestConfig, RegressError};

/// Environment variable consulted when no data root is given.
pub const DATA_ROOT_ENV: &str = "COSMO_RUL_DATA_ROOT";
pub const DEFAULT_FOLDS: usize = 4;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Cosmo(#[from] CosmoError),
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, RunError>;

pub(crate) fn io_error(path: &Path, e: impl fmt::Display) -> RunError {
    RunError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// The sixteen source/target pairings of the four subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    A1,
    A2,
    A3,
    A4,
    B1,
    B2,
    C1,
    C2,
    D,
    E1,
    E2,
    F1,
    F2,
    G1,
    G2,
    H,
}

/// Kind of shift between source and target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SamePopulation,
    NewFault,
    NewOcs,
    NewFaultNewOcs,
    FewerFault,
    FewerOcs,
    NewFaultFewerOcs,
    FewerFaultNewOcs,
    FewerFaultFewerOcs,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::SamePopulation => "same population",
            Category::NewFault => "new fault",
            Category::NewOcs => "new OCs",
            Category::NewFaultNewOcs => "new fault & new OCs",
            Category::FewerFault => "fewer fault",
            Category::FewerOcs => "fewer OCs",
            Category::NewFaultFewerOcs => "new fault & fewer OCs",
            Category::FewerFaultNewOcs => "fewer fault & new OCs",
            Category::FewerFaultFewerOcs => "fewer fault & fewer OCs",
        }
    }
}

impl Scenario {
    pub const ALL: [Scenario; 16] = [
        Scenario::A1,
        Scenario::A2,
        Scenario::A3,
        Scenario::A4,
        Scenario::B1,
        Scenario::B2,
        Scenario::C1,
        Scenario::C2,
        Scenario::D,
        Scenario::E1,
        Scenario::E2,
        Scenario::F1,
        Scenario::F2,
        Scenario::G1,
        Scenario::G2,
        Scenario::H,
    ];

    /// (source, target) subsets.
    pub fn subsets(self) -> (SubsetId, SubsetId) {
        use SubsetId::*;
        match self {
            Scenario::A1 => (FD001, FD001),
            Scenario::A2 => (FD002, FD002),
            Scenario::A3 => (FD003, FD003),
            Scenario::A4 => (FD004, FD004),
            Scenario::B1 => (FD001, FD003),
            Scenario::B2 => (FD002, FD004),
            Scenario::C1 => (FD001, FD002),
            Scenario::C2 => (FD003, FD004),
            Scenario::D => (FD001, FD004),
            Scenario::E1 => (FD003, FD001),
            Scenario::E2 => (FD004, FD002),
            Scenario::F1 => (FD002, FD001),
            Scenario::F2 => (FD004, FD003),
            Scenario::G1 => (FD002, FD003),
            // One condition and two faults in, six conditions and one fault out.
            Scenario::G2 => (FD003, FD002),
            Scenario::H => (FD004, FD001),
        }
    }

    pub fn source(self) -> SubsetId {
        self.subsets().0
    }

    pub fn target(self) -> SubsetId {
        self.subsets().1
    }

    /// Derived from the condition and fault-mode counts of the two subsets.
    pub fn category(self) -> Category {
        let (s, t) = self.subsets();
        let oc = t.n_conditions().cmp(&s.n_conditions());
        let fault = t.n_fault_modes().cmp(&s.n_fault_modes());
        use std::cmp::Ordering::*;
        match (fault, oc) {
            (Equal, Equal) => Category::SamePopulation,
            (Greater, Equal) => Category::NewFault,
            (Equal, Greater) => Category::NewOcs,
            (Greater, Greater) => Category::NewFaultNewOcs,
            (Less, Equal) => Category::FewerFault,
            (Equal, Less) => Category::FewerOcs,
            (Greater, Less) => Category::NewFaultFewerOcs,
            (Less, Greater) => Category::FewerFaultNewOcs,
            (Less, Less) => Category::FewerFaultFewerOcs,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Scenario {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.to_string() == up)
            .ok_or_else(|| RunError::InvalidSpec(format!("unknown scenario '{s}'")))
    }
}

/// Feature pipeline fed to the regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Raw,
    Coral,
    Cosmo {
        distance: DistanceMethod,
        mode: ReferenceMode,
    },
}

impl Method {
    pub fn cosmo(distance: DistanceMethod, mode: ReferenceMode) -> Self {
        Method::Cosmo { distance, mode }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Raw => "raw",
            Method::Coral => "coral",
            Method::Cosmo { .. } => "cosmo",
        }
    }

    /// File-name friendly label, e.g. `cosmo-mknn-k8-ST-ST`.
    pub fn tag(self) -> String {
        match self {
            Method::Cosmo { distance, mode } => format!(
                "cosmo-{distance}-{}-{}",
                mode.fit_side(),
                mode.predict_side()
            ),
            other => other.name().to_string(),
        }
    }

    /// Builds a method from CLI/config words.
    pub fn parse(name: &str, distance: &str, k: usize, mode: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(Method::Raw),
            "coral" => Ok(Method::Coral),
            "cosmo" => Ok(Method::cosmo(
                DistanceMethod::parse(distance, k)?,
                mode.parse::<ReferenceMode>()?,
            )),
            other => Err(RunError::InvalidSpec(format!(
                "unknown method '{other}' (expected raw, coral or cosmo)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// One cell of the transfer matrix together with every knob that affects
/// its numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub eval_mode: Split,
    pub method: Method,
    pub seed: u64,
    pub repetitions: usize,
    pub folds: usize,
    /// Its `seed` field is ignored; each fold derives its own.
    pub forest: ForestConfig,
    pub group_size: usize,
    pub tau: usize,
    pub tau_max: u32,
    pub rul_limit: u32,
    pub coral_epsilon: f64,
    pub curve_limits: Vec<u32>,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, eval_mode: Split, method: Method) -> Self {
        ScenarioSpec {
            scenario,
            eval_mode,
            method,
            seed: 0,
            repetitions: 1,
            folds: DEFAULT_FOLDS,
            forest: ForestConfig::default(),
            group_size: DEFAULT_GROUP_SIZE,
            tau: DEFAULT_NOMINAL_CYCLES,
            tau_max: DEFAULT_TAU_MAX,
            rul_limit: DEFAULT_RUL_LIMIT,
            coral_epsilon: DEFAULT_CORAL_EPSILON,
            curve_limits: (1..=DEFAULT_TAU_MAX).collect(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_repetitions(mut self, n: usize) -> Self {
        self.repetitions = n;
        self
    }

    pub fn with_trees(mut self, n: usize) -> Self {
        self.forest.n_trees = n;
        self
    }

    pub fn source(&self) -> SubsetId {
        self.scenario.source()
    }

    pub fn target(&self) -> SubsetId {
        self.scenario.target()
    }

    /// `C1-alpha_cosmo-mknn-k8-ST-ST`
    pub fn stem(&self) -> String {
        format!("{}-{}_{}", self.scenario, self.eval_mode, self.method.tag())
    }

    /// FNV-1a over the canonical JSON encoding.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serialization cannot fail");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RunError::InvalidSpec(format!("{}: {m}", self.stem())));
        if self.repetitions == 0 {
            return bad("repetitions must be positive");
        }
        if self.folds < 2 {
            return bad("need at least 2 folds");
        }
        if self.tau == 0 || self.tau_max == 0 || self.rul_limit == 0 {
            return bad("tau, tau_max and rul_limit must be positive");
        }
        if self.curve_limits.windows(2).any(|w| w[0] >= w[1]) || self.curve_limits.first() == Some(&0) {
            return bad("curve limits must be positive and strictly ascending");
        }
        Ok(())
    }
}

/// Outcome of one (repetition, fold) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub repetition: usize,
    pub fold: usize,
    /// Seed of the repetition; drives the fold partition.
    pub seed: u64,
    pub forest_seed: u64,
    /// Reference-group seed, COSMO only.
    pub group_seed: Option<u64>,
    pub n_fit_units: usize,
    pub n_eval_units: usize,
    pub report: MetricReport,
    /// Fleet MAPE per curve limit; `None` where every unit was excluded.
    pub curve: Vec<(u32, Option<f64>)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_records: usize,
    pub mape_mean: f64,
    pub mape_std: f64,
    pub mape_median: f64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
}

impl Aggregate {
    pub fn from_records(records: &[FoldRecord]) -> Self {
        let mape: Vec<f64> = records.iter().map(|r| r.report.mape).collect();
        let rmse: Vec<f64> = records.iter().map(|r| r.report.rmse_last_cycle).collect();
        let (mape_mean, mape_std) = mean_std(&mape);
        let (rmse_mean, rmse_std) = mean_std(&rmse);
        Aggregate {
            n_records: records.len(),
            mape_mean,
            mape_std,
            mape_median: median(&mape),
            rmse_mean,
            rmse_std,
        }
    }
}

/// Fold-averaged curve point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub limit: u32,
    pub mape: Option<f64>,
    pub n_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ScenarioSpec,
    pub source: SubsetId,
    pub target: SubsetId,
    pub category: Category,
    pub config_hash: String,
    pub folds: Vec<FoldRecord>,
    pub aggregate: Aggregate,
    pub curve: Vec<CurveRow>,
}

/// Per-limit mean over the records that produced a value at that limit.
pub fn average_curves(limits: &[u32], records: &[FoldRecord]) -> Vec<CurveRow> {
    limits
        .iter()
        .enumerate()
        .map(|(i, &limit)| {
            let vals: Vec<f64> = records.iter().filter_map(|r| r.curve.get(i).and_then(|p| p.1)).collect();
            CurveRow {
                limit,
                mape: (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64),
                n_records: vals.len(),
            }
        })
        .collect()
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Parsed subsets shared between runs.
#[derive(Debug)]
pub struct DataStore {
    root: PathBuf,
    cache: Mutex<BTreeMap<(SubsetId, Split), Arc<Subset>>>,
}

impl DataStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DataStore {
            root: root.into(),
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    /// Uses `explicit` if given, else the `COSMO_RUL_DATA_ROOT` variable.
    pub fn resolve_root(explicit: Option<&Path>) -> Result<PathBuf> {
        if let Some(p) = explicit {
            return Ok(p.to_path_buf());
        }
        std::env::var_os(DATA_ROOT_ENV)
            .map(PathBuf::from)
            .ok_or_else(|| RunError::Config(format!("no data root given and {DATA_ROOT_ENV} is unset")))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn get(&self, id: SubsetId, split: Split) -> Result<Arc<Subset>> {
        if let Some(s) = self.cache.lock().expect("cache lock").get(&(id, split)) {
            return Ok(Arc::clone(s));
        }
        let subset = Arc::new(load_subset(&self.root, id, split)?);
        self.cache
            .lock()
            .expect("cache lock")
            .insert((id, split), Arc::clone(&subset));
        Ok(subset)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent child seed for a numbered stream.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix(base ^ splitmix(stream))
}

/// Shuffles trajectory indices and cuts them into `folds` contiguous,
/// near-equal blocks; returns the fold of each trajectory.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos * folds / n;
    }
    fold
}

fn samples_of(trajs: &[&Trajectory]) -> Vec<Sample> {
    trajs.iter().flat_map(|t| t.samples().iter().copied()).collect()
}

fn nominal(trajs: &[&Trajectory], tau: usize) -> NominalPool {
    NominalPool {
        samples: trajs.iter().flat_map(|t| t.samples().iter().take(tau).copied()).collect(),
        tau,
    }
}

struct Features {
    fit: DMatrix<f64>,
    predict: DMatrix<f64>,
    group_seed: Option<u64>,
    warnings: Vec<String>,
}

fn build_features(
    spec: &ScenarioSpec,
    fit: &[&Trajectory],
    eval_set: &[&Trajectory],
    group_seed: u64,
) -> Result<Features> {
    let fit_samples = samples_of(fit);
    let eval_samples = samples_of(eval_set);
    match spec.method {
        Method::Raw => Ok(Features {
            fit: adapt::raw_baseline(&fit_samples),
            predict: adapt::raw_baseline(&eval_samples),
            group_seed: None,
            warnings: Vec::new(),
        }),
        Method::Coral => {
            let s = adapt::raw_baseline(&fit_samples);
            let t = adapt::raw_baseline(&eval_samples);
            let tr = adapt::fit_coral(&s, &t, spec.coral_epsilon)?;
            let warnings = tr
                .warnings
                .iter()
                .map(|CoralWarning::RankDeficient { side, rows, dim }| {
                    format!("{side} covariance rank deficient ({rows} rows, {dim} columns)")
                })
                .collect();
            Ok(Features {
                fit: adapt::apply_coral(&tr, &s)?,
                predict: t,
                group_seed: None,
                warnings,
            })
        }
        Method::Cosmo { distance, mode } => {
            let pool_s = nominal(fit, spec.tau);
            let pool_t = nominal(eval_set, spec.tau);
            let (g_fit, g_pred) = build_mode_groups(mode, &pool_s, &pool_t, spec.group_size, group_seed)?;
            Ok(Features {
                fit: cosmo::feature_matrix(&fit_samples, &g_fit, distance)?.to_matrix(),
                predict: cosmo::feature_matrix(&eval_samples, &g_pred, distance)?.to_matrix(),
                group_seed: Some(group_seed),
                warnings: Vec::new(),
            })
        }
    }
}

/// Runs every repetition and fold of one scenario.
///
/// Source training trajectories are split into folds at trajectory level;
/// each fold fits on the other folds. Predictions are scored on every
/// target trajectory, except when source and target are the same
/// run-to-failure set, where the held-out fold is the target so no unit is
/// scored by a model that saw it.
pub fn run_scenario(spec: &ScenarioSpec, store: &DataStore) -> Result<ExperimentResult> {
    spec.validate()?;
    let source = store.get(spec.source(), Split::Alpha)?;
    let target = store.get(spec.target(), spec.eval_mode)?;
    let same_set = spec.source() == spec.target() && spec.eval_mode == Split::Alpha;
    let n = source.trajectories().len();
    if n < spec.folds {
        return Err(RunError::InvalidSpec(format!(
            "{} source trajectories cannot fill {} folds",
            n, spec.folds
        )));
    }
    if target.trajectories().is_empty() {
        return Err(RunError::InvalidSpec(format!("target {} has no trajectories", spec.target())));
    }

    let mut records = Vec::with_capacity(spec.repetitions * spec.folds);
    for rep in 0..spec.repetitions {
        let rep_seed = derive_seed(spec.seed, rep as u64);
        let assignment = fold_assignment(n, spec.folds, rep_seed);
        for fold in 0..spec.folds {
            let fit: Vec<&Trajectory> = source
                .trajectories()
                .iter()
                .zip(&assignment)
                .filter(|(_, &f)| f != fold)
                .map(|(t, _)| t)
                .collect();
            let eval_set: Vec<&Trajectory> = if same_set {
                source
                    .trajectories()
                    .iter()
                    .zip(&assignment)
                    .filter(|(_, &f)| f == fold)
                    .map(|(t, _)| t)
                    .collect()
            } else {
                target.trajectories().iter().collect()
            };
            let forest_seed = derive_seed(rep_seed, 1000 + fold as u64);
            let group_seed = derive_seed(rep_seed, 2000 + fold as u64);
            let features = build_features(spec, &fit, &eval_set, group_seed)?;

            let mut y = Vec::with_capacity(features.fit.nrows());
            for t in &fit {
                y.extend(label_rul(t, spec.tau_max)?.values.iter().map(|&v| v as f64));
            }
            let config = spec.forest.clone().with_seed(forest_seed);
            let forest = regress::fit(&features.fit, &y, &config)?;
            let pred = forest.predict(&features.predict)?;

            let mut units = Vec::with_capacity(eval_set.len());
            let mut offset = 0;
            for t in &eval_set {
                let truth: Vec<f64> = t.targets(spec.tau_max).values.iter().map(|&v| v as f64).collect();
                units.push(UnitPrediction::from_series(t.unit_id, &truth, &pred[offset..offset + t.len()])?);
                offset += t.len();
            }
            let report = eval::mape_fleet(&units, spec.rul_limit)?;
            let curve = if spec.curve_limits.is_empty() {
                Vec::new()
            } else {
                eval::mape_vs_rul_limit(&units, &spec.curve_limits)?
                    .into_iter()
                    .map(|p| (p.limit, p.mape.ok()))
                    .collect()
            };
            records.push(FoldRecord {
                repetition: rep,
                fold,
                seed: rep_seed,
                forest_seed,
                group_seed: features.group_seed,
                n_fit_units: fit.len(),
                n_eval_units: eval_set.len(),
                report,
                curve,
                warnings: features.warnings,
            });
        }
    }

    Ok(ExperimentResult {
        source: spec.source(),
        target: spec.target(),
        category: spec.scenario.category(),
        config_hash: spec.config_hash(),
        aggregate: Aggregate::from_records(&records),
        curve: average_curves(&spec.curve_limits, &records),
        folds: records,
        spec: spec.clone(),
    })
}

/// Runs specs one after another. A failing scenario is reported in place and
/// does not stop the others. When `out` is given each finished scenario is
/// written immediately, together with an updated `summary.json`.
pub fn run_matrix(
    specs: &[ScenarioSpec],
    store: &DataStore,
    out: Option<&Path>,
) -> Result<Vec<std::result::Result<ExperimentResult, RunError>>> {
    if specs.is_empty() {
        return Err(RunError::InvalidSpec("empty scenario list".into()));
    }
    let mut summary = match out {
        Some(dir) => Summary::load_or_default(&dir.join("summary.json"))?,
        None => Summary::default(),
    };
    let mut results = Vec::with_capacity(specs.len());
    for spec in specs {
        let res = run_scenario(spec, store);
        if let Some(dir) = out {
            match &res {
                Ok(r) => {
                    write_experiment(dir, r)?;
                    summary.record(r);
                }
                Err(e) => summary.record_error(spec, e),
            }
            summary.save(&dir.join("summary.json"))?;
        }
        results.push(res);
    }
    Ok(results)
}

/// Every COSMO variant of a distance method, plus the two baselines.
pub fn default_methods(k: usize) -> Vec<Method> {
    let mut m = vec![Method::Raw, Method::Coral];
    for mode in ReferenceMode::ALL {
        m.push(Method::cosmo(DistanceMethod::MknnMedian { k }, mode));
    }
    m
}

impl Default for Method {
    fn default() -> Self {
        Method::cosmo(DistanceMethod::MknnMedian { k: DEFAULT_K }, ReferenceMode::ST_ST)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::write_synthetic_cmapss;

    #[test]
    fn scenario_table() {
        use SubsetId::*;
        assert_eq!(Scenario::D.subsets(), (FD001, FD004));
        assert_eq!(Scenario::C1.subsets(), (FD001, FD002));
        assert_eq!(Scenario::G2.subsets(), (FD003, FD002));
        assert_eq!(Scenario::D.category(), Category::NewFaultNewOcs);
        assert_eq!(Scenario::G2.category(), Category::FewerFaultNewOcs);
        assert_eq!(Scenario::G1.category(), Category::NewFaultFewerOcs);
        assert_eq!(Scenario::H.category(), Category::FewerFaultFewerOcs);
        let same: Vec<_> = Scenario::ALL.into_iter().filter(|s| s.category() == Category::SamePopulation).collect();
        assert_eq!(same, [Scenario::A1, Scenario::A2, Scenario::A3, Scenario::A4]);
        for pair in Scenario::ALL.iter().flat_map(|a| Scenario::ALL.iter().map(move |b| (a, b))) {
            if pair.0 != pair.1 {
                assert_ne!(pair.0.subsets(), pair.1.subsets());
            }
        }
        assert_eq!("c1".parse::<Scenario>().unwrap(), Scenario::C1);
        assert!("Z9".parse::<Scenario>().is_err());
    }

    #[test]
    fn method_tags() {
        let m = Method::parse("cosmo", "mknn", 8, "ST,ST").unwrap();
        assert_eq!(m.tag(), "cosmo-mknn-k8-ST-ST");
        assert_eq!(Method::parse("RAW", "", 0, "").unwrap(), Method::Raw);
        assert!(Method::parse("tca", "", 0, "").is_err());
        let spec = ScenarioSpec::new(Scenario::C1, Split::Alpha, m);
        assert_eq!(spec.stem(), "C1-alpha_cosmo-mknn-k8-ST-ST");
    }

    #[test]
    fn folds_partition_trajectories() {
        let a = fold_assignment(10, 4, 3);
        let mut counts = [0; 4];
        for &f in &a {
            counts[f] += 1;
        }
        assert_eq!(counts.iter().sum::<usize>(), 10);
        assert!(counts.iter().all(|&c| c == 2 || c == 3));
        assert_eq!(a, fold_assignment(10, 4, 3));
    }

    #[test]
    fn config_hash_tracks_spec() {
        let a = ScenarioSpec::new(Scenario::A1, Split::Beta, Method::Raw);
        assert_eq!(a.config_hash(), a.clone().config_hash());
        assert_ne!(a.config_hash(), a.clone().with_seed(1).config_hash());
    }

    #[test]
    fn synthetic_runs_for_every_method() {
        let dir = tempfile::tempdir().unwrap();
        write_synthetic_cmapss(dir.path(), 8, 5).unwrap();
        let store = DataStore::new(dir.path());
        for method in default_methods(4) {
            for (sc, mode) in [(Scenario::A1, Split::Alpha), (Scenario::C1, Split::Beta)] {
                let mut spec = ScenarioSpec::new(sc, mode, method).with_trees(5);
                spec.group_size = 40;
                let r = run_scenario(&spec, &store).unwrap();
                assert_eq!(r.folds.len(), 4);
                assert_eq!(r.aggregate, Aggregate::from_records(&r.folds));
                assert!(r.aggregate.mape_mean.is_finite());
                for f in &r.folds {
                    assert_eq!(f.n_fit_units, 6);
                    let expected_eval = if sc == Scenario::A1 { 2 } else { 8 };
                    assert_eq!(f.n_eval_units, expected_eval);
                    assert_eq!(f.group_seed.is_some(), matches!(method, Method::Cosmo { .. }));
                }
            }
        }
    }

    #[test]
    fn missing_data_is_isolated() {
        let dir = tempfile::tempdir().unwrap();
        write_synthetic_cmapss(dir.path(), 5, 1).unwrap();
        std::fs::remove_file(dir.path().join("train_FD003.txt")).unwrap();
        let store = DataStore::new(dir.path());
        let specs: Vec<ScenarioSpec> = [Scenario::A1, Scenario::A3, Scenario::A2]
            .into_iter()
            .map(|s| ScenarioSpec::new(s, Split::Alpha, Method::Raw).with_trees(3))
            .collect();
        let out = tempfile::tempdir().unwrap();
        let res = run_matrix(&specs, &store, Some(out.path())).unwrap();
        assert!(res[0].is_ok() && res[1].is_err() && res[2].is_ok());
        let summary = read_summary(&out.path().join("summary.json")).unwrap();
        assert_eq!(summary.errors.len(), 1);
        assert_eq!(summary.scenarios.values().map(Vec::len).sum::<usize>(), 2);
    }
}
