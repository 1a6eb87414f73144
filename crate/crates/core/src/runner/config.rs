//! TOML run configuration. Every key is optional; list keys span the
//! scenario matrix and scalar keys override the per-scenario defaults.
//!
//! ```toml
//! data_root = "data/CMAPSS"
//! out = "out"
//! seed = 7
//! repetitions = 10
//! scenarios = ["A1", "C1", "D"]      # or ["all"]
//! eval_modes = ["alpha"]
//! methods = ["raw", "coral", "cosmo"]
//! distances = ["mknn"]
//! reference_modes = ["S,T", "ST,ST"]
//! k = 8
//! n_trees = 100
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{io_error, Method, Result, RunError, Scenario, ScenarioSpec};
use crate::cosmo::{ReferenceMode, DEFAULT_K};
use crate::dataset::Split;

/// Repetitions of a matrix sweep unless configured otherwise.
pub const MATRIX_REPETITIONS: usize = 10;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub data_root: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub repetitions: Option<usize>,
    pub folds: Option<usize>,
    pub scenarios: Option<Vec<String>>,
    pub eval_modes: Option<Vec<String>>,
    pub methods: Option<Vec<String>>,
    pub distances: Option<Vec<String>>,
    pub reference_modes: Option<Vec<String>>,
    pub k: Option<usize>,
    pub group_size: Option<usize>,
    pub tau: Option<usize>,
    pub tau_max: Option<u32>,
    pub rul_limit: Option<u32>,
    pub coral_epsilon: Option<f64>,
    pub curve_limits: Option<Vec<u32>>,
    pub n_trees: Option<usize>,
    pub max_features: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub max_depth: Option<usize>,
    pub bootstrap: Option<bool>,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::from_toml(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(DEFAULT_K)
    }

    /// Copies the scalar knobs that are set onto `spec`.
    pub fn apply(&self, spec: &mut ScenarioSpec) {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v; })*
            };
        }
        set!(
            seed => spec.seed,
            repetitions => spec.repetitions,
            folds => spec.folds,
            group_size => spec.group_size,
            tau => spec.tau,
            tau_max => spec.tau_max,
            rul_limit => spec.rul_limit,
            coral_epsilon => spec.coral_epsilon,
            curve_limits => spec.curve_limits,
            n_trees => spec.forest.n_trees,
            min_samples_leaf => spec.forest.min_samples_leaf,
            bootstrap => spec.forest.bootstrap,
        );
        if self.max_features.is_some() {
            spec.forest.max_features = self.max_features;
        }
        if self.max_depth.is_some() {
            spec.forest.max_depth = self.max_depth;
        }
    }

    /// Cross product of scenarios, evaluation modes and methods. COSMO
    /// expands further over distances and reference modes.
    pub fn specs(&self) -> Result<Vec<ScenarioSpec>> {
        let scenarios = match &self.scenarios {
            None => Scenario::ALL.to_vec(),
            Some(v) if v.iter().any(|s| s.eq_ignore_ascii_case("all")) => Scenario::ALL.to_vec(),
            Some(v) => v.iter().map(|s| s.parse()).collect::<Result<Vec<Scenario>>>()?,
        };
        let modes = match &self.eval_modes {
            None => vec![Split::Alpha],
            Some(v) => v.iter().map(|s| s.parse::<Split>()).collect::<std::result::Result<Vec<_>, _>>()?,
        };
        let method_names = self
            .methods
            .clone()
            .unwrap_or_else(|| vec!["raw".into(), "coral".into(), "cosmo".into()]);
        let distances = self.distances.clone().unwrap_or_else(|| vec!["mknn".into()]);
        let ref_modes = self
            .reference_modes
            .clone()
            .unwrap_or_else(|| ReferenceMode::ALL.iter().map(ToString::to_string).collect());

        let mut methods = Vec::new();
        for name in &method_names {
            if name.eq_ignore_ascii_case("cosmo") {
                for d in &distances {
                    for m in &ref_modes {
                        methods.push(Method::parse(name, d, self.k(), m)?);
                    }
                }
            } else {
                methods.push(Method::parse(name, "", self.k(), "")?);
            }
        }

        let mut specs = Vec::new();
        for &sc in &scenarios {
            for &mode in &modes {
                for &method in &methods {
                    let mut spec = ScenarioSpec::new(sc, mode, method).with_repetitions(MATRIX_REPETITIONS);
                    self.apply(&mut spec);
                    specs.push(spec);
                }
            }
        }
        if specs.is_empty() {
            return Err(RunError::Config("configuration selects no scenarios".into()));
        }
        Ok(specs)
    }
}
