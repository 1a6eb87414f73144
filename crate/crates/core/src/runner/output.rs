//! Result files: per-fold CSV rows, fold-averaged curves, and the
//! `summary.json` index.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_error, Aggregate, Category, ExperimentResult, Method, Result, RunError, Scenario, ScenarioSpec};
use crate::dataset::{Split, SubsetId};

pub const RESULT_HEADER: [&str; 24] = [
    "scenario",
    "eval_mode",
    "source",
    "target",
    "method",
    "reference_mode",
    "distance",
    "k",
    "group_size",
    "tau",
    "tau_max",
    "rul_limit",
    "repetition",
    "fold",
    "seed",
    "forest_seed",
    "group_seed",
    "n_fit_units",
    "n_eval_units",
    "n_units_included",
    "n_units_excluded",
    "mape",
    "rmse_last_cycle",
    "config_hash",
];

/// One row per (repetition, fold), each carrying full provenance.
pub fn experiment_rows(r: &ExperimentResult) -> Vec<Vec<String>> {
    let s = &r.spec;
    let (mode, distance, k) = match s.method {
        Method::Cosmo { distance, mode } => (
            mode.to_string(),
            distance.name().to_string(),
            distance.k().map(|k| k.to_string()).unwrap_or_default(),
        ),
        _ => Default::default(),
    };
    r.folds
        .iter()
        .map(|f| {
            vec![
                s.scenario.to_string(),
                s.eval_mode.to_string(),
                r.source.to_string(),
                r.target.to_string(),
                s.method.name().to_string(),
                mode.clone(),
                distance.clone(),
                k.clone(),
                s.group_size.to_string(),
                s.tau.to_string(),
                s.tau_max.to_string(),
                s.rul_limit.to_string(),
                f.repetition.to_string(),
                f.fold.to_string(),
                f.seed.to_string(),
                f.forest_seed.to_string(),
                f.group_seed.map(|g| g.to_string()).unwrap_or_default(),
                f.n_fit_units.to_string(),
                f.n_eval_units.to_string(),
                f.report.n_units_included.to_string(),
                f.report.n_units_excluded.to_string(),
                f.report.mape.to_string(),
                f.report.rmse_last_cycle.to_string(),
                r.config_hash.clone(),
            ]
        })
        .collect()
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    Ok(())
}

pub fn write_result_csv(path: &Path, r: &ExperimentResult) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(RESULT_HEADER).map_err(|e| io_error(path, e))?;
    for row in experiment_rows(r) {
        w.write_record(&row).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Two-column `limit,mape` curve plus the number of folds behind each point.
/// Limits where every fold excluded every unit are left blank.
pub fn write_curve_csv(path: &Path, r: &ExperimentResult) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(["limit", "mape", "n_records"]).map_err(|e| io_error(path, e))?;
    for row in &r.curve {
        w.write_record([
            row.limit.to_string(),
            row.mape.map(|m| m.to_string()).unwrap_or_default(),
            row.n_records.to_string(),
        ])
        .map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Writes `results/<stem>.csv` and `curves/<stem>.csv` under `dir`.
pub fn write_experiment(dir: &Path, r: &ExperimentResult) -> Result<()> {
    let stem = r.spec.stem();
    write_result_csv(&dir.join("results").join(format!("{stem}.csv")), r)?;
    write_curve_csv(&dir.join("curves").join(format!("{stem}.csv")), r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub stem: String,
    pub scenario: Scenario,
    pub category: Category,
    pub eval_mode: Split,
    pub source: SubsetId,
    pub target: SubsetId,
    pub method: String,
    pub seed: u64,
    pub repetitions: usize,
    pub folds: usize,
    pub config_hash: String,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub stem: String,
    pub error: String,
}

/// Aggregates nested by scenario label, plus failed runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenarios: BTreeMap<String, Vec<SummaryEntry>>,
    pub errors: Vec<ErrorEntry>,
}

impl Summary {
    pub fn load_or_default(path: &Path) -> Result<Self> {
        if path.exists() {
            read_summary(path)
        } else {
            Ok(Summary::default())
        }
    }

    /// Inserts or replaces the entry with the same stem.
    pub fn record(&mut self, r: &ExperimentResult) {
        let stem = r.spec.stem();
        self.remove(&stem);
        let entry = SummaryEntry {
            stem,
            scenario: r.spec.scenario,
            category: r.category,
            eval_mode: r.spec.eval_mode,
            source: r.source,
            target: r.target,
            method: r.spec.method.tag(),
            seed: r.spec.seed,
            repetitions: r.spec.repetitions,
            folds: r.spec.folds,
            config_hash: r.config_hash.clone(),
            aggregate: r.aggregate.clone(),
        };
        let list = self.scenarios.entry(r.spec.scenario.to_string()).or_default();
        list.push(entry);
        list.sort_by(|a, b| a.stem.cmp(&b.stem));
    }

    pub fn record_error(&mut self, spec: &ScenarioSpec, e: &RunError) {
        let stem = spec.stem();
        self.remove(&stem);
        self.errors.push(ErrorEntry {
            stem,
            error: e.to_string(),
        });
        self.errors.sort_by(|a, b| a.stem.cmp(&b.stem));
    }

    fn remove(&mut self, stem: &str) {
        for list in self.scenarios.values_mut() {
            list.retain(|e| e.stem != stem);
        }
        self.scenarios.retain(|_, v| !v.is_empty());
        self.errors.retain(|e| e.stem != stem);
    }

    pub fn entries(&self) -> impl Iterator<Item = &SummaryEntry> {
        self.scenarios.values().flatten()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        create_parent(path)?;
        let text = serde_json::to_string_pretty(self).expect("summary serialization cannot fail");
        std::fs::write(path, text + "\n").map_err(|e| io_error(path, e))
    }

    /// Mean of per-scenario aggregate MAPE and RMSE within each
    /// (category, eval mode, method) group.
    pub fn category_means(&self) -> Vec<CategoryRow> {
        let mut groups: BTreeMap<(Category, Split, String), Vec<&SummaryEntry>> = BTreeMap::new();
        for e in self.entries() {
            groups.entry((e.category, e.eval_mode, e.method.clone())).or_default().push(e);
        }
        groups
            .into_iter()
            .map(|((category, eval_mode, method), es)| {
                let n = es.len() as f64;
                CategoryRow {
                    category,
                    eval_mode,
                    method,
                    scenarios: es.iter().map(|e| e.scenario).collect(),
                    mape_mean: es.iter().map(|e| e.aggregate.mape_mean).sum::<f64>() / n,
                    rmse_mean: es.iter().map(|e| e.aggregate.rmse_mean).sum::<f64>() / n,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryRow {
    pub category: Category,
    pub eval_mode: Split,
    pub method: String,
    pub scenarios: Vec<Scenario>,
    pub mape_mean: f64,
    pub rmse_mean: f64,
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_error(path, e))
}
