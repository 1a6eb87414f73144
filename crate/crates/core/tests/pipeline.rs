use std::collections::BTreeSet;

use proptest::prelude::*;

use cosmo_rul::cosmo::{DistanceMethod, ReferenceMode};
use cosmo_rul::dataset::{write_synthetic_cmapss, Split, SubsetId};
use cosmo_rul::runner::{
    experiment_rows, fold_assignment, run_matrix, run_scenario, Aggregate, DataStore, Method, Scenario, ScenarioSpec,
    RESULT_HEADER,
};

fn synthetic_store(units: usize, seed: u64) -> (tempfile::TempDir, DataStore) {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_cmapss(dir.path(), units, seed).unwrap();
    let store = DataStore::new(dir.path());
    (dir, store)
}

fn small(sc: Scenario, mode: Split, method: Method) -> ScenarioSpec {
    let mut s = ScenarioSpec::new(sc, mode, method).with_trees(8).with_seed(11);
    s.group_size = 40;
    s
}

proptest! {
    #[test]
    fn folds_are_trajectory_level_partitions(n in 4usize..200, folds in 2usize..6, seed in any::<u64>()) {
        prop_assume!(n >= folds);
        let a = fold_assignment(n, folds, seed);
        prop_assert_eq!(a.len(), n);
        let mut sizes = vec![0usize; folds];
        for &f in &a {
            prop_assert!(f < folds);
            sizes[f] += 1;
        }
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        prop_assert!(*lo >= 1 && hi - lo <= 1);
    }
}

#[test]
fn same_population_alpha_never_scores_a_fitted_unit() {
    let (_d, store) = synthetic_store(10, 2);
    let r = run_scenario(&small(Scenario::A3, Split::Alpha, Method::Raw).with_repetitions(2), &store).unwrap();
    for f in &r.folds {
        assert_eq!(f.n_fit_units + f.n_eval_units, 10);
    }
    let held_out: usize = r.folds.iter().filter(|f| f.repetition == 0).map(|f| f.n_eval_units).sum();
    assert_eq!(held_out, 10);
}

#[test]
fn scenario_resolves_subsets() {
    let spec = ScenarioSpec::new(Scenario::D, Split::Alpha, Method::Raw);
    assert_eq!((spec.source(), spec.target()), (SubsetId::FD001, SubsetId::FD004));
}

#[test]
fn repeated_runs_are_identical() {
    let (_d, store) = synthetic_store(8, 4);
    let spec = small(Scenario::B1, Split::Beta, Method::cosmo(DistanceMethod::KnnMean { k: 4 }, ReferenceMode::ST_T));
    let a = run_scenario(&spec, &store).unwrap();
    let b = run_scenario(&spec, &store).unwrap();
    assert_eq!(a, b);
    let c = run_scenario(&spec.clone().with_seed(12), &store).unwrap();
    assert_ne!(a.folds, c.folds);
}

#[test]
fn result_rows_carry_provenance() {
    let (_d, store) = synthetic_store(8, 5);
    let spec = small(Scenario::C2, Split::Alpha, Method::cosmo(DistanceMethod::MknnMedian { k: 8 }, ReferenceMode::S_ST));
    let r = run_scenario(&spec, &store).unwrap();
    assert_eq!(r.aggregate, Aggregate::from_records(&r.folds));
    let rows = experiment_rows(&r);
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert_eq!(row.len(), RESULT_HEADER.len());
        for (name, value) in RESULT_HEADER.iter().zip(&row) {
            assert!(!value.is_empty(), "{name} is empty");
        }
        assert_eq!(&row[5], "S,ST");
        assert_eq!(&row[6], "mknn");
        assert_eq!(&row[7], "8");
    }
}

#[test]
fn same_population_matrix_has_four_records() {
    let (_d, store) = synthetic_store(6, 6);
    let specs: Vec<ScenarioSpec> = [Scenario::A1, Scenario::A2, Scenario::A3, Scenario::A4]
        .into_iter()
        .map(|s| small(s, Split::Alpha, Method::Raw))
        .collect();
    let res = run_matrix(&specs, &store, None).unwrap();
    assert_eq!(res.iter().filter(|r| r.is_ok()).count(), 4);
}

#[test]
fn matrix_outputs_are_written_as_scenarios_finish() {
    let (_d, store) = synthetic_store(6, 7);
    let out = tempfile::tempdir().unwrap();
    let specs = vec![small(Scenario::E1, Split::Alpha, Method::Raw), small(Scenario::H, Split::Beta, Method::Coral)];
    run_matrix(&specs, &store, Some(out.path())).unwrap();
    let names: BTreeSet<String> = std::fs::read_dir(out.path().join("results"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, BTreeSet::from(["E1-alpha_raw.csv".to_string(), "H-beta_coral.csv".to_string()]));
}

/// Synthetic stand-in for the new-operating-condition transfer claim: the
/// generator shares one degradation model across six conditions, so peer
/// distances should transfer where raw sensor values cannot.
#[test]
fn synthetic_proxy_cosmo_beats_raw_on_new_conditions() {
    let (_d, store) = synthetic_store(24, 8);
    let cosmo = run_scenario(
        &small(Scenario::C1, Split::Alpha, Method::cosmo(DistanceMethod::MknnMedian { k: 8 }, ReferenceMode::ST_ST)).with_trees(20),
        &store,
    )
    .unwrap();
    let raw = run_scenario(&small(Scenario::C1, Split::Alpha, Method::Raw).with_trees(20), &store).unwrap();
    println!(
        "synthetic C1 alpha: cosmo {:.4}, raw {:.4}",
        cosmo.aggregate.mape_mean, raw.aggregate.mape_mean
    );
    assert!(cosmo.aggregate.mape_mean < raw.aggregate.mape_mean);
}
