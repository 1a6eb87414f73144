use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cosmo-rul"))
        .args(args)
        .env_remove("COSMO_RUL_DATA_ROOT")
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn synth(dir: &Path) {
    let o = cli(&["synth", "--units", "6", "--seed", "3", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
}

#[test]
fn no_arguments_prints_usage_and_fails() {
    let o = cli(&[]);
    assert!(!o.status.success());
    assert!(text(&o).contains("Usage"), "{}", text(&o));
}

#[test]
fn unknown_subcommand_and_flag_fail() {
    assert!(!cli(&["explode"]).status.success());
    let o = cli(&["run", "--scenario", "C1", "--frobnicate"]);
    assert!(!o.status.success());
    assert!(text(&o).contains("Usage"));
}

#[test]
fn missing_data_root_is_a_diagnosed_failure() {
    let out = tempfile::tempdir().unwrap();
    let o = cli(&["run", "--scenario", "A1", "--method", "raw", "--out", out.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(text(&o).contains("COSMO_RUL_DATA_ROOT"), "{}", text(&o));
}

#[test]
fn run_writes_one_experiment() {
    let data = tempfile::tempdir().unwrap();
    synth(data.path());
    let out = tempfile::tempdir().unwrap();
    let o = cli(&[
        "run", "--scenario", "C1", "--method", "cosmo", "--distance", "mknn", "--mode", "ST,ST", "--trees", "4",
        "--group-size", "40", "--data-root", data.path().to_str().unwrap(), "--out", out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let stem = "C1-alpha_cosmo-mknn-k8-ST-ST";
    let results = std::fs::read_to_string(out.path().join(format!("results/{stem}.csv"))).unwrap();
    assert_eq!(results.lines().count(), 1 + 4);
    assert!(results.starts_with("scenario,eval_mode,source,target,method,reference_mode,distance,k,"));
    let curve = std::fs::read_to_string(out.path().join(format!("curves/{stem}.csv"))).unwrap();
    assert!(curve.starts_with("limit,mape"));
    assert_eq!(curve.lines().count(), 1 + 130);
    assert!(out.path().join("summary.json").exists());

    let r = cli(&["report", "--out", out.path().to_str().unwrap()]);
    assert!(r.status.success(), "{}", text(&r));
    assert!(text(&r).contains("new OCs"));
    assert!(out.path().join("report.csv").exists());
    assert!(out.path().join("report_categories.csv").exists());
}

#[test]
fn matrix_writes_one_file_per_scenario() {
    let data = tempfile::tempdir().unwrap();
    synth(data.path());
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("scenarios.toml");
    std::fs::write(
        &cfg,
        format!(
            "data_root = {:?}\nout = {:?}\nseed = 5\nrepetitions = 1\nscenarios = [\"A1\", \"B1\", \"D\"]\nmethods = [\"raw\"]\nn_trees = 3\n",
            data.path(),
            out.path().join("m")
        ),
    )
    .unwrap();
    let o = cli(&["matrix", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    let mut files: Vec<String> = std::fs::read_dir(out.path().join("m/results"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(files, ["A1-alpha_raw.csv", "B1-alpha_raw.csv", "D-alpha_raw.csv"]);
}

#[test]
fn curves_accepts_limit_ranges() {
    let data = tempfile::tempdir().unwrap();
    synth(data.path());
    let out = tempfile::tempdir().unwrap();
    let o = cli(&[
        "curves", "--scenario", "A1", "--eval-mode", "beta", "--method", "raw", "--trees", "3", "--limits", "10,50,100",
        "--data-root", data.path().to_str().unwrap(), "--out", out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let curve = std::fs::read_to_string(out.path().join("curves/A1-beta_raw.csv")).unwrap();
    let limits: Vec<&str> = curve.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(limits, ["10", "50", "100"]);
}

#[test]
fn features_and_parse() {
    let data = tempfile::tempdir().unwrap();
    synth(data.path());
    let out = tempfile::tempdir().unwrap();
    let root = data.path().to_str().unwrap();
    let o = cli(&["parse", "--cache", "--data-root", root, "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("FD004 beta: 6 units"));
    assert!(out.path().join("cache/FD002-alpha.json").exists());

    let o = cli(&[
        "features", "--scenario", "C1", "--distance", "knn", "--k", "4", "--mode", "S,T", "--data-root", root,
        "--out", out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("6 estimated operating conditions"), "{}", text(&o));
    let theta = std::fs::read_to_string(out.path().join("features/C1-alpha_cosmo-knn-k4-S-T_target.csv")).unwrap();
    assert!(theta.starts_with("unit,cycle,theta_1,"));

    std::fs::remove_file(data.path().join("RUL_FD003.txt")).unwrap();
    let o = cli(&["parse", "--subset", "FD003", "--data-root", root]);
    assert!(!o.status.success());
}
