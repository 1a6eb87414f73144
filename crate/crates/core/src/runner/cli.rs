use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::Config;
use super::{
    derive_seed, read_summary, run_matrix, DataStore, ExperimentResult, Method, Result, RunError,
    Scenario, ScenarioSpec,
};
use crate::cosmo::{
    build_mode_groups, check_k_condition, estimate_num_conditions, feature_matrix, write_feature_csv,
    DistanceMethod, EigengapConfig, ReferenceMode,
};
use crate::dataset::{extract_nominal, load_subset, write_synthetic_cmapss, Split, SubsetId, Trajectory};

#[derive(Debug, Parser)]
#[command(
    name = "cosmo-rul",
    version,
    about = "Peer-distance features and random-forest RUL prediction across C-MAPSS subsets",
    arg_required_else_help = true
)]
struct Cli {
    /// Base seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory holding train_FD00x.txt, test_FD00x.txt and RUL_FD00x.txt.
    #[arg(long, global = true)]
    data_root: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate subset files and print their shape; with --cache also write
    /// JSON copies under <out>/cache.
    Parse {
        #[arg(long = "subset", value_parser = parse_subset)]
        subsets: Vec<SubsetId>,
        #[arg(long)]
        cache: bool,
    },
    /// Write the COSMO feature matrices of a scenario's source and target.
    Features {
        #[arg(long, value_parser = parse_scenario)]
        scenario: Scenario,
        #[arg(long, default_value = "alpha", value_parser = parse_split)]
        eval_mode: Split,
        #[command(flatten)]
        cosmo: CosmoArgs,
    },
    /// Run one scenario with one method.
    Run(RunArgs),
    /// Run every scenario selected by the config file.
    Matrix,
    /// Run one scenario and write its MAPE versus RUL-limit curve.
    Curves {
        #[command(flatten)]
        run: RunArgs,
        /// Limits as a list (10,20,30) or inclusive range (1-130).
        #[arg(long, value_parser = parse_limits)]
        limits: Option<Limits>,
    },
    /// Summarise <out>/summary.json into report tables.
    Report,
    /// Write a synthetic dataset in C-MAPSS layout (all four subsets) to
    /// --out, for trying the pipeline without the public files.
    Synth {
        #[arg(long, default_value_t = 20)]
        units: usize,
    },
}

#[derive(Debug, Args)]
struct CosmoArgs {
    /// knn, mknn or mcp.
    #[arg(long, default_value = "mknn")]
    distance: String,
    #[arg(long)]
    k: Option<usize>,
    /// Reference mode: S,T  S,ST  ST,ST  or  ST,T.
    #[arg(long = "mode", default_value = "ST,ST")]
    reference_mode: String,
    #[arg(long)]
    group_size: Option<usize>,
    #[arg(long)]
    tau: Option<usize>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_scenario)]
    scenario: Scenario,
    #[arg(long, default_value = "alpha", value_parser = parse_split)]
    eval_mode: Split,
    /// raw, coral or cosmo.
    #[arg(long, default_value = "cosmo")]
    method: String,
    #[command(flatten)]
    cosmo: CosmoArgs,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
}

fn parse_scenario(s: &str) -> std::result::Result<Scenario, String> {
    s.parse().map_err(|e: RunError| e.to_string())
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    s.parse().map_err(|e: crate::dataset::DatasetError| e.to_string())
}

fn parse_subset(s: &str) -> std::result::Result<SubsetId, String> {
    s.parse().map_err(|e: crate::dataset::DatasetError| e.to_string())
}

/// Wrapper so clap takes the parsed list as one value.
#[derive(Debug, Clone)]
struct Limits(Vec<u32>);

fn parse_limits(s: &str) -> std::result::Result<Limits, String> {
    parse_limit_list(s).map(Limits)
}

fn parse_limit_list(s: &str) -> std::result::Result<Vec<u32>, String> {
    let num = |x: &str| x.trim().parse::<u32>().map_err(|e| format!("bad limit '{x}': {e}"));
    if let Some((a, b)) = s.split_once('-') {
        let (a, b) = (num(a)?, num(b)?);
        if a == 0 || a > b {
            return Err(format!("bad limit range '{s}'"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(num).collect()
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

struct Context {
    config: Config,
    seed: Option<u64>,
    data_root: Option<PathBuf>,
    out: PathBuf,
}

impl Context {
    fn store(&self) -> Result<DataStore> {
        Ok(DataStore::new(DataStore::resolve_root(self.data_root.as_deref())?))
    }

    fn k(&self, args: &CosmoArgs) -> usize {
        args.k.unwrap_or(self.config.k())
    }

    fn spec(&self, a: &RunArgs) -> Result<ScenarioSpec> {
        let method = Method::parse(&a.method, &a.cosmo.distance, self.k(&a.cosmo), &a.cosmo.reference_mode)?;
        let mut spec = ScenarioSpec::new(a.scenario, a.eval_mode, method);
        self.config.apply(&mut spec);
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        macro_rules! set {
            ($($src:expr => $dst:expr),*) => { $(if let Some(v) = $src { $dst = v; })* };
        }
        set!(
            a.repetitions => spec.repetitions,
            a.folds => spec.folds,
            a.trees => spec.forest.n_trees,
            a.cosmo.group_size => spec.group_size,
            a.cosmo.tau => spec.tau
        );
        Ok(spec)
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let ctx = Context {
        seed: cli.seed.or(config.seed),
        data_root: cli.data_root.clone().or_else(|| config.data_root.clone()),
        out: cli.out.clone().or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        config,
    };
    match cli.command {
        Command::Parse { subsets, cache } => parse_cmd(&ctx, &subsets, cache),
        Command::Features {
            scenario,
            eval_mode,
            cosmo,
        } => features_cmd(&ctx, scenario, eval_mode, &cosmo),
        Command::Run(args) => {
            let spec = ctx.spec(&args)?;
            run_cmd(&ctx, vec![spec])
        }
        Command::Matrix => {
            if cli.config.is_none() {
                return Err(RunError::Config("matrix needs --config".into()));
            }
            let mut specs = ctx.config.specs()?;
            if let Some(s) = cli.seed {
                specs.iter_mut().for_each(|sp| sp.seed = s);
            }
            run_cmd(&ctx, specs)
        }
        Command::Curves { run, limits } => {
            let mut spec = ctx.spec(&run)?;
            if let Some(l) = limits {
                spec.curve_limits = l.0;
            }
            let code = run_cmd(&ctx, vec![spec.clone()])?;
            if code == 0 {
                let path = ctx.out.join("curves").join(format!("{}.csv", spec.stem()));
                println!("curve written to {}", path.display());
            }
            Ok(code)
        }
        Command::Report => report_cmd(&ctx),
        Command::Synth { units } => {
            write_synthetic_cmapss(&ctx.out, units, ctx.seed.unwrap_or(0))?;
            println!("synthetic subsets written to {}", ctx.out.display());
            Ok(0)
        }
    }
}

fn parse_cmd(ctx: &Context, subsets: &[SubsetId], cache: bool) -> Result<i32> {
    let root = DataStore::resolve_root(ctx.data_root.as_deref())?;
    let ids = if subsets.is_empty() { SubsetId::ALL.to_vec() } else { subsets.to_vec() };
    let mut failures = 0;
    for id in ids {
        for split in [Split::Alpha, Split::Beta] {
            match load_subset(&root, id, split) {
                Ok(s) => {
                    let samples: Vec<_> = s.trajectories().iter().flat_map(|t| t.samples().iter().copied()).collect();
                    let oc = estimate_num_conditions(&samples, EigengapConfig::default())
                        .map(|n| n.to_string())
                        .unwrap_or_else(|e| format!("n/a ({e})"));
                    println!(
                        "{id} {split}: {} units, {} samples, estimated operating conditions {oc}",
                        s.trajectories().len(),
                        s.n_samples()
                    );
                    if cache {
                        let path = ctx.out.join("cache").join(format!("{id}-{split}.json"));
                        write_text(&path, &s.to_json())?;
                    }
                }
                Err(e) => {
                    eprintln!("{id} {split}: {e}");
                    failures += 1;
                }
            }
        }
    }
    Ok(i32::from(failures > 0))
}

fn features_cmd(ctx: &Context, scenario: Scenario, eval_mode: Split, a: &CosmoArgs) -> Result<i32> {
    let store = ctx.store()?;
    let k = ctx.k(a);
    let distance = DistanceMethod::parse(&a.distance, k)?;
    let mode: ReferenceMode = a.reference_mode.parse()?;
    let mut spec = ScenarioSpec::new(scenario, eval_mode, Method::cosmo(distance, mode));
    ctx.config.apply(&mut spec);
    if let Some(v) = a.group_size {
        spec.group_size = v;
    }
    if let Some(v) = a.tau {
        spec.tau = v;
    }
    let seed = ctx.seed.unwrap_or(spec.seed);

    let source = store.get(spec.source(), Split::Alpha)?;
    let target = store.get(spec.target(), eval_mode)?;
    let pool_s = extract_nominal(source.trajectories(), spec.tau)?;
    let pool_t = extract_nominal(target.trajectories(), spec.tau)?;
    let n_oc = estimate_num_conditions(&pool_t.samples, EigengapConfig::default())?;
    let k_ok = match distance.k() {
        Some(k) => check_k_condition(k, spec.group_size, n_oc),
        None => true,
    };
    println!(
        "target nominal pool: {n_oc} estimated operating conditions; k condition {}",
        if k_ok { "satisfied" } else { "VIOLATED" }
    );
    let group_seed = derive_seed(seed, 2000);
    let (g_fit, g_pred) = build_mode_groups(mode, &pool_s, &pool_t, spec.group_size, group_seed)?;
    for (side, trajs, group) in [("source", source.trajectories(), &g_fit), ("target", target.trajectories(), &g_pred)] {
        let (keys, samples) = keyed_samples(trajs);
        let theta = feature_matrix(&samples, group, distance)?;
        let path = ctx.out.join("features").join(format!("{}_{side}.csv", spec.stem()));
        create_parent(&path)?;
        let file = std::fs::File::create(&path).map_err(|e| super::io_error(&path, e))?;
        write_feature_csv(std::io::BufWriter::new(file), &keys, &theta).map_err(|e| super::io_error(&path, e))?;
        println!("{side}: {} rows -> {}", theta.n_rows(), path.display());
    }
    println!("reference group seed {group_seed}");
    Ok(0)
}

fn keyed_samples(trajs: &[Trajectory]) -> (Vec<(u32, usize)>, Vec<crate::dataset::Sample>) {
    trajs
        .iter()
        .flat_map(|t| t.samples().iter().enumerate().map(move |(i, s)| ((t.unit_id, i + 1), *s)))
        .unzip()
}

fn run_cmd(ctx: &Context, specs: Vec<ScenarioSpec>) -> Result<i32> {
    let store = ctx.store()?;
    let results = run_matrix(&specs, &store, Some(&ctx.out))?;
    let mut failures = 0;
    for (spec, res) in specs.iter().zip(results) {
        match res {
            Ok(r) => print_result(&r),
            Err(e) => {
                eprintln!("{}: error: {e}", spec.stem());
                failures += 1;
            }
        }
    }
    println!("results in {}", ctx.out.display());
    Ok(i32::from(failures > 0))
}

fn print_result(r: &ExperimentResult) {
    let a = &r.aggregate;
    println!(
        "{:<34} MAPE {:.4} ± {:.4} (median {:.4})  RMSE(last) {:.2} ± {:.2}  [{} folds]",
        r.spec.stem(),
        a.mape_mean,
        a.mape_std,
        a.mape_median,
        a.rmse_mean,
        a.rmse_std,
        a.n_records
    );
}

fn report_cmd(ctx: &Context) -> Result<i32> {
    let summary = read_summary(&ctx.out.join("summary.json"))?;
    let path = ctx.out.join("report.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| super::io_error(&path, e))?;
    w.write_record([
        "scenario", "category", "eval_mode", "method", "n_records", "mape_mean", "mape_std", "mape_median",
        "rmse_mean", "rmse_std",
    ])
    .map_err(|e| super::io_error(&path, e))?;
    println!("{:<6} {:<26} {:<6} {:<22} {:>16} {:>16}", "label", "category", "mode", "method", "MAPE", "RMSE(last)");
    for e in summary.entries() {
        let a = &e.aggregate;
        println!(
            "{:<6} {:<26} {:<6} {:<22} {:>7.4} ± {:<6.4} {:>7.2} ± {:<6.2}",
            e.scenario.to_string(),
            e.category.name(),
            e.eval_mode.to_string(),
            e.method,
            a.mape_mean,
            a.mape_std,
            a.rmse_mean,
            a.rmse_std
        );
        w.write_record([
            e.scenario.to_string(),
            e.category.name().to_string(),
            e.eval_mode.to_string(),
            e.method.clone(),
            a.n_records.to_string(),
            a.mape_mean.to_string(),
            a.mape_std.to_string(),
            a.mape_median.to_string(),
            a.rmse_mean.to_string(),
            a.rmse_std.to_string(),
        ])
        .map_err(|e| super::io_error(&path, e))?;
    }
    w.flush().map_err(|e| super::io_error(&path, e))?;

    let cpath = ctx.out.join("report_categories.csv");
    let mut w = csv::Writer::from_path(&cpath).map_err(|e| super::io_error(&cpath, e))?;
    w.write_record(["category", "eval_mode", "method", "scenarios", "mape_mean", "rmse_mean"])
        .map_err(|e| super::io_error(&cpath, e))?;
    println!();
    for row in summary.category_means() {
        let labels: Vec<String> = row.scenarios.iter().map(ToString::to_string).collect();
        println!(
            "{:<26} {:<6} {:<22} MAPE {:.4}  RMSE(last) {:.2}  ({})",
            row.category.name(),
            row.eval_mode.to_string(),
            row.method,
            row.mape_mean,
            row.rmse_mean,
            labels.join(" ")
        );
        w.write_record([
            row.category.name().to_string(),
            row.eval_mode.to_string(),
            row.method.clone(),
            labels.join(" "),
            row.mape_mean.to_string(),
            row.rmse_mean.to_string(),
        ])
        .map_err(|e| super::io_error(&cpath, e))?;
    }
    w.flush().map_err(|e| super::io_error(&cpath, e))?;
    for e in &summary.errors {
        println!("failed: {} ({})", e.stem, e.error);
    }
    println!("report written to {} and {}", path.display(), cpath.display());
    Ok(0)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| super::io_error(dir, e))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    std::fs::write(path, text).map_err(|e| super::io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_lists_and_ranges() {
        assert_eq!(parse_limit_list("10,20, 30").unwrap(), vec![10, 20, 30]);
        assert_eq!(parse_limit_list("1-4").unwrap(), vec![1, 2, 3, 4]);
        assert!(parse_limits("4-1").is_err());
        assert!(parse_limits("x").is_err());
    }

    #[test]
    fn command_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn no_arguments_is_an_error() {
        assert_ne!(cli_main(["cosmo-rul"]), 0);
        assert_ne!(cli_main(["cosmo-rul", "frobnicate"]), 0);
        assert_ne!(cli_main(["cosmo-rul", "run", "--scenario", "C1", "--bogus"]), 0);
    }
}
