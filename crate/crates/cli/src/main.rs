//! `unfoldcp` command-line entry point.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use unfoldcp::config::{load_source, preset_names, run_preset, DatasetSource, ExperimentConfig, Preset};
use unfoldcp::evaluation::reference::{directional_checks, ComparisonRow, RowStatus, Table};
use unfoldcp::evaluation::report::{dataset_fingerprint, write_outputs, RunManifest};
use unfoldcp::evaluation::{run_experiment, Dataset, ExperimentResult, Method, Regime};
use unfoldcp::generators::sample_dsbm;
use unfoldcp::gnn::Architecture;
use unfoldcp::ingestion::{write_canonical, GeneratorRecord};
use unfoldcp::{Error, RepresentationKind};

#[derive(Parser)]
#[command(name = "unfoldcp", version, about = "Conformal node classification on dynamic graphs")]
struct Cli {
    /// Log filter (error, warn, info, debug).
    #[arg(long, global = true, env = "UNFOLDCP_LOG", default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed; overrides the config's regime seed.
    #[arg(long, env = "UNFOLDCP_SEED")]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "UNFOLDCP_JOBS")]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic dataset and write it in the canonical file layout.
    Generate {
        /// sbm-paper, sbm-iid or two-block.
        #[arg(long, env = "UNFOLDCP_PRESET")]
        preset: Option<String>,
        /// Take the dataset section from an experiment config instead.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of time points (sbm-iid).
        #[arg(long = "T", alias = "num-times")]
        num_times: Option<usize>,
        /// Generator seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "data")]
        output: PathBuf,
    },
    /// Run one experiment from a config file or a named preset.
    Run {
        /// Config path or preset name (see `presets`).
        #[arg(long, env = "UNFOLDCP_CONFIG")]
        config: String,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run the grid behind one results table and compare with the
    /// published values.
    Reproduce {
        /// table-accuracy, table-coverage, table-set-size or table-time-coverage.
        table: String,
        /// sbm, sbm-iid, school, flight, trade (repeatable).
        #[arg(long, default_value = "sbm")]
        dataset: Vec<String>,
        /// Extra regimes on top of transductive and semi-inductive.
        #[arg(long)]
        regime: Vec<String>,
        /// Directory holding `<dataset>.toml` manifests for real data.
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        /// Override the number of fits (and semi-inductive splits).
        #[arg(long)]
        fits: Option<usize>,
        /// Override the number of permutations per fit.
        #[arg(long)]
        permutations: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// List the shipped run presets.
    Presets,
}

/// Failure with the process exit code it maps to.
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Parse { .. } => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    let result = match cli.command {
        Command::Generate {
            preset,
            config,
            num_times,
            seed,
            output,
        } => generate(preset, config, num_times, seed, &output),
        Command::Run { config, common } => run(&config, &common),
        Command::Reproduce {
            table,
            dataset,
            regime,
            data_dir,
            fits,
            permutations,
            common,
        } => reproduce(&table, &dataset, &regime, &data_dir, fits, permutations, &common),
        Command::Presets => {
            for name in preset_names() {
                println!("{name}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn generate(
    preset: Option<String>,
    config: Option<PathBuf>,
    num_times: Option<usize>,
    seed: Option<u64>,
    output: &Path,
) -> Result<(), Failure> {
    let mut source = match (preset, config) {
        (Some(p), None) => DatasetSource::preset(p.parse::<Preset>()?, 0),
        (None, Some(path)) => ExperimentConfig::from_file(&path)?.dataset,
        _ => return Err(Failure::Config("give exactly one of --preset and --config".into())),
    };
    let preset = source
        .preset
        .ok_or_else(|| Failure::Config("dataset.preset: generate needs a generator preset".into()))?;
    if let Some(s) = seed {
        source.seed = s;
    }
    if num_times.is_some() {
        source.num_times = num_times;
    }
    let spec = preset.spec(source.seed, source.num_times)?;
    let (graph, labels) = sample_dsbm(&spec)?;
    let names: Vec<String> = (0..graph.n()).map(|i| i.to_string()).collect();
    let record = GeneratorRecord {
        preset: preset.name().to_string(),
        seed: source.seed,
    };
    let path = write_canonical(output, preset.dataset_name(), &graph, &labels, &names, Some(record))?;
    println!(
        "wrote {} (n = {}, T = {}, seed = {})",
        path.display(),
        graph.n(),
        graph.num_times(),
        source.seed
    );
    Ok(())
}

fn load_config(name: &str) -> Result<ExperimentConfig, Failure> {
    let path = Path::new(name);
    if path.exists() {
        return ExperimentConfig::from_file(path).map_err(|e| match e {
            Error::Io { .. } => Failure::Config(e.to_string()),
            e => e.into(),
        });
    }
    let preset = run_preset(name).ok_or_else(|| {
        Failure::Config(format!("'{name}' is neither a config file nor a preset (see `unfoldcp presets`)"))
    })?;
    // Re-parse so environment overrides apply to presets too.
    Ok(ExperimentConfig::parse_with(&preset.to_toml(), &unfoldcp::config::env_overrides())?)
}

fn apply_common(config: &mut ExperimentConfig, common: &Common) {
    if let Some(seed) = common.seed {
        config.regime.seed = seed;
    }
    if let Some(out) = &common.output {
        config.output = out.clone();
    }
}

fn execute(config: &ExperimentConfig, dataset: &Dataset, jobs: Option<usize>) -> Result<ExperimentResult, Failure> {
    let method = Method {
        representation: config.representation,
        model: config.model.clone(),
    };
    let result = run_experiment(dataset, &method, &config.regime, &config.score, jobs)?;
    let hash = config.hash();
    let json = serde_json::to_value(config).map_err(|e| Failure::Runtime(e.to_string()))?;
    let manifest = RunManifest::new(
        json,
        &hash,
        &dataset.name,
        dataset_fingerprint(&dataset.graph, &dataset.labels),
        &[&result],
    );
    write_outputs(&config.output, &manifest, &[&result])?;
    let cfg_path = config.output.join("config.toml");
    std::fs::write(&cfg_path, format!("# config_hash={hash}\n{}", config.to_toml()))
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", cfg_path.display())))?;
    Ok(result)
}

fn print_report(result: &ExperimentResult) {
    let r = &result.report;
    println!("{} / {} ({} instances, {} skipped)", r.method, r.regime, r.instances, r.skipped);
    for (metric, s) in r.rows() {
        println!("  {metric:<27} {:.3} ± {:.3}", s.mean, s.sd);
    }
}

fn run(name: &str, common: &Common) -> Result<(), Failure> {
    let mut config = load_config(name)?;
    apply_common(&mut config, common);
    config.validate()?;
    let dataset = load_source(&config.dataset)?;
    let result = execute(&config, &dataset, common.jobs)?;
    print_report(&result);
    println!("results in {}", config.output.display());
    Ok(())
}

const METHODS: [(RepresentationKind, Architecture); 4] = [
    (RepresentationKind::BlockDiagonal, Architecture::Gcn),
    (RepresentationKind::Unfolded, Architecture::Gcn),
    (RepresentationKind::BlockDiagonal, Architecture::Gat),
    (RepresentationKind::Unfolded, Architecture::Gat),
];

fn dataset_source(name: &str, data_dir: &Path, seed: u64) -> Result<DatasetSource, String> {
    match name {
        "sbm" | "sbm-paper" => Ok(DatasetSource::preset(Preset::SbmPaper, seed)),
        "sbm-iid" => Ok(DatasetSource::preset(Preset::SbmIid, seed)),
        other => {
            let candidates = [data_dir.join(format!("{other}.toml")), data_dir.join(other).join("dataset.toml")];
            candidates
                .iter()
                .find(|p| p.exists())
                .map(|p| DatasetSource::manifest(p.clone()))
                .ok_or_else(|| format!("no manifest at {}", candidates[0].display()))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn reproduce(
    table: &str,
    datasets: &[String],
    extra_regimes: &[String],
    data_dir: &Path,
    fits: Option<usize>,
    permutations: Option<usize>,
    common: &Common,
) -> Result<(), Failure> {
    let table: Table = table.parse()?;
    let mut regimes = vec![Regime::Transductive, Regime::SemiInductive];
    for r in extra_regimes {
        let r: Regime = r.parse()?;
        if !regimes.contains(&r) {
            regimes.push(r);
        }
    }
    let out_root = common.output.clone().unwrap_or_else(|| PathBuf::from("runs").join(table.id()));
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut aborted = false;
    for name in datasets {
        let source = dataset_source(name, data_dir, 0);
        let dataset = source.as_ref().map_err(Clone::clone).and_then(|s| load_source(s).map_err(|e| e.to_string()));
        let mut semi = Vec::new();
        for &regime in &regimes {
            for (rep, arch) in METHODS {
                let method = Method::new(rep, arch).name();
                let dataset = match &dataset {
                    Ok(d) => d,
                    Err(reason) => {
                        rows.push(ComparisonRow::skipped(table, name, &method, regime, reason.clone()));
                        continue;
                    }
                };
                let mut config = ExperimentConfig::new(source.clone().expect("loaded"), rep, arch, regime);
                if let Some(f) = fits {
                    config.regime.n_fits = f;
                    config.regime.n_splits_semi_inductive = f;
                }
                if let Some(p) = permutations {
                    config.regime.n_permutations = p;
                }
                apply_common(&mut config, common);
                config.output = out_root.join(name).join(format!("{method}_{}", regime.label()));
                config.validate()?;
                log::info!("running {name} {method} {}", regime.label());
                match execute(&config, dataset, common.jobs) {
                    Ok(result) => {
                        if regime == Regime::SemiInductive {
                            semi.push((method.clone(), result.report.coverage.mean));
                        }
                        rows.push(ComparisonRow::new(table, name, &method, regime, table.pick(&result.report)));
                    }
                    Err(Failure::Runtime(msg)) => {
                        aborted = true;
                        rows.push(ComparisonRow::skipped(table, name, &method, regime, format!("aborted: {msg}")));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        if !matches!(name.as_str(), "sbm" | "sbm-paper" | "sbm-iid") {
            checks.extend(directional_checks(name, &semi));
        }
    }
    print_comparison(table, &rows, &checks);
    write_comparison(&out_root.join("comparison.csv"), &rows)?;
    if aborted {
        return Err(Failure::Runtime("one or more runs aborted".into()));
    }
    Ok(())
}

fn print_comparison(table: Table, rows: &[ComparisonRow], checks: &[(String, bool)]) {
    println!("{} ({})", table.id(), table.metric());
    println!("{:<10} {:<10} {:<22} {:>15} {:>15}  status", "dataset", "method", "regime", "ours", "published");
    for r in rows {
        let ours = r.ours.map_or("-".into(), |s| format!("{:.3} ± {:.3}", s.mean, s.sd));
        let published = r.published.map_or("-".into(), |p| format!("{:.3} ± {:.3}", p.mean, p.sd));
        let note = match &r.status {
            RowStatus::Skipped(why) => format!(" ({why})"),
            _ => String::new(),
        };
        println!(
            "{:<10} {:<10} {:<22} {ours:>15} {published:>15}  {}{note}",
            r.dataset,
            r.method,
            r.regime.label(),
            r.status.label()
        );
    }
    for (claim, holds) in checks {
        println!("{} {claim}", if *holds { "PASS" } else { "FAIL" });
    }
}

fn write_comparison(path: &Path, rows: &[ComparisonRow]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Runtime(format!("cannot write {}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut text = String::from("dataset,method,regime,metric,mean,sd,published_mean,published_sd,status\n");
    for r in rows {
        let (m, s) = r.ours.map_or((String::new(), String::new()), |s| (format!("{:.6}", s.mean), format!("{:.6}", s.sd)));
        let (pm, ps) = r.published.map_or((String::new(), String::new()), |p| (p.mean.to_string(), p.sd.to_string()));
        text.push_str(&format!(
            "{},{},{},{},{m},{s},{pm},{ps},{}\n",
            r.dataset,
            r.method,
            r.regime.label(),
            r.metric,
            r.status.label()
        ));
    }
    std::fs::write(path, text).map_err(io)
}
