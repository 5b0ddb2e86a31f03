//! `camolab`: run the traffic-camouflage experiments from the command line.
//!
//! Exit codes: 0 success, 1 validation error, 2 stage failure, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use camolab_attack::camouflage::{AttackMode, Generator};
use camolab_attack::substitute::{scan_csv, train_substitute, SubstituteModel};
use camolab_attack::Oracle;
use camolab_core::learners::save_classifier;
use camolab_core::{Classifier, ClassSet, Dataset};
use camolab_harness::config::ExperimentConfig;
use camolab_harness::csvio::{load_dataset, write_dataset};
use camolab_harness::experiment::{
    self, choose_features, fig4_table, fit_target, load_or_generate, load_pool, model_rate, registry, run_attack,
    run_defense, stage_seed, strided, target_features,
};
use camolab_harness::output::{num, write_atomic, Manifest, Provenance, Table};
use camolab_harness::{run_experiment, HarnessError, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "camolab", version, about = "Traffic camouflage attacks on IoT device identification, and a radio-level defense")]
struct Cli {
    /// Config file (TOML) or a run manifest to replay.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one setting, `key=value` with a TOML value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Shorthand for `--set seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shorthand for `--set out=DIR`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic benchmark as a dataset CSV.
    GenData {
        #[arg(long)]
        output: PathBuf,
    },
    /// Validate a dataset CSV against the pool schema and class labels.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Re-export the validated rows.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit one target identifier on the training split.
    TrainTarget {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        kind: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Query a target as a black box and fit a substitute to its labels.
    TrainSubstitute {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Pool features to use, comma separated; all when omitted.
        #[arg(long, value_delimiter = ',')]
        features: Vec<String>,
        /// Write the per-epoch agreement curve here.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Weight the pool features and scan subset sizes.
    ScanFeatures {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a misidentification generator and measure it on the target.
    Attack {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        substitute: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a generator that makes `source` traffic read as `target`.
    Spoof {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        substitute: PathBuf,
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate device profiling against a trained generator.
    Defend {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        generator: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print the tables of a finished run.
    Report {
        /// Run directory; the configured `out` when omitted.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Run the whole pipeline into the output directory.
    Run,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut overrides = Vec::new();
    for s in &cli.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| HarnessError::Validation(format!("--set expects key=value, got `{s}`")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(out) = &cli.out {
        overrides.push(("out".into(), toml::Value::String(out.display().to_string()).to_string()));
    }
    ExperimentConfig::load(cli.config.as_deref(), &overrides)
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = config(&cli)?;
    let prov = Provenance { config_hash: cfg.hash(), seed: cfg.seed };
    match &cli.command {
        Command::GenData { output } => {
            let pool = load_pool(&cfg)?;
            let ds = load_or_generate(&cfg, &pool)?;
            write_csv(output, |buf| write_dataset(buf, &prov.comments("dataset"), &ds))?;
            println!("{} rows, {} classes, {} features -> {}", ds.len(), ds.n_classes(), pool.len(), output.display());
        }
        Command::Ingest { input, output } => {
            let pool = load_pool(&cfg)?;
            let (classes, _) = experiment::class_labels(&cfg)?;
            let ds = load_dataset(input, pool, classes)?;
            println!("{}: {} rows, {} features", input.display(), ds.len(), ds.schema().len());
            for (c, n) in ds.class_counts().iter().enumerate() {
                println!("  {:<16} {n}", ds.classes().labels()[c]);
            }
            if let Some(out) = output {
                write_csv(out, |buf| write_dataset(buf, &prov.comments("dataset"), &ds))?;
            }
        }
        Command::TrainTarget { data, kind, output } => {
            let pool = load_pool(&cfg)?;
            let (classes, _) = experiment::class_labels(&cfg)?;
            let (train, test) = split(&cfg, &load_dataset(data, pool.clone(), classes.clone())?)?;
            let features = target_features(&cfg, &pool)?;
            let model = fit_target(&cfg, kind, &train, &features, "target")?;
            println!(
                "{kind}: train {:.4} test {:.4}",
                model_rate(model.as_ref(), &train, &features)?,
                model_rate(model.as_ref(), &test, &features)?
            );
            write_atomic(output, save_classifier(model.as_ref(), &classes)?.as_bytes())?;
        }
        Command::TrainSubstitute { data, model, output, features, curve } => {
            let (oracle, train, _) = black_box(&cfg, data, model)?;
            let corpus = oracle.collect(train.features())?;
            let subset = if features.is_empty() {
                (0..train.schema().len()).collect()
            } else {
                features
                    .iter()
                    .map(|n| {
                        train.schema().index_of(n).ok_or_else(|| HarnessError::Validation(format!("unknown feature `{n}`")))
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            let sub = train_substitute(&corpus, &subset, &cfg.substitute_config(), stage_seed(&cfg, "substitute/cli"))?;
            println!("held-out agreement {:.4} after {} epochs, {} queries", sub.final_agreement(), sub.training_curve.len(), oracle.query_log());
            write_json(output, &sub)?;
            if let Some(path) = curve {
                let mut t = Table::new(&["epoch", "agreement"]);
                for (e, a) in sub.training_curve.iter().enumerate() {
                    t.push(vec![(e + 1).to_string(), num(*a)]);
                }
                write_atomic(path, t.to_csv(&prov.comments("substitute agreement per epoch")).as_bytes())?;
            }
        }
        Command::ScanFeatures { data, model, output } => {
            let (oracle, train, _) = black_box(&cfg, data, model)?;
            let corpus = oracle.collect(train.features())?;
            let scan_cfg = ExperimentConfig { scan: true, subset_size: None, ..cfg.clone() };
            let sel = choose_features(&scan_cfg, &corpus)?;
            let mut text: String = prov.comments("feature-selection scan").iter().map(|c| format!("# {c}\n")).collect();
            text.push_str(&scan_csv(&sel.scan));
            write_atomic(output, text.as_bytes())?;
            let names: Vec<&str> = sel.subset.iter().map(|&i| train.schema().feature(i).name.as_str()).collect();
            println!("full-pool agreement {:.4}; selected L={}: {}", sel.full_pool_agreement, sel.subset.len(), names.join(","));
        }
        Command::Attack { data, model, substitute, output } => {
            let (oracle, train, test) = black_box(&cfg, data, model)?;
            let sub: SubstituteModel = read_json(substitute)?;
            let rows = strided(&train, cfg.generator_row_stride);
            let run = run_attack(&cfg, &sub, &oracle, &rows, &test, AttackMode::Misidentify, "cli", false)?;
            println!(
                "identification under attack: target {:.4}, substitute {:.4}; {} epochs; {} violations",
                run.victim.rate,
                run.on_substitute.rate,
                run.record.curve.len(),
                run.victim.violations
            );
            write_json(output, &run.generator)?;
        }
        Command::Spoof { data, model, substitute, source, target, output } => {
            let (oracle, train, test) = black_box(&cfg, data, model)?;
            let sub: SubstituteModel = read_json(substitute)?;
            let classes = train.classes_arc().clone();
            let find = |l: &str| classes.lookup(l).ok_or_else(|| HarnessError::Validation(format!("unknown class `{l}`")));
            let (s, t) = (find(source)?, find(target)?);
            let rows = strided(&train.filter_classes(|c| c == s), cfg.spoof_row_stride);
            let test = test.filter_classes(|c| c == s);
            let run = run_attack(&cfg, &sub, &oracle, &rows, &test, AttackMode::Spoof(t), "cli-spoof", false)?;
            println!("{source} -> {target}: spoofing rate {:.4} (substitute {:.4})", run.victim.rate, run.on_substitute.rate);
            write_json(output, &run.generator)?;
        }
        Command::Defend { data, model, generator, output } => {
            let (oracle, _, test) = black_box(&cfg, data, model)?;
            let g: Generator = read_json(generator)?;
            let (report, _) = run_defense(&cfg, &[g], &oracle, &test)?;
            let table = fig4_table(&report);
            print!("{}", table.pretty());
            write_atomic(output, table.to_csv(&prov.comments("device profiling under attack")).as_bytes())?;
        }
        Command::Report { dir } => report(dir.as_deref().unwrap_or(&cfg.out))?,
        Command::Run => {
            let r = run_experiment(&cfg)?;
            println!("{}", r.table1.pretty());
            println!("{}", r.table2.pretty());
            if let Some(t) = &r.table3 {
                println!("{}", t.pretty());
            }
            println!("outputs in {}", cfg.out.display());
        }
    }
    Ok(())
}

fn split(cfg: &ExperimentConfig, ds: &Dataset) -> Result<(Dataset, Dataset)> {
    Ok(ds.split(cfg.train_fraction, stage_seed(cfg, "split"))?)
}

/// Loads a saved target behind an oracle over the pool, and the data split
/// labeled with the model's classes.
fn black_box(cfg: &ExperimentConfig, data: &Path, model: &Path) -> Result<(Oracle, Dataset, Dataset)> {
    let text = std::fs::read_to_string(model).map_err(|e| HarnessError::io(model, e))?;
    let (target, classes): (Box<dyn Classifier>, ClassSet) = registry(cfg)?.load(&text)?;
    let classes = Arc::new(classes);
    let pool = load_pool(cfg)?;
    let ds = load_dataset(data, pool.clone(), classes.clone())?;
    let (train, test) = split(cfg, &ds)?;
    Ok((Oracle::new(target, classes, pool)?, train, test))
}

fn write_csv(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| HarnessError::io(path, e))?;
    write_atomic(path, &buf)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string(value).map_err(|e| HarnessError::Validation(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Validation(format!("{}: {e}", path.display())))
}

fn report(dir: &Path) -> Result<()> {
    let manifest_path = dir.join(experiment::MANIFEST);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| HarnessError::io(&manifest_path, e))?;
    let manifest = Manifest::parse(&text);
    println!(
        "run {} (seed {}, config {}): {}",
        dir.display(),
        manifest.get("seed").unwrap_or("?"),
        manifest.get("config_hash").unwrap_or("?"),
        manifest.get("status").unwrap_or("unknown")
    );
    if let Some(stage) = manifest.get("failed_stage") {
        println!("failed in stage {stage}: {}", manifest.get("error").unwrap_or(""));
    }
    for (name, title) in [
        (experiment::TABLE1, "Clean identification"),
        (experiment::TABLE2, "Misidentification attack"),
        (experiment::TABLE3, "Identity spoofing"),
        (experiment::FIG4, "Device profiling under attack"),
    ] {
        let path = dir.join(name);
        if !path.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        println!("\n{title} ({name})\n{}", Table::parse(&text)?.pretty());
    }
    if let (Some(l), Some(f)) = (manifest.get("selection.l"), manifest.get("selection.features")) {
        println!("selected {l} features: {f}");
    }
    Ok(())
}
