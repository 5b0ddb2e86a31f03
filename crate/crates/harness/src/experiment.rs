//! The experiment pipeline: data, targets, eavesdropping, substitutes,
//! feature selection, misidentification, spoofing and the defense. Each
//! stage is a public function so the CLI can run them one at a time.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use camolab_attack::camouflage::{evaluate_attack, train_generator, AttackMode, AttackOutcome, Generator, TrainingRecord};
use camolab_attack::substitute::{
    feature_weights, performance_gain_scan, scan_csv, select_subset, top_features, train_substitute, GainPoint,
    SelectionPolicy, SubstituteModel,
};
use camolab_attack::{EavesdropCorpus, Oracle, Victim};
use camolab_core::rng::derive_seed;
use camolab_core::{Classifier, ClassSet, Dataset, DeviceClass, FeatureSchema, Registry};
use camolab_profiler::signal::signature_stream;
use camolab_profiler::{evaluate_defense, fit_profiler, DefenseReport, HardwareIdentity};

use crate::config::{parse_pair, ExperimentConfig, MANIFEST_MARKER};
use crate::csvio::load_dataset;
use crate::output::{num, Manifest, OutputDir, Provenance, Table};
use crate::synth::{default_pool_schema, default_profiles, default_target_features, generate_dataset, ProfileParams, SyntheticProfile};
use crate::{HarnessError, Result};

pub const TABLE1: &str = "table1.csv";
pub const TABLE2: &str = "table2.csv";
pub const TABLE3: &str = "table3.csv";
pub const FIG3: &str = "fig3.csv";
pub const FIG4: &str = "fig4.csv";
pub const SCAN: &str = "scan.csv";
pub const MANIFEST: &str = "manifest.txt";

/// Report CSVs that must be identical across reruns. The scan holds
/// wall-clock timings and is left out.
pub const REPRODUCIBLE_OUTPUTS: [&str; 5] = [TABLE1, TABLE2, TABLE3, FIG3, FIG4];

/// Seed for a named stage, recorded in the manifest.
pub fn stage_seed(cfg: &ExperimentConfig, tag: &str) -> u64 {
    derive_seed(cfg.seed, tag)
}

/// The attacker's feature pool, with mask overrides applied.
pub fn load_pool(cfg: &ExperimentConfig) -> Result<Arc<FeatureSchema>> {
    let base = match &cfg.schema {
        Some(path) => load_schema(path)?,
        None => default_pool_schema(),
    };
    let overrides = cfg.mutable.iter().map(|n| (n.as_str(), true)).chain(cfg.immutable.iter().map(|n| (n.as_str(), false)));
    Ok(Arc::new(base.with_mask_overrides(overrides)?))
}

/// Reads a schema file: a TOML list of `[[features]]` tables with `name`,
/// `unit`, `min`, `max` and `mutable`.
pub fn load_schema(path: &Path) -> Result<FeatureSchema> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    toml::from_str(&text).map_err(|e| HarnessError::Validation(format!("{}: {}", path.display(), e.message())))
}

pub fn synthetic_profiles(cfg: &ExperimentConfig) -> Result<Vec<SyntheticProfile>> {
    default_profiles(cfg.n_classes, &ProfileParams::default(), cfg.spread_scale, stage_seed(cfg, "profiles"))
}

/// Class labels in id order, and the device type of each class when known.
pub fn class_labels(cfg: &ExperimentConfig) -> Result<(Arc<ClassSet>, Option<Vec<String>>)> {
    match &cfg.classes {
        Some(labels) => {
            if let Some(types) = &cfg.class_types {
                if types.len() != labels.len() {
                    return Err(HarnessError::Validation("class_types must list one type per class".into()));
                }
            }
            Ok((Arc::new(ClassSet::new(labels.clone())?), cfg.class_types.clone()))
        }
        None => {
            let profiles = synthetic_profiles(cfg)?;
            let labels = profiles.iter().map(|p| p.label.clone()).collect();
            let types = cfg.class_types.clone().unwrap_or_else(|| profiles.iter().map(|p| p.group.clone()).collect());
            Ok((Arc::new(ClassSet::new(labels)?), Some(types)))
        }
    }
}

/// The configured dataset file, or the synthetic benchmark.
pub fn load_or_generate(cfg: &ExperimentConfig, pool: &Arc<FeatureSchema>) -> Result<Dataset> {
    let (classes, _) = class_labels(cfg)?;
    match &cfg.dataset {
        Some(path) => load_dataset(path, pool.clone(), classes),
        None => {
            if cfg.classes.is_some() {
                return Err(HarnessError::Validation("custom class labels need a dataset file".into()));
            }
            generate_dataset(pool, &synthetic_profiles(cfg)?, cfg.rows_per_class, stage_seed(cfg, "rows"))
        }
    }
}

/// Pool indices of the features the targets see.
pub fn target_features(cfg: &ExperimentConfig, pool: &FeatureSchema) -> Result<Vec<usize>> {
    let names = match &cfg.target_features {
        Some(names) => names.clone(),
        None => {
            let defaults = default_target_features();
            if defaults.iter().all(|n| pool.index_of(n).is_some()) {
                defaults
            } else {
                pool.names().map(str::to_string).collect()
            }
        }
    };
    names
        .iter()
        .map(|n| pool.index_of(n).ok_or_else(|| HarnessError::Validation(format!("target feature `{n}` is not in the pool"))))
        .collect()
}

pub fn registry(cfg: &ExperimentConfig) -> Result<Registry> {
    Ok(Registry::with_defaults(&cfg.hyperparams())?)
}

/// Fits one target on the projected training rows.
pub fn fit_target(cfg: &ExperimentConfig, kind: &str, train: &Dataset, features: &[usize], tag: &str) -> Result<Box<dyn Classifier>> {
    Ok(registry(cfg)?.fit(kind, &train.project(features)?, stage_seed(cfg, &format!("{tag}/{kind}")))?)
}

/// Fraction of `ds` rows a model labels correctly, on projected features.
pub fn model_rate(model: &dyn Classifier, ds: &Dataset, features: &[usize]) -> Result<f64> {
    let predicted = model.predict_batch(ds.project(features)?.features())?;
    Ok(agreement(&predicted, ds.labels()))
}

fn agreement(a: &[DeviceClass], b: &[DeviceClass]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len().max(1) as f64
}

/// Outcome of feature selection.
#[derive(Debug, Clone)]
pub struct Selection {
    pub weights: Vec<f64>,
    pub full_pool_agreement: f64,
    pub scan: Vec<GainPoint>,
    pub subset: Vec<usize>,
}

impl Selection {
    /// Agreement of the substitute trained on the chosen subset, if scanned.
    pub fn subset_agreement(&self) -> Option<f64> {
        self.scan.iter().find(|p| p.l == self.subset.len()).map(|p| p.agreement)
    }
}

/// Permutation weights from a full-pool substitute, then either the fixed
/// `subset_size` or a scan plus the agreement policy.
pub fn choose_features(cfg: &ExperimentConfig, corpus: &EavesdropCorpus) -> Result<Selection> {
    let k = corpus.schema().len();
    let all: Vec<usize> = (0..k).collect();
    if !cfg.scan && cfg.subset_size.is_none() {
        return Ok(Selection { weights: vec![1.0; k], full_pool_agreement: f64::NAN, scan: Vec::new(), subset: all });
    }
    let sub_cfg = cfg.substitute_config();
    let base = train_substitute(corpus, &all, &sub_cfg, stage_seed(cfg, "selection/base"))?;
    let weights = feature_weights(corpus, &base, cfg.weight_repetitions, stage_seed(cfg, "selection/weights"))?;
    let full_pool_agreement = base.final_agreement();
    if let Some(l) = cfg.subset_size {
        let subset = top_features(&weights, l)?;
        return Ok(Selection { weights, full_pool_agreement, scan: Vec::new(), subset });
    }
    let sizes: Vec<usize> = cfg.scan_sizes.iter().copied().filter(|&l| l >= 1 && l <= k).collect();
    let scan = performance_gain_scan(corpus, &weights, &sizes, &sub_cfg, stage_seed(cfg, "selection/scan"))?;
    let l = select_subset(&scan, &SelectionPolicy { full_pool_agreement, epsilon: cfg.selection_epsilon })?;
    let subset = top_features(&weights, l)?;
    Ok(Selection { weights, full_pool_agreement, scan, subset })
}

/// Every `stride`-th row.
pub fn strided(ds: &Dataset, stride: usize) -> Dataset {
    let rows: Vec<usize> = (0..ds.len()).step_by(stride.max(1)).collect();
    ds.subset(&rows)
}

/// A trained generator with its record and its outcome on victim and
/// substitute.
pub struct AttackRun {
    pub generator: Generator,
    pub record: TrainingRecord,
    pub victim: AttackOutcome,
    pub on_substitute: AttackOutcome,
}

/// Trains a generator against `sub` on `attacker_rows` and measures it on
/// `test` against both the victim and the substitute.
#[allow(clippy::too_many_arguments)]
pub fn run_attack(
    cfg: &ExperimentConfig,
    sub: &SubstituteModel,
    victim: &dyn Victim,
    attacker_rows: &Dataset,
    test: &Dataset,
    mode: AttackMode,
    tag: &str,
    keep_snapshots: bool,
) -> Result<AttackRun> {
    let gen_cfg = camolab_attack::camouflage::GeneratorConfig { keep_snapshots, ..cfg.generator_config() };
    let seed = stage_seed(cfg, &format!("generator/{tag}"));
    let mut generator = Generator::new(attacker_rows.schema_arc().clone(), &gen_cfg, seed)?;
    let record = train_generator(&mut generator, sub, attacker_rows, mode, &gen_cfg, seed)?;
    let eval_seed = stage_seed(cfg, &format!("evaluate/{tag}"));
    let victim_outcome = evaluate_attack(&generator, victim, test, mode, eval_seed)?;
    let on_substitute = evaluate_attack(&generator, sub, test, mode, eval_seed)?;
    Ok(AttackRun { generator, record, victim: victim_outcome, on_substitute })
}

/// Index of each configured type, the per-class map and the type class set.
pub fn type_mapping(types: &[String]) -> Result<(Vec<usize>, Arc<ClassSet>)> {
    let synthetic: Vec<String> = crate::synth::DEVICE_TYPES.iter().map(|s| s.to_string()).collect();
    let mut names: Vec<String> = Vec::new();
    if types.iter().all(|t| synthetic.contains(t)) {
        names = synthetic;
    } else {
        for t in types {
            if !names.contains(t) {
                names.push(t.clone());
            }
        }
    }
    let map = types.iter().map(|t| names.iter().position(|n| n == t).expect("listed")).collect();
    Ok((map, Arc::new(ClassSet::new(names)?)))
}

/// Everything one `run` produced, for callers that want numbers rather
/// than files.
pub struct RunReport {
    pub table1: Table,
    pub table2: Table,
    pub table3: Option<Table>,
    pub fig3: Table,
    pub fig4: Option<Table>,
    pub selection: Selection,
    pub generators: Vec<(String, Generator)>,
    pub defense: Option<DefenseReport>,
    pub manifest: Manifest,
    pub test: Dataset,
}

/// Tracks the stage in progress so failures can name it.
struct Progress {
    stage: &'static str,
    started: Instant,
}

impl Progress {
    fn enter(&mut self, stage: &'static str) {
        log::info!("stage {} done in {:.1}s", self.stage, self.started.elapsed().as_secs_f64());
        self.stage = stage;
        self.started = Instant::now();
        log::info!("stage {stage}");
    }
}

/// Runs the whole pipeline into `cfg.out`. On failure the manifest is still
/// written, with the failing stage, next to whatever outputs were finished.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let provenance = Provenance { config_hash: cfg.hash(), seed: cfg.seed };
    let mut out = OutputDir::new(cfg.out.clone(), provenance);
    let mut manifest = Manifest::default();
    manifest.set(MANIFEST_MARKER, 1);
    manifest.set("config_hash", cfg.hash());
    manifest.set("seed", cfg.seed);
    for (k, v) in cfg.flat() {
        manifest.set(format!("config.{k}"), v);
    }
    let mut progress = Progress { stage: "data", started: Instant::now() };
    let result = pipeline(cfg, &mut out, &mut manifest, &mut progress);
    match &result {
        Ok(_) => manifest.set("status", "complete"),
        Err(e) => {
            manifest.set("status", "failed");
            manifest.set("failed_stage", progress.stage);
            manifest.set("error", e.to_string().replace('\n', " "));
        }
    }
    for (name, digest) in out.written().to_vec() {
        manifest.set(format!("output.{name}.sha256"), digest);
    }
    let written = crate::output::write_atomic(&cfg.out.join(MANIFEST), manifest.render().as_bytes());
    match result {
        Ok(mut report) => {
            written?;
            report.manifest = manifest;
            Ok(report)
        }
        Err(e) if e.exit_code() == 2 => Err(HarnessError::stage(progress.stage, e)),
        Err(e) => Err(e),
    }
}

fn pipeline(cfg: &ExperimentConfig, out: &mut OutputDir, manifest: &mut Manifest, progress: &mut Progress) -> Result<RunReport> {
    log::info!("stage data");
    let pool = load_pool(cfg)?;
    let data = load_or_generate(cfg, &pool)?;
    let (_, types) = class_labels(cfg)?;
    let (train, test) = data.split(cfg.train_fraction, stage_seed(cfg, "split"))?;
    let features = target_features(cfg, &pool)?;
    manifest.set("data.rows", data.len());
    manifest.set("data.classes", data.n_classes());
    manifest.set("data.train_rows", train.len());
    manifest.set("data.test_rows", test.len());
    manifest.set("data.pool_features", pool.len());
    manifest.set("data.target_features", names_of(&pool, &features));
    for tag in ["profiles", "rows", "split"] {
        manifest.set(format!("seed.{tag}"), stage_seed(cfg, tag));
    }

    progress.enter("targets");
    let mut oracles = Vec::new();
    let mut clean = Vec::new();
    for kind in &cfg.targets {
        let model = fit_target(cfg, kind, &train, &features, "target")?;
        let rates = (model_rate(model.as_ref(), &train, &features)?, model_rate(model.as_ref(), &test, &features)?);
        log::info!("target {kind}: train {:.4} test {:.4}", rates.0, rates.1);
        manifest.set(format!("seed.target/{kind}"), stage_seed(cfg, &format!("target/{kind}")));
        clean.push(rates);
        oracles.push(Oracle::new(model, data.classes_arc().clone(), pool.clone())?);
    }

    progress.enter("eavesdrop");
    let corpora = oracles.iter().map(|o| o.collect(train.features())).collect::<std::result::Result<Vec<_>, _>>()?;

    progress.enter("feature-selection");
    let scan_index = cfg.targets.iter().position(|k| *k == cfg.scan_target).expect("validated");
    let selection = choose_features(cfg, &corpora[scan_index])?;
    if !selection.scan.is_empty() {
        let mut text: String = out.provenance.comments("feature-selection scan").iter().map(|c| format!("# {c}\n")).collect();
        text.push_str(&scan_csv(&selection.scan));
        out.write_text(SCAN, &text)?;
    }
    manifest.set("selection.l", selection.subset.len());
    manifest.set("selection.features", names_of(&pool, &selection.subset));
    manifest.set("selection.full_pool_agreement", num(selection.full_pool_agreement));
    if let Some(a) = selection.subset_agreement() {
        manifest.set("selection.subset_agreement", num(a));
    }

    progress.enter("substitutes");
    let sub_cfg = cfg.substitute_config();
    let mut subs = Vec::new();
    let mut table1 = Table::new(&["target", "target_train", "target_test", "substitute_train", "substitute_test"]);
    for (i, kind) in cfg.targets.iter().enumerate() {
        let seed = stage_seed(cfg, &format!("substitute/{kind}"));
        manifest.set(format!("seed.substitute/{kind}"), seed);
        let sub = train_substitute(&corpora[i], &selection.subset, &sub_cfg, seed)?;
        let ds = corpora[i].dataset();
        let train_rows: Vec<usize> = (0..ds.len()).filter(|r| !sub.holdout_rows().contains(r)).collect();
        let fit_rows = ds.subset(&train_rows);
        let sub_train = agreement(&sub.predict_batch(fit_rows.features())?, fit_rows.labels());
        log::info!("substitute {kind}: held-out agreement {:.4}", sub.final_agreement());
        table1.push(vec![kind.clone(), num(clean[i].0), num(clean[i].1), num(sub_train), num(sub.final_agreement())]);
        subs.push(sub);
    }
    out.write_table(TABLE1, "clean identification: targets and substitutes", &table1)?;
    let epochs = subs.iter().map(|s| s.training_curve.len()).max().unwrap_or(0);
    let mut head = vec!["epoch".to_string()];
    head.extend(cfg.targets.iter().cloned());
    let mut fig3 = Table::new(&head);
    for e in 0..epochs {
        let mut row = vec![(e + 1).to_string()];
        row.extend(subs.iter().map(|s| s.training_curve.get(e).map(|v| num(*v)).unwrap_or_default()));
        fig3.push(row);
    }
    out.write_table(FIG3, "substitute held-out agreement per epoch", &fig3)?;
    for (o, kind) in oracles.iter().zip(&cfg.targets) {
        manifest.set(format!("query_log.{kind}"), o.query_log());
    }

    progress.enter("misidentify");
    let attacker_rows = strided(&train, cfg.generator_row_stride);
    let mut table2 = Table::new(&[
        "target",
        "clean_rate",
        "attacked_rate",
        "substitute_attacked_rate",
        "transfer_gap",
        "generator_epochs",
        "violations",
    ]);
    let mut generators = Vec::new();
    let mut defense_run = None;
    for (i, kind) in cfg.targets.iter().enumerate() {
        manifest.set(format!("seed.generator/{kind}"), stage_seed(cfg, &format!("generator/{kind}")));
        let keep = cfg.defense && *kind == cfg.defense_target;
        let run = run_attack(cfg, &subs[i], &oracles[i], &attacker_rows, &test, AttackMode::Misidentify, kind, keep)?;
        log::info!("misidentify {kind}: victim {:.4} substitute {:.4}", run.victim.rate, run.on_substitute.rate);
        table2.push(vec![
            kind.clone(),
            num(clean[i].1),
            num(run.victim.rate),
            num(run.on_substitute.rate),
            num(run.victim.rate - run.on_substitute.rate),
            run.record.curve.len().to_string(),
            (run.victim.violations + run.on_substitute.violations).to_string(),
        ]);
        generators.push((kind.clone(), run.generator.clone()));
        if keep {
            defense_run = Some((i, run));
        }
    }
    out.write_table(TABLE2, "identification under misidentification attack", &table2)?;

    progress.enter("spoofing");
    let table3 = match (&types, cfg.spoof) {
        (Some(types), true) => {
            let t = spoof_grid(cfg, &train, &test, &pool, &features, &selection.subset, types, manifest)?;
            out.write_table(TABLE3, "spoofing rate per source>target type pair", &t)?;
            Some(t)
        }
        (None, true) => {
            log::warn!("no device types known; spoofing skipped");
            None
        }
        _ => None,
    };

    progress.enter("defense");
    let mut defense = None;
    let mut fig4 = None;
    if let Some((i, run)) = defense_run {
        let (report, groups) = run_defense(cfg, &run.record.snapshots, &oracles[i], &test)?;
        manifest.set("defense.groups", groups);
        manifest.set("defense.clean_stream_hash", &report.clean_stream_hash);
        manifest.set("defense.streams_identical", report.streams_identical());
        let t = fig4_table(&report);
        out.write_table(FIG4, "device profiling under attack per generator epoch", &t)?;
        fig4 = Some(t);
        defense = Some(report);
    }
    progress.enter("done");

    Ok(RunReport {
        table1,
        table2,
        table3,
        fig3,
        fig4,
        selection,
        generators,
        defense,
        manifest: Manifest::default(),
        test,
    })
}

fn names_of(pool: &FeatureSchema, idx: &[usize]) -> String {
    idx.iter().map(|&i| pool.feature(i).name.as_str()).collect::<Vec<_>>().join(",")
}

/// Spoofing at device-type granularity: targets and substitutes are refit
/// on type labels, and one generator is trained per pair and target.
#[allow(clippy::too_many_arguments)]
fn spoof_grid(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    pool: &Arc<FeatureSchema>,
    features: &[usize],
    subset: &[usize],
    types: &[String],
    manifest: &mut Manifest,
) -> Result<Table> {
    let (map, type_classes) = type_mapping(types)?;
    let coarse_train = train.relabel(&map, type_classes.clone())?;
    let coarse_test = test.relabel(&map, type_classes.clone())?;
    let pairs = cfg
        .spoof_pairs
        .iter()
        .map(|p| {
            let (s, t) = parse_pair(p)?;
            let find = |name: &str| {
                type_classes.lookup(name).ok_or_else(|| HarnessError::Validation(format!("spoof pair names unknown type `{name}`")))
            };
            Ok((find(&s)?, find(&t)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut head = vec!["source".to_string(), "target".to_string()];
    head.extend(cfg.targets.iter().cloned());
    let mut table = Table::new(&head);
    let mut rates = vec![vec![String::new(); cfg.targets.len()]; pairs.len()];
    let sub_cfg = cfg.substitute_config();
    for (j, kind) in cfg.targets.iter().enumerate() {
        let model = fit_target(cfg, kind, &coarse_train, features, "coarse-target")?;
        let oracle = Oracle::new(model, type_classes.clone(), pool.clone())?;
        let corpus = oracle.collect(coarse_train.features())?;
        let seed = stage_seed(cfg, &format!("coarse-substitute/{kind}"));
        let sub = train_substitute(&corpus, subset, &sub_cfg, seed)?;
        manifest.set(format!("coarse.substitute_agreement.{kind}"), num(sub.final_agreement()));
        for (p, (s, t)) in pairs.iter().enumerate() {
            let src_train = strided(&coarse_train.filter_classes(|c| c == *s), cfg.spoof_row_stride);
            let src_test = coarse_test.filter_classes(|c| c == *s);
            let tag = format!("spoof/{kind}/{}>{}", type_classes.label(*s), type_classes.label(*t));
            let run = run_attack(cfg, &sub, &oracle, &src_train, &src_test, AttackMode::Spoof(*t), &tag, false)?;
            log::info!("{tag}: victim {:.4} substitute {:.4}", run.victim.rate, run.on_substitute.rate);
            rates[p][j] = num(run.victim.rate);
        }
    }
    for ((s, t), row) in pairs.iter().zip(rates) {
        let mut r = vec![type_classes.label(*s).to_string(), type_classes.label(*t).to_string()];
        r.extend(row);
        table.push(r);
    }
    Ok(table)
}

/// One hardware identity per class. The profiler is trained on its own
/// signature stream, then evaluated under the identity generator followed by
/// every entry of `snapshots`.
pub fn run_defense(
    cfg: &ExperimentConfig,
    snapshots: &[Generator],
    victim: &dyn Victim,
    test: &Dataset,
) -> Result<(DefenseReport, usize)> {
    let n = test.n_classes();
    let ids = HardwareIdentity::population(n, stage_seed(cfg, "identities"));
    let noise = cfg.noise();
    let train: Vec<_> = signature_stream(&ids, &noise, cfg.profiler_train_signatures, stage_seed(cfg, "profiler/train"))?
        .into_iter()
        .map(|(id, s)| (s, DeviceClass(id as usize)))
        .collect();
    let profiler = fit_profiler(&train, n, &cfg.profiler_config(), stage_seed(cfg, "profiler/fit"))?;
    let mut epochs = vec![Generator::new(test.schema_arc().clone(), &cfg.generator_config(), 0)?];
    epochs.extend(snapshots.iter().cloned());
    let class_of: Vec<DeviceClass> = (0..n).map(DeviceClass).collect();
    let report = evaluate_defense(
        &profiler,
        &epochs,
        &ids,
        &class_of,
        test,
        victim,
        &noise,
        cfg.defense_rounds,
        stage_seed(cfg, "defense"),
    )?;
    Ok((report, profiler.groups().len()))
}

/// The defense curve as a report table.
pub fn fig4_table(report: &DefenseReport) -> Table {
    let mut t = Table::new(&["epoch", "profiler_clean", "profiler_attacked", "traffic_attacked", "streams_identical"]);
    for p in &report.points {
        t.push(vec![
            p.epoch.to_string(),
            num(p.profiler_clean),
            num(p.profiler_attacked),
            num(p.traffic_attacked),
            u8::from(p.attacked_stream_hash == report.clean_stream_hash).to_string(),
        ]);
    }
    t
}
