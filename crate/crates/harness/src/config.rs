//! Experiment configuration. Every setting is a flat key whose value is a
//! TOML value, so the same keys work in a config file, in `--set key=value`
//! flags and in the run manifest. Precedence: flag > file > default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use camolab_attack::camouflage::GeneratorConfig;
use camolab_attack::substitute::SubstituteConfig;
use camolab_core::learners::TARGET_KINDS;
use camolab_core::Hyperparams;
use camolab_profiler::{NoiseLevels, ProfilerConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,

    // data
    pub n_classes: usize,
    pub rows_per_class: usize,
    /// Multiplies the within-class spread of the synthetic profiles.
    pub spread_scale: f64,
    /// Use this dataset CSV instead of generating one.
    pub dataset: Option<PathBuf>,
    /// Feature pool schema file (TOML); the built-in pool when unset.
    pub schema: Option<PathBuf>,
    /// Class labels, in id order; the synthetic labels when unset.
    pub classes: Option<Vec<String>>,
    /// Device type of every class, in id order, for the spoofing grid; the
    /// synthetic grouping when unset.
    pub class_types: Option<Vec<String>>,
    /// Pool features forced mutable / immutable.
    pub mutable: Vec<String>,
    pub immutable: Vec<String>,
    pub train_fraction: f64,

    // targets
    pub targets: Vec<String>,
    /// Pool features the targets are trained on; a fixed default subset
    /// when unset.
    pub target_features: Option<Vec<String>>,
    pub knn_k: usize,
    pub forest_trees: usize,
    pub svm_epochs: usize,
    pub mlp_epochs: usize,

    // substitute
    pub substitute_epochs: usize,
    pub substitute_hidden: Vec<usize>,
    pub substitute_learning_rate: f64,
    pub substitute_lr_decay: f64,
    pub substitute_batch_size: usize,
    pub holdout_fraction: f64,

    // feature selection
    pub scan: bool,
    /// Target whose oracle drives the feature-selection scan.
    pub scan_target: String,
    pub scan_sizes: Vec<usize>,
    pub selection_epsilon: f64,
    pub weight_repetitions: usize,
    /// Skip the scan and use this many top-weighted features.
    pub subset_size: Option<usize>,

    // generator
    pub generator_epochs: usize,
    pub generator_hidden: Vec<usize>,
    pub generator_learning_rate: f64,
    pub generator_budget: f64,
    pub generator_batch_size: usize,
    /// Divides the substitute's logits in the generator objective.
    pub generator_temperature: f64,
    /// Training never stops early before this many epochs.
    pub generator_min_epochs: usize,
    /// Every n-th attacker row is used to train the generator.
    pub generator_row_stride: usize,
    /// The same for spoofing, over the source type's rows only.
    pub spoof_row_stride: usize,

    // spoofing
    pub spoof: bool,
    /// Directed type pairs `source>target`.
    pub spoof_pairs: Vec<String>,

    // defense
    pub defense: bool,
    pub defense_target: String,
    pub defense_rounds: usize,
    pub profiler_train_signatures: usize,
    pub noise_scale: f64,

    /// Output directory. Not part of the config hash.
    pub out: PathBuf,
}

/// Compatible pairs plus the camera/switch pair, both directions.
pub const DEFAULT_SPOOF_PAIRS: [&str; 10] = [
    "camera>hub",
    "hub>camera",
    "camera>health",
    "health>camera",
    "hub>health",
    "health>hub",
    "switch>health",
    "health>switch",
    "camera>switch",
    "switch>camera",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sub = SubstituteConfig::default();
        let gen = GeneratorConfig::default();
        let hp = Hyperparams::default();
        ExperimentConfig {
            seed: 42,
            n_classes: 28,
            rows_per_class: 500,
            spread_scale: 1.0,
            dataset: None,
            schema: None,
            classes: None,
            class_types: None,
            mutable: Vec::new(),
            immutable: Vec::new(),
            train_fraction: 0.8,
            targets: TARGET_KINDS.iter().map(|s| s.to_string()).collect(),
            target_features: None,
            knn_k: hp.knn_k,
            forest_trees: hp.forest_trees,
            svm_epochs: hp.svm_epochs,
            mlp_epochs: hp.mlp_epochs,
            substitute_epochs: sub.epochs,
            substitute_hidden: sub.hidden,
            substitute_learning_rate: sub.learning_rate,
            substitute_lr_decay: sub.lr_decay,
            substitute_batch_size: sub.batch_size,
            holdout_fraction: sub.holdout_fraction,
            scan: true,
            scan_target: "random_forest".into(),
            scan_sizes: vec![2, 4, 6, 8, 10, 12, 16, 20, 24],
            selection_epsilon: 0.02,
            weight_repetitions: 10,
            subset_size: None,
            generator_epochs: 60,
            generator_hidden: gen.hidden,
            generator_learning_rate: gen.learning_rate,
            generator_budget: gen.budget,
            generator_batch_size: gen.batch_size,
            generator_temperature: gen.temperature,
            generator_min_epochs: gen.min_epochs,
            generator_row_stride: 5,
            spoof_row_stride: 4,
            spoof: true,
            spoof_pairs: DEFAULT_SPOOF_PAIRS.iter().map(|s| s.to_string()).collect(),
            defense: true,
            defense_target: "random_forest".into(),
            defense_rounds: 20,
            profiler_train_signatures: 40,
            noise_scale: 1.0,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Builds the config from an optional file and `key=value` overrides.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
                if is_manifest(&text) {
                    manifest_table(&text, path)?
                } else {
                    text.parse::<toml::Table>()
                        .map_err(|e| HarnessError::Validation(format!("{}: {}", path.display(), e.message())))?
                }
            }
            None => toml::Table::new(),
        };
        for (key, raw) in overrides {
            table.insert(key.clone(), parse_value(raw));
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Validation(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Validation(m.to_string()));
        if self.n_classes < 2 {
            return bad("n_classes must be at least 2");
        }
        if self.rows_per_class < 2 {
            return bad("rows_per_class must be at least 2");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie in (0, 1)");
        }
        if !(self.spread_scale >= 0.0 && self.spread_scale.is_finite()) || !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad("spread_scale and noise_scale must be finite and non-negative");
        }
        if self.targets.is_empty() {
            return bad("no targets configured");
        }
        if let Some(k) = self.targets.iter().find(|k| !TARGET_KINDS.contains(&k.as_str())) {
            return Err(HarnessError::Validation(format!("unknown target kind `{k}`")));
        }
        for (what, kind) in [("scan_target", &self.scan_target), ("defense_target", &self.defense_target)] {
            if !self.targets.contains(kind) {
                return Err(HarnessError::Validation(format!("{what} `{kind}` is not among the targets")));
            }
        }
        if self.generator_row_stride == 0 || self.spoof_row_stride == 0 || self.weight_repetitions == 0 || self.defense_rounds == 0 {
            return bad("row strides, weight_repetitions and defense_rounds must be positive");
        }
        if self.scan && self.subset_size.is_none() && self.scan_sizes.is_empty() {
            return bad("scan enabled with no scan_sizes");
        }
        for p in &self.spoof_pairs {
            parse_pair(p)?;
        }
        self.substitute_config().validate()?;
        self.generator_config().validate()?;
        Ok(())
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            knn_k: self.knn_k,
            forest_trees: self.forest_trees,
            svm_epochs: self.svm_epochs,
            mlp_epochs: self.mlp_epochs,
            ..Hyperparams::default()
        }
    }

    pub fn substitute_config(&self) -> SubstituteConfig {
        SubstituteConfig {
            epochs: self.substitute_epochs,
            hidden: self.substitute_hidden.clone(),
            batch_size: self.substitute_batch_size,
            learning_rate: self.substitute_learning_rate,
            lr_decay: self.substitute_lr_decay,
            holdout_fraction: self.holdout_fraction,
            ..SubstituteConfig::default()
        }
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            hidden: self.generator_hidden.clone(),
            budget: self.generator_budget,
            learning_rate: self.generator_learning_rate,
            batch_size: self.generator_batch_size,
            epochs: self.generator_epochs,
            temperature: self.generator_temperature,
            min_epochs: self.generator_min_epochs,
            ..GeneratorConfig::default()
        }
    }

    pub fn profiler_config(&self) -> ProfilerConfig {
        ProfilerConfig::default()
    }

    pub fn noise(&self) -> NoiseLevels {
        NoiseLevels::default().scaled(self.noise_scale)
    }

    /// Flat `key = value` pairs of every setting, values in TOML syntax.
    pub fn flat(&self) -> BTreeMap<String, String> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let table = value.as_table().expect("config is a table");
        table.iter().map(|(k, v)| (k.clone(), render(v))).collect()
    }

    /// SHA-256 over every setting except the output directory.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.flat() {
            if k == "out" {
                continue;
            }
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// Value text as it appears in TOML, on one line.
fn render(v: &toml::Value) -> String {
    match v {
        toml::Value::Array(items) => format!("[{}]", items.iter().map(render).collect::<Vec<_>>().join(", ")),
        other => other.to_string(),
    }
}

/// A flag value in TOML syntax, or a bare string when it does not parse.
pub fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// `source>target` type names.
pub fn parse_pair(p: &str) -> Result<(String, String)> {
    match p.split_once('>') {
        Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() && a.trim() != b.trim() => {
            Ok((a.trim().to_string(), b.trim().to_string()))
        }
        _ => Err(HarnessError::Validation(format!("spoof pair `{p}` is not `source>target`"))),
    }
}

pub const MANIFEST_MARKER: &str = "manifest_format";

fn is_manifest(text: &str) -> bool {
    text.lines().any(|l| l.trim_start().starts_with(MANIFEST_MARKER))
}

/// The `config.*` entries of a run manifest as a table.
fn manifest_table(text: &str, path: &Path) -> Result<toml::Table> {
    let mut table = toml::Table::new();
    for (i, line) in text.lines().enumerate() {
        let Some(rest) = line.strip_prefix("config.") else { continue };
        let (key, value) = rest.split_once('=').ok_or_else(|| HarnessError::Parse {
            path: path.display().to_string(),
            line: i as u64 + 1,
            column: 1,
            message: "expected key=value".into(),
        })?;
        table.insert(key.trim().to_string(), parse_value(value.trim()));
    }
    Ok(table)
}
