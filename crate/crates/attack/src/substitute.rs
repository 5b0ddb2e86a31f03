//! Substitute extraction: an MLP trained on oracle labels, permutation
//! feature weights, and the subset-size scan.

use std::sync::Arc;
use std::time::Instant;

use camolab_core::learners::mlp::{Activation, Adam, Mlp};
use camolab_core::learners::neural::one_hot;
use camolab_core::learners::{argmax, Standardizer};
use camolab_core::rng::{derive_index, derive_seed, rng_from};
use camolab_core::{ClassSet, Dataset, DeviceClass, FeatureSchema};
use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::blackbox::{EavesdropCorpus, Victim};
use crate::{AttackError, Result};

/// Training knobs for substitutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstituteConfig {
    pub epochs: usize,
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Per-epoch multiplicative learning-rate decay.
    pub lr_decay: f64,
    /// Fraction of the corpus held out to measure agreement.
    pub holdout_fraction: f64,
    /// Standard deviation of Gaussian noise added to the standardized
    /// training inputs, fresh each epoch. Smooths the learned function so
    /// its input gradients follow the class geometry.
    pub input_noise: f64,
}

impl Default for SubstituteConfig {
    fn default() -> Self {
        SubstituteConfig {
            epochs: 60,
            hidden: vec![64, 64],
            batch_size: 32,
            learning_rate: 1e-3,
            lr_decay: 0.95,
            holdout_fraction: 0.2,
            input_noise: 0.0,
        }
    }
}

impl SubstituteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(AttackError::Validation("substitute needs at least one epoch".into()));
        }
        if self.hidden.contains(&0) {
            return Err(AttackError::Validation("substitute hidden layers must be non-empty".into()));
        }
        if self.batch_size == 0 || !(self.learning_rate > 0.0) || !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(AttackError::Validation("invalid substitute optimizer settings".into()));
        }
        if !(self.input_noise >= 0.0 && self.input_noise.is_finite()) {
            return Err(AttackError::Validation("input noise must be a finite non-negative deviation".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(AttackError::Validation("holdout fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// The attacker's copy of the target: an MLP over a subset of the pool.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubstituteModel {
    pool: Arc<FeatureSchema>,
    classes: Arc<ClassSet>,
    subset: Vec<usize>,
    standardizer: Standardizer,
    net: Mlp,
    /// Held-out agreement with the oracle after each epoch.
    pub training_curve: Vec<f64>,
    /// Corpus rows used for training and for agreement, by index.
    train_rows: Vec<usize>,
    holdout_rows: Vec<usize>,
    frozen: bool,
}

/// Shuffled train/holdout index split.
fn holdout_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(derive_seed(seed, "holdout")));
    let held = ((n as f64) * fraction).round() as usize;
    if held == 0 || held == n {
        return Err(AttackError::Validation(format!("corpus of {n} rows is too small to hold out {fraction}")));
    }
    let holdout = order.split_off(n - held);
    Ok((order, holdout))
}

/// Trains a substitute on the `subset` columns of the corpus against its
/// oracle labels. The returned model is frozen.
pub fn train_substitute(
    corpus: &EavesdropCorpus,
    subset: &[usize],
    cfg: &SubstituteConfig,
    seed: u64,
) -> Result<SubstituteModel> {
    cfg.validate()?;
    let ds = corpus.dataset();
    if ds.present_classes() < 2 {
        return Err(camolab_core::Error::DegenerateTraining("oracle labeled every row with one class".into()).into());
    }
    let k = ds.schema().len();
    if subset.is_empty() || subset.iter().any(|&i| i >= k) {
        return Err(AttackError::Validation("feature subset out of range".into()));
    }
    let (train_rows, holdout_rows) = holdout_split(ds.len(), cfg.holdout_fraction, seed)?;
    let x_train = ds.features().select(Axis(0), &train_rows).select(Axis(1), subset);
    let standardizer = Standardizer::fit(x_train.view());
    let mut sizes = vec![subset.len()];
    sizes.extend(&cfg.hidden);
    sizes.push(ds.n_classes());
    let net = Mlp::new(&sizes, Activation::Relu, Activation::Sigmoid, &mut rng_from(derive_seed(seed, "init")))?;
    let mut model = SubstituteModel {
        pool: ds.schema_arc().clone(),
        classes: ds.classes_arc().clone(),
        subset: subset.to_vec(),
        standardizer,
        net,
        training_curve: Vec::with_capacity(cfg.epochs),
        train_rows,
        holdout_rows,
        frozen: false,
    };
    model.continue_training(corpus, cfg, seed)?;
    model.freeze();
    Ok(model)
}

impl SubstituteModel {
    /// Runs `cfg.epochs` more epochs. Only an unfrozen model can train.
    pub fn continue_training(&mut self, corpus: &EavesdropCorpus, cfg: &SubstituteConfig, seed: u64) -> Result<()> {
        cfg.validate()?;
        if self.frozen {
            return Err(AttackError::Contract("substitute is frozen".into()));
        }
        let ds = corpus.dataset();
        if ds.len() != self.train_rows.len() + self.holdout_rows.len() || ds.schema() != self.pool.as_ref() {
            return Err(AttackError::Validation("corpus does not match the one the substitute was built on".into()));
        }
        let x = self.standardizer.apply_batch(ds.features().select(Axis(0), &self.train_rows).select(Axis(1), &self.subset).view());
        let labels: Vec<DeviceClass> = self.train_rows.iter().map(|&i| ds.labels()[i]).collect();
        let targets = one_hot(&labels, self.classes.len());
        let start = self.training_curve.len();
        let mut adam = Adam::new(cfg.learning_rate * cfg.lr_decay.powi(start as i32));
        let mut rng = rng_from(derive_seed(seed, &format!("batches/{start}")));
        let noise = Normal::new(0.0, cfg.input_noise).map_err(|e| AttackError::Validation(e.to_string()))?;
        for _ in 0..cfg.epochs {
            if cfg.input_noise > 0.0 {
                let noisy = x.mapv(|v| v + noise.sample(&mut rng));
                self.net.train_epoch(noisy.view(), targets.view(), cfg.batch_size, &mut adam, &mut rng)?;
            } else {
                self.net.train_epoch(x.view(), targets.view(), cfg.batch_size, &mut adam, &mut rng)?;
            }
            adam.learning_rate *= cfg.lr_decay;
            if !self.net.is_finite() {
                return Err(AttackError::Numeric("substitute weights diverged".into()));
            }
            let agreement = self.holdout_agreement(ds)?;
            self.training_curve.push(agreement);
        }
        Ok(())
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn pool(&self) -> &Arc<FeatureSchema> {
        &self.pool
    }

    pub fn classes(&self) -> &Arc<ClassSet> {
        &self.classes
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn holdout_rows(&self) -> &[usize] {
        &self.holdout_rows
    }

    /// Agreement after the last epoch.
    pub fn final_agreement(&self) -> f64 {
        self.training_curve.last().copied().unwrap_or(0.0)
    }

    /// Network inputs (standardized subset columns) for pool vectors.
    pub fn inputs(&self, traffic: ArrayView2<'_, f64>) -> Array2<f64> {
        self.standardizer.apply_batch(traffic.select(Axis(1), &self.subset).view())
    }

    /// Predicted classes for pool vectors.
    pub fn predict_batch(&self, traffic: ArrayView2<'_, f64>) -> Result<Vec<DeviceClass>> {
        if traffic.ncols() != self.pool.len() {
            return Err(AttackError::Validation("traffic does not match the pool width".into()));
        }
        let scores = self.net.forward_batch(self.inputs(traffic).view());
        Ok(scores.outer_iter().map(|s| DeviceClass(argmax(s.as_slice().expect("row")))).collect())
    }

    /// Fraction of held-out corpus rows where the substitute matches the
    /// oracle label.
    pub fn holdout_agreement(&self, ds: &Dataset) -> Result<f64> {
        let x = ds.features().select(Axis(0), &self.holdout_rows);
        let predicted = self.predict_batch(x.view())?;
        Ok(agreement(&predicted, self.holdout_rows.iter().map(|&i| ds.labels()[i])))
    }
}

impl Victim for SubstituteModel {
    fn identify(&self, traffic: ArrayView2<'_, f64>) -> Result<Vec<DeviceClass>> {
        self.predict_batch(traffic)
    }
}

fn agreement(predicted: &[DeviceClass], labels: impl Iterator<Item = DeviceClass>) -> f64 {
    let hits = predicted.iter().zip(labels).filter(|(p, l)| **p == *l).count();
    hits as f64 / predicted.len().max(1) as f64
}

/// Permutation importance of every pool feature: the held-out agreement lost
/// when that column is shuffled across rows, averaged over `repetitions` and
/// floored at 0. Features outside the base model's subset get 0.
pub fn feature_weights(corpus: &EavesdropCorpus, base: &SubstituteModel, repetitions: usize, seed: u64) -> Result<Vec<f64>> {
    if repetitions == 0 {
        return Err(AttackError::Validation("need at least one repetition".into()));
    }
    let ds = corpus.dataset();
    let held = ds.features().select(Axis(0), base.holdout_rows());
    let labels: Vec<DeviceClass> = base.holdout_rows().iter().map(|&i| ds.labels()[i]).collect();
    let reference = agreement(&base.predict_batch(held.view())?, labels.iter().copied());
    let mut weights = vec![0.0; ds.schema().len()];
    for &feature in base.subset() {
        let mut total = 0.0;
        for rep in 0..repetitions {
            let mut rng = rng_from(derive_index(derive_seed(seed, "permute"), (feature * repetitions + rep) as u64));
            let mut column: Vec<f64> = held.column(feature).to_vec();
            column.shuffle(&mut rng);
            let mut shuffled = held.clone();
            shuffled.column_mut(feature).assign(&ndarray::Array1::from(column));
            total += reference - agreement(&base.predict_batch(shuffled.view())?, labels.iter().copied());
        }
        weights[feature] = (total / repetitions as f64).max(0.0);
    }
    Ok(weights)
}

/// Indices of the `l` largest weights; ties go to the lower index. Returned
/// in ascending index order.
pub fn top_features(weights: &[f64], l: usize) -> Result<Vec<usize>> {
    if l == 0 || l > weights.len() {
        return Err(AttackError::Validation(format!("subset size {l} outside 1..={}", weights.len())));
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut chosen = order[..l].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Relative accuracy growth over relative cost growth, minus one:
/// `((r_c − r_p)/r_c − (c_c − c_p)/c_c) / ((c_c − c_p)/c_c)`.
/// `None` when the cost is unchanged or the current rate is zero.
pub fn performance_gain(r_c: f64, r_p: f64, c_c: f64, c_p: f64) -> Option<f64> {
    if c_c == c_p || r_c == 0.0 || c_c == 0.0 {
        return None;
    }
    let cost_growth = (c_c - c_p) / c_c;
    let gain = ((r_c - r_p) / r_c - cost_growth) / cost_growth;
    gain.is_finite().then_some(gain)
}

/// One subset size of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub l: usize,
    pub subset: Vec<usize>,
    /// Held-out agreement with the oracle.
    pub agreement: f64,
    /// Median prediction time over the probe set, seconds.
    pub overhead_s: f64,
    /// Gain against the previous point; `None` for the first point and
    /// wherever the formula is undefined.
    pub gain: Option<f64>,
}

/// Rows used to time predictions.
pub const PROBE_ROWS: usize = 1000;
const TIMING_RUNS: usize = 5;

/// Trains one substitute per subset size, then times each on the same probe
/// set. Timing runs after all training so it is not disturbed by it.
pub fn performance_gain_scan(
    corpus: &EavesdropCorpus,
    weights: &[f64],
    l_values: &[usize],
    cfg: &SubstituteConfig,
    seed: u64,
) -> Result<Vec<GainPoint>> {
    if l_values.is_empty() {
        return Err(AttackError::Validation("no subset sizes to scan".into()));
    }
    if l_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AttackError::Validation("subset sizes must be strictly ascending".into()));
    }
    let mut models = Vec::with_capacity(l_values.len());
    for &l in l_values {
        let subset = top_features(weights, l)?;
        models.push(train_substitute(corpus, &subset, cfg, seed)?);
    }
    let ds = corpus.dataset();
    let probe_rows: Vec<usize> = (0..PROBE_ROWS).map(|i| i % ds.len()).collect();
    let probe = ds.features().select(Axis(0), &probe_rows);
    let mut points: Vec<GainPoint> = Vec::with_capacity(models.len());
    for (model, &l) in models.iter().zip(l_values) {
        let overhead_s = median_time(|| {
            model.predict_batch(probe.view()).map(|_| ())
        })?;
        let agreement = model.final_agreement();
        let gain = points
            .last()
            .and_then(|p| performance_gain(agreement, p.agreement, overhead_s, p.overhead_s));
        points.push(GainPoint { l, subset: model.subset().to_vec(), agreement, overhead_s, gain });
    }
    Ok(points)
}

fn median_time(mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut times = Vec::with_capacity(TIMING_RUNS);
    for _ in 0..TIMING_RUNS {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[TIMING_RUNS / 2])
}

/// How to pick a subset size from a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionPolicy {
    /// Agreement of the substitute on the full pool.
    pub full_pool_agreement: f64,
    /// Allowed agreement shortfall.
    pub epsilon: f64,
}

/// Smallest scanned size whose agreement is within `epsilon` of the full
/// pool; if none is, the size with the best agreement.
pub fn select_subset(scan: &[GainPoint], policy: &SelectionPolicy) -> Result<usize> {
    let floor = policy.full_pool_agreement - policy.epsilon;
    let mut sorted: Vec<&GainPoint> = scan.iter().collect();
    sorted.sort_by_key(|p| p.l);
    if let Some(p) = sorted.iter().find(|p| p.agreement >= floor) {
        return Ok(p.l);
    }
    sorted
        .iter()
        .max_by(|a, b| a.agreement.total_cmp(&b.agreement).then(b.l.cmp(&a.l)))
        .map(|p| p.l)
        .ok_or_else(|| AttackError::Validation("empty scan".into()))
}

/// Scan rows as CSV with columns `L,agreement,overhead_s,gain,undefined_flag`.
pub fn scan_csv(scan: &[GainPoint]) -> String {
    let mut out = String::from("L,agreement,overhead_s,gain,undefined_flag\n");
    for p in scan {
        let (gain, flag) = match p.gain {
            Some(g) => (format!("{g}"), 0),
            None => (String::new(), 1),
        };
        out.push_str(&format!("{},{},{},{},{}\n", p.l, p.agreement, p.overhead_s, gain, flag));
    }
    out
}
