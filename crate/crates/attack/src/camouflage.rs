//! The traffic generator: a residual network that perturbs mutable features
//! so the substitute (and, by transfer, the target) mislabels them.

use std::sync::Arc;

use camolab_core::learners::argmax;
use camolab_core::learners::mlp::{sigmoid, Activation, Mlp, Sgd};
use camolab_core::metrics::{identification_rate, spoofing_rate, ConfusionCounts};
use camolab_core::rng::{derive_seed, rng_from};
use camolab_core::{Dataset, DeviceClass, FeatureSchema};
use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::blackbox::Victim;
use crate::substitute::SubstituteModel;
use crate::{AttackError, Result};

/// Upper bound of the per-feature noise multiplier.
pub const NOISE_MAX: f64 = 0.1;

/// Per-feature noise multipliers: zero on immutable features, uniform in
/// `[0, NOISE_MAX]` elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierFactor {
    pub r: Vec<f64>,
}

impl MultiplierFactor {
    pub fn sample<R: Rng + ?Sized>(schema: &FeatureSchema, rng: &mut R) -> Self {
        let mask: Vec<bool> = schema.features().iter().map(|f| f.mutable).collect();
        Self::for_mask(&mask, rng)
    }

    /// Same draw from a bare mutability mask (`true` = mutable).
    pub fn for_mask<R: Rng + ?Sized>(mutable: &[bool], rng: &mut R) -> Self {
        let r = mutable.iter().map(|&m| if m { rng.random_range(0.0..=NOISE_MAX) } else { 0.0 }).collect();
        MultiplierFactor { r }
    }
}

/// Draws `r` and returns it with the perturbation `s = r ⊙ h`.
pub fn make_noise(h: ArrayView1<'_, f64>, schema: &FeatureSchema, seed: u64) -> Result<(MultiplierFactor, Array1<f64>)> {
    schema.check(h.as_slice().ok_or_else(|| AttackError::Validation("non-contiguous vector".into()))?)?;
    let r = MultiplierFactor::sample(schema, &mut rng_from(seed));
    let s = Array1::from_iter(h.iter().zip(&r.r).map(|(h, r)| r * h));
    Ok((r, s))
}

/// `s` for every row of `h`, with fresh multipliers per row.
pub fn noise_batch<R: Rng + ?Sized>(h: ArrayView2<'_, f64>, schema: &FeatureSchema, rng: &mut R) -> Array2<f64> {
    let mut s = h.to_owned();
    for mut row in s.outer_iter_mut() {
        let r = MultiplierFactor::sample(schema, rng);
        Zip::from(&mut row).and(&r.r[..]).for_each(|v, r| *v *= r);
    }
    s
}

/// What the attack is trying to make the identifier say.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackMode {
    /// Anything but the substitute's original label.
    Misidentify,
    /// This class.
    Spoof(DeviceClass),
}

/// Generator knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub hidden: Vec<usize>,
    /// Largest change of a mutable feature, as a fraction of its range.
    pub budget: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Early stop when the success rate moved less than `tolerance` over the
    /// last `patience` epochs ...
    pub patience: usize,
    pub tolerance: f64,
    /// Divides the substitute's logits in the training objective. Values
    /// above 1 keep the gradient alive past the substitute's (usually very
    /// sharp) decision boundary, so perturbations move deeper into the
    /// target region and transfer better.
    pub temperature: f64,
    /// ... but never before this many epochs.
    pub min_epochs: usize,
    /// Keep a copy of the generator after every epoch.
    pub keep_snapshots: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            hidden: vec![64, 64],
            budget: 0.3,
            learning_rate: 0.01,
            batch_size: 16,
            epochs: 30,
            patience: 5,
            tolerance: 1e-4,
            temperature: 1.0,
            min_epochs: 10,
            keep_snapshots: false,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(AttackError::Validation("generator needs at least one epoch".into()));
        }
        if self.hidden.contains(&0) || self.batch_size == 0 || self.patience == 0 {
            return Err(AttackError::Validation("invalid generator shape or batching".into()));
        }
        if !(self.budget > 0.0 && self.budget <= 1.0)
            || !(self.learning_rate >= 0.0)
            || !(self.tolerance >= 0.0)
            || !(self.temperature > 0.0 && self.temperature.is_finite())
        {
            return Err(AttackError::Validation("invalid generator budget, learning rate, tolerance or temperature".into()));
        }
        Ok(())
    }
}

/// `h' = project(h + budget · range ⊙ tanh(net([h̃, s̃])))` where `h̃`, `s̃`
/// are range-normalised and `project` restores immutable coordinates and
/// clamps to the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    schema: Arc<FeatureSchema>,
    net: Mlp,
    budget: f64,
}

impl Generator {
    /// Fresh generator whose last layer is zero, so it starts as the identity.
    pub fn new(schema: Arc<FeatureSchema>, cfg: &GeneratorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let k = schema.len();
        let mut sizes = vec![2 * k];
        sizes.extend(&cfg.hidden);
        sizes.push(k);
        let mut net = Mlp::new(&sizes, Activation::Relu, Activation::Identity, &mut rng_from(derive_seed(seed, "generator")))?;
        let last = net.layers_mut().last_mut().expect("at least one layer");
        last.weights.fill(0.0);
        last.bias.fill(0.0);
        Ok(Generator { schema, net, budget: cfg.budget })
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    fn net_input(&self, h: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>) -> Array2<f64> {
        let mins = Array1::from(self.schema.mins());
        let ranges = Array1::from_iter(self.schema.features().iter().map(|f| f.range().max(f64::MIN_POSITIVE)));
        let hn = (&h - &mins) / &ranges;
        let sn = &s / &ranges;
        concatenate(Axis(1), &[hn.view(), sn.view()]).expect("same row count")
    }

    /// Applies the residual step to pre-activations `z`. Returns `h'` and,
    /// per coordinate, ∂h'/∂z (zero where immutable or clamped).
    fn project(&self, h: ArrayView2<'_, f64>, z: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(AttackError::Numeric("generator produced a non-finite output".into()));
        }
        let mut out = h.to_owned();
        let mut slope = Array2::zeros(h.raw_dim());
        for (j, f) in self.schema.features().iter().enumerate() {
            if !f.mutable {
                continue;
            }
            let scale = self.budget * f.range();
            for i in 0..h.nrows() {
                let t = z[[i, j]].tanh();
                let raw = h[[i, j]] + scale * t;
                let clamped = raw.clamp(f.min, f.max);
                out[[i, j]] = clamped;
                if clamped == raw {
                    slope[[i, j]] = scale * (1.0 - t * t);
                }
            }
        }
        Ok((out, slope))
    }

    fn check_batch(&self, h: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>) -> Result<()> {
        let k = self.schema.len();
        if h.ncols() != k || s.dim() != h.dim() {
            return Err(AttackError::Validation("traffic or noise does not match the generator width".into()));
        }
        if h.iter().chain(s.iter()).any(|v| !v.is_finite()) {
            return Err(AttackError::Numeric("non-finite traffic or noise".into()));
        }
        Ok(())
    }

    /// Manipulated copies of the rows of `h` given noise rows `s`.
    pub fn manipulate_batch(&self, h: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_batch(h, s)?;
        let z = self.net.forward_batch(self.net_input(h, s).view());
        Ok(self.project(h, z.view())?.0)
    }

    pub fn manipulate(&self, h: ArrayView1<'_, f64>, s: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let out = self.manipulate_batch(h.insert_axis(Axis(0)), s.insert_axis(Axis(0)))?;
        Ok(out.row(0).to_owned())
    }

    /// Manipulates `h` with fresh seeded noise per row.
    pub fn manipulate_with_noise(&self, h: ArrayView2<'_, f64>, seed: u64) -> Result<Array2<f64>> {
        let s = noise_batch(h, &self.schema, &mut rng_from(seed));
        self.manipulate_batch(h, s.view())
    }

    /// One SGD step on a batch, descending the substitute's per-class
    /// cross-entropy (at `temperature`) toward `targets`.
    fn step(
        &mut self,
        sub: &SubstituteModel,
        h: ArrayView2<'_, f64>,
        s: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        temperature: f64,
        sgd: &Sgd,
    ) -> Result<()> {
        let trace = self.net.forward_trace(self.net_input(h, s).view());
        let (h_prime, slope) = self.project(h, trace.output_pre.view())?;
        let sub_trace = sub.net().forward_trace(sub.inputs(h_prime.view()).view());
        let rows = h.nrows() as f64;
        let mut delta = sub_trace.output_pre.clone();
        Zip::from(&mut delta)
            .and(targets)
            .for_each(|d, &t| *d = (sigmoid(*d / temperature) - t) / (temperature * rows));
        let (_, dx) = sub.net().backward(&sub_trace, delta, false);
        let mut dh = Array2::<f64>::zeros(h.raw_dim());
        let scale = &sub.standardizer().scale;
        for (j, &feature) in sub.subset().iter().enumerate() {
            let mut col = dh.column_mut(feature);
            col.zip_mut_with(&dx.column(j), |d, &g| *d += g / scale[j]);
        }
        let dz = dh * slope;
        let (grads, _) = self.net.backward(&trace, dz, true);
        let grads = grads.expect("requested");
        if !grads.is_finite() {
            return Err(AttackError::Numeric("non-finite generator gradient".into()));
        }
        sgd.step(&mut self.net, &grads);
        Ok(())
    }
}

/// Per-epoch progress of generator training.
#[derive(Debug, Clone, Default)]
pub struct TrainingRecord {
    /// Success on the substitute before any update.
    pub baseline: f64,
    /// Success on the substitute after each epoch.
    pub curve: Vec<f64>,
    /// Generator after each epoch, when requested.
    pub snapshots: Vec<Generator>,
}

/// Fraction of manipulated rows on which the substitute does what the
/// attacker wants.
fn substitute_success(sub: &SubstituteModel, h_prime: ArrayView2<'_, f64>, original: &[DeviceClass], mode: AttackMode) -> Result<f64> {
    let predicted = sub.predict_batch(h_prime)?;
    let hits = match mode {
        AttackMode::Misidentify => predicted.iter().zip(original).filter(|(p, o)| p != o).count(),
        AttackMode::Spoof(t) => predicted.iter().filter(|p| **p == t).count(),
    };
    Ok(hits as f64 / predicted.len().max(1) as f64)
}

/// Cost of an immutable-feature mismatch relative to mutable distance.
const IMMUTABLE_PENALTY: f64 = 1e3;

/// For every class, the closest other class by centroid distance in
/// range-normalised units, where differences on immutable features are
/// heavily penalised (the generator cannot close them). Classes absent from
/// `labels` map to themselves.
pub fn nearest_reachable_classes(schema: &FeatureSchema, h: ArrayView2<'_, f64>, labels: &[DeviceClass], n_classes: usize) -> Vec<usize> {
    let k = schema.len();
    let mut sums = Array2::<f64>::zeros((n_classes, k));
    let mut counts = vec![0usize; n_classes];
    for (row, c) in h.outer_iter().zip(labels) {
        let mut acc = sums.row_mut(c.0);
        acc += &row;
        counts[c.0] += 1;
    }
    let centroid = |c: usize| sums.row(c).mapv(|v| v / counts[c] as f64);
    (0..n_classes)
        .map(|o| {
            if counts[o] == 0 {
                return o;
            }
            let co = centroid(o);
            let mut best = (f64::INFINITY, o);
            for c in (0..n_classes).filter(|&c| c != o && counts[c] > 0) {
                let cc = centroid(c);
                let mut d2 = 0.0;
                for (j, f) in schema.features().iter().enumerate() {
                    let diff = (co[j] - cc[j]) / f.range().max(f64::MIN_POSITIVE);
                    d2 += if f.mutable { diff * diff } else { IMMUTABLE_PENALTY * diff * diff };
                }
                if d2 < best.0 {
                    best = (d2, c);
                }
            }
            best.1
        })
        .collect()
}

/// Trains `g` against a frozen substitute on the rows of `train`.
pub fn train_generator(
    g: &mut Generator,
    sub: &SubstituteModel,
    train: &Dataset,
    mode: AttackMode,
    cfg: &GeneratorConfig,
    seed: u64,
) -> Result<TrainingRecord> {
    cfg.validate()?;
    if !sub.is_frozen() {
        return Err(AttackError::Contract("generator training needs a frozen substitute".into()));
    }
    if train.schema() != g.schema.as_ref() || sub.pool().as_ref() != g.schema.as_ref() {
        return Err(AttackError::Validation("generator, substitute and traffic must share the pool schema".into()));
    }
    if train.is_empty() {
        return Err(AttackError::Validation("no traffic to train on".into()));
    }
    let n_classes = sub.classes().len();
    if let AttackMode::Spoof(t) = mode {
        if t.0 >= n_classes {
            return Err(AttackError::Validation(format!("spoof target {t} outside {n_classes} classes")));
        }
    }
    let h = train.features();
    let scores = sub.net().forward_batch(sub.inputs(h).view());
    let original: Vec<DeviceClass> = scores.outer_iter().map(|r| DeviceClass(argmax(&r.to_vec()))).collect();
    let neighbours = match mode {
        AttackMode::Misidentify => nearest_reachable_classes(&g.schema, h, &original, n_classes),
        AttackMode::Spoof(_) => Vec::new(),
    };
    let mut targets = Array2::<f64>::zeros((h.nrows(), n_classes));
    for (i, o) in original.iter().enumerate() {
        let hot = match mode {
            AttackMode::Misidentify => neighbours[o.0],
            AttackMode::Spoof(t) => t.0,
        };
        targets[[i, hot]] = 1.0;
    }
    let eval_noise = noise_batch(h, &g.schema, &mut rng_from(derive_seed(seed, "eval-noise")));
    let success = |g: &Generator| -> Result<f64> {
        let h_prime = g.manipulate_batch(h, eval_noise.view())?;
        substitute_success(sub, h_prime.view(), &original, mode)
    };
    let mut record = TrainingRecord { baseline: success(g)?, ..Default::default() };
    let sgd = Sgd { learning_rate: cfg.learning_rate };
    let mut rng = rng_from(derive_seed(seed, "generator-train"));
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let s_all = noise_batch(h, &g.schema, &mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let hb = h.select(Axis(0), chunk);
            let sb = s_all.select(Axis(0), chunk);
            let tb = targets.select(Axis(0), chunk);
            g.step(sub, hb.view(), sb.view(), tb.view(), cfg.temperature, &sgd)?;
        }
        record.curve.push(success(g)?);
        if cfg.keep_snapshots {
            record.snapshots.push(g.clone());
        }
        let done = epoch + 1;
        if done >= cfg.min_epochs.max(cfg.patience + 1) {
            let now = record.curve[done - 1];
            let before = record.curve[done - 1 - cfg.patience];
            if (now - before).abs() < cfg.tolerance {
                log::debug!("generator plateaued after {done} epochs at {now:.4}");
                break;
            }
        }
    }
    Ok(record)
}

/// Outcome of an attack against one victim.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub mode: AttackMode,
    /// Identification rate (misidentify) or spoofing rate (spoof).
    pub rate: f64,
    pub predictions: Vec<DeviceClass>,
    /// Manipulated rows that broke the functionality constraint.
    pub violations: usize,
}

/// Manipulates every test row with fresh seeded noise and measures the
/// victim on the result: identification rate against the true labels for
/// misidentification, spoofing rate for spoofing.
pub fn evaluate_attack(g: &Generator, victim: &dyn Victim, test: &Dataset, mode: AttackMode, seed: u64) -> Result<AttackOutcome> {
    if test.is_empty() {
        return Err(camolab_core::Error::EmptyEvaluation("attack test set").into());
    }
    let h_prime = g.manipulate_with_noise(test.features(), derive_seed(seed, "attack-noise"))?;
    let predictions = victim.identify(h_prime.view())?;
    let rate = match mode {
        AttackMode::Misidentify => {
            let mut counts = ConfusionCounts::new(test.n_classes());
            for (p, t) in predictions.iter().zip(test.labels()) {
                counts.record(*t, *p)?;
            }
            identification_rate(&counts)?
        }
        AttackMode::Spoof(t) => spoofing_rate(&predictions, t)?,
    };
    let violations = functionality_violations(g.schema(), test.features(), h_prime.view());
    Ok(AttackOutcome { mode, rate, predictions, violations })
}

/// Count of manipulated rows breaking the functionality constraint: an
/// immutable coordinate not bit-equal to the original, or any coordinate
/// outside the schema range.
pub fn functionality_violations(schema: &FeatureSchema, h: ArrayView2<'_, f64>, h_prime: ArrayView2<'_, f64>) -> usize {
    h.outer_iter()
        .zip(h_prime.outer_iter())
        .filter(|(a, b)| {
            schema.features().iter().enumerate().any(|(j, f)| {
                let v = b[j];
                !(v >= f.min && v <= f.max) || (!f.mutable && v.to_bits() != a[j].to_bits())
            })
        })
        .count()
}
