//! Two-stage identification: a shallow tree over the four profiled
//! features routes a signature to a group of similar devices, and a small
//! per-group network over profiled features and CSI picks the device.

use camolab_core::learners::mlp::{sigmoid, Activation, Adam, Mlp};
use camolab_core::learners::neural::one_hot;
use camolab_core::learners::{argmax, DecisionTree, Standardizer, TreeParams};
use camolab_core::rng::{derive_index, derive_seed, rng_from};
use camolab_core::DeviceClass;
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::signal::{RfSignature, PROFILED_FEATURES};
use crate::{ProfilerError, Result};

/// Fewest signatures per class accepted for training.
pub const MIN_SIGNATURES_PER_CLASS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilerConfig {
    /// Depth of the routing tree that proposes class groups.
    pub stage1_max_depth: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for ProfilerConfig {
    fn default() -> Self {
        ProfilerConfig { stage1_max_depth: 3, hidden: vec![32], epochs: 60, batch_size: 32, learning_rate: 3e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Expert {
    /// A group holding one class: always that class, scored by the
    /// Laplace-smoothed share of its training rows the router sent here.
    Single { class: usize, score: f64 },
    Net { classes: Vec<usize>, standardizer: Standardizer, net: Mlp },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStageClassifier {
    n_classes: usize,
    router: DecisionTree,
    groups: Vec<Vec<usize>>,
    experts: Vec<Expert>,
}

fn profiled_matrix(rows: &[&RfSignature]) -> Array2<f64> {
    let mut x = Array2::zeros((rows.len(), PROFILED_FEATURES));
    for (mut r, s) in x.outer_iter_mut().zip(rows) {
        r.assign(&ndarray::Array1::from(s.profiled().to_vec()));
    }
    x
}

fn full_matrix(rows: &[&RfSignature]) -> Array2<f64> {
    let width = rows.first().map(|s| PROFILED_FEATURES + s.csi.len()).unwrap_or(PROFILED_FEATURES);
    let mut x = Array2::zeros((rows.len(), width));
    for (mut r, s) in x.outer_iter_mut().zip(rows) {
        r.assign(&ndarray::Array1::from(s.to_vec()));
    }
    x
}

/// Classes whose training rows mostly land in each leaf of `tree`, one
/// group per used leaf. Single-class groups are merged into the group
/// holding the nearest class centroid unless the tree already isolates the
/// class (no other class shares any of its leaves).
fn propose_groups(tree: &DecisionTree, x: &Array2<f64>, y: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let leaves = tree.leaves();
    let mut hits = vec![vec![0usize; leaves.len()]; n_classes];
    for (row, &c) in x.outer_iter().zip(y) {
        let leaf = tree.leaf_index(row);
        let slot = leaves.iter().position(|&l| l == leaf).expect("leaf of this tree");
        hits[c][slot] += 1;
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); leaves.len()];
    for (c, h) in hits.iter().enumerate() {
        let best = (0..h.len()).max_by(|&a, &b| h[a].cmp(&h[b]).then(b.cmp(&a))).unwrap_or(0);
        groups[best].push(c);
    }
    groups.retain(|g| !g.is_empty());
    let isolated = |c: usize| {
        (0..leaves.len()).all(|l| hits[c][l] == 0 || (0..n_classes).all(|o| o == c || hits[o][l] == 0))
    };

    let standardizer = Standardizer::fit(x.view());
    let z = standardizer.apply_batch(x.view());
    let mut centroids = Array2::<f64>::zeros((n_classes, x.ncols()));
    let mut counts = vec![0usize; n_classes];
    for (row, &c) in z.outer_iter().zip(y) {
        let mut acc = centroids.row_mut(c);
        acc += &row;
        counts[c] += 1;
    }
    for (c, n) in counts.iter().enumerate() {
        centroids.row_mut(c).mapv_inplace(|v| v / (*n).max(1) as f64);
    }
    let dist = |a: usize, b: usize| {
        centroids.row(a).iter().zip(centroids.row(b)).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()
    };
    while groups.len() > 1 {
        let Some(single) = groups.iter().position(|g| g.len() == 1 && !isolated(g[0])) else { break };
        let class = groups[single][0];
        let mut best = (f64::INFINITY, 0usize);
        for (gi, g) in groups.iter().enumerate() {
            if gi == single {
                continue;
            }
            for &other in g {
                let d = dist(class, other);
                if d < best.0 {
                    best = (d, gi);
                }
            }
        }
        let moved = groups.remove(single);
        let target = if best.1 > single { best.1 - 1 } else { best.1 };
        groups[target].extend(moved);
        groups[target].sort_unstable();
    }
    groups
}

/// Trains the two stages on labeled signatures of `n_classes` devices.
pub fn fit_profiler(
    signatures: &[(RfSignature, DeviceClass)],
    n_classes: usize,
    cfg: &ProfilerConfig,
    seed: u64,
) -> Result<MultiStageClassifier> {
    if n_classes == 0 {
        return Err(ProfilerError::Validation("no classes".into()));
    }
    if cfg.stage1_max_depth == 0 || cfg.epochs == 0 || cfg.batch_size == 0 || cfg.hidden.contains(&0) || !(cfg.learning_rate > 0.0) {
        return Err(ProfilerError::Validation("invalid profiler settings".into()));
    }
    let mut counts = vec![0usize; n_classes];
    for (s, c) in signatures {
        if c.0 >= n_classes {
            return Err(ProfilerError::Validation(format!("class {c} outside {n_classes} classes")));
        }
        if s.to_vec().iter().any(|v| !v.is_finite()) {
            return Err(ProfilerError::Validation("non-finite signature".into()));
        }
        counts[c.0] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n < MIN_SIGNATURES_PER_CLASS) {
        return Err(ProfilerError::Validation(format!(
            "class {c} has {} signatures, need at least {MIN_SIGNATURES_PER_CLASS}",
            counts[c]
        )));
    }
    let csi_len = signatures[0].0.csi.len();
    if signatures.iter().any(|(s, _)| s.csi.len() != csi_len) {
        return Err(ProfilerError::Validation("signatures disagree on CSI length".into()));
    }
    let sigs: Vec<&RfSignature> = signatures.iter().map(|(s, _)| s).collect();
    let y: Vec<usize> = signatures.iter().map(|(_, c)| c.0).collect();
    let x4 = profiled_matrix(&sigs);
    let rows: Vec<usize> = (0..y.len()).collect();

    let proposal = DecisionTree::fit(
        x4.view(),
        &y,
        rows.clone(),
        n_classes,
        &TreeParams { max_depth: Some(cfg.stage1_max_depth), min_samples_split: 2, max_features: None },
        &mut rng_from(derive_seed(seed, "stage1")),
    );
    let groups = propose_groups(&proposal, &x4, &y, n_classes);
    let mut group_of = vec![0usize; n_classes];
    for (g, members) in groups.iter().enumerate() {
        for &c in members {
            group_of[c] = g;
        }
    }
    let group_labels: Vec<usize> = y.iter().map(|&c| group_of[c]).collect();
    let router = DecisionTree::fit(
        x4.view(),
        &group_labels,
        rows,
        groups.len(),
        &TreeParams::default(),
        &mut rng_from(derive_seed(seed, "router")),
    );

    let x_full = full_matrix(&sigs);
    let mut experts = Vec::with_capacity(groups.len());
    for (g, members) in groups.iter().enumerate() {
        if let [class] = members.as_slice() {
            let routed: Vec<usize> = (0..y.len()).filter(|&i| router.vote(x4.row(i)) == g).collect();
            let own = routed.iter().filter(|&&i| y[i] == *class).count();
            let score = (own as f64 + 1.0) / (routed.len() as f64 + 2.0);
            experts.push(Expert::Single { class: *class, score });
            continue;
        }
        let member_rows: Vec<usize> = (0..y.len()).filter(|&i| group_of[y[i]] == g).collect();
        let x = x_full.select(Axis(0), &member_rows);
        let standardizer = Standardizer::fit(x.view());
        let xs = standardizer.apply_batch(x.view());
        let local: Vec<DeviceClass> = member_rows
            .iter()
            .map(|&i| DeviceClass(members.iter().position(|&c| c == y[i]).expect("member")))
            .collect();
        let targets = one_hot(&local, members.len());
        let mut sizes = vec![xs.ncols()];
        sizes.extend(&cfg.hidden);
        sizes.push(members.len());
        let group_seed = derive_index(derive_seed(seed, "stage2"), g as u64);
        let mut net = Mlp::new(&sizes, Activation::Relu, Activation::Sigmoid, &mut rng_from(group_seed))?;
        let mut adam = Adam::new(cfg.learning_rate);
        let mut rng = rng_from(derive_seed(group_seed, "batches"));
        for _ in 0..cfg.epochs {
            net.train_epoch(xs.view(), targets.view(), cfg.batch_size, &mut adam, &mut rng)?;
        }
        if !net.is_finite() {
            return Err(ProfilerError::Validation("stage-2 network diverged".into()));
        }
        experts.push(Expert::Net { classes: members.clone(), standardizer, net });
    }
    Ok(MultiStageClassifier { n_classes, router, groups, experts })
}

/// Keeps a score strictly inside (0, 1).
fn open_unit(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl MultiStageClassifier {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Class groups, one per stage-2 model; they partition the classes.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Stage-1 decision: the group a signature is sent to.
    pub fn route(&self, sig: &RfSignature) -> usize {
        self.router.vote(ndarray::ArrayView1::from(&sig.profiled()[..]))
    }

    /// Device and its score.
    pub fn identify(&self, sig: &RfSignature) -> Result<(DeviceClass, f64)> {
        let group = self.route(sig);
        match &self.experts[group] {
            Expert::Single { class, score } => Ok((DeviceClass(*class), open_unit(*score))),
            Expert::Net { classes, standardizer, net } => {
                let v = ndarray::Array1::from(sig.to_vec());
                if v.len() != standardizer.dim() {
                    return Err(ProfilerError::Validation("signature CSI length does not match the profiler".into()));
                }
                let z = standardizer.apply(v.view());
                let logits = net.forward_trace(z.insert_axis(Axis(0)).view()).output_pre.row(0).to_owned();
                let best = argmax(logits.as_slice().expect("contiguous"));
                Ok((DeviceClass(classes[best]), open_unit(sigmoid(logits[best]))))
            }
        }
    }

    /// Fraction of `(signature, class)` pairs identified correctly.
    pub fn identification_rate(&self, labeled: &[(RfSignature, DeviceClass)]) -> Result<f64> {
        let mut counts = camolab_core::ConfusionCounts::new(self.n_classes);
        for (s, c) in labeled {
            counts.record(*c, self.identify(s)?.0)?;
        }
        Ok(camolab_core::identification_rate(&counts)?)
    }
}
