#![allow(dead_code)]

use std::sync::Arc;

use camolab_attack::substitute::{train_substitute, SubstituteConfig, SubstituteModel};
use camolab_attack::{EavesdropCorpus, Oracle};
use camolab_core::rng::rng_from;
use camolab_core::{Classifier, ClassSet, FeatureSchema, FeatureSpec};
use ndarray::{Array2, ArrayView1};
use rand::Rng;

/// `k` features on `[0, 1]`; those listed in `immutable` are fixed.
pub fn pool(k: usize, immutable: &[usize]) -> Arc<FeatureSchema> {
    Arc::new(
        FeatureSchema::new(
            (0..k).map(|i| FeatureSpec::new(format!("p{i}"), "u", 0.0, 1.0, !immutable.contains(&i))).collect(),
        )
        .unwrap(),
    )
}

pub fn classes(n: usize) -> Arc<ClassSet> {
    Arc::new(ClassSet::new((0..n).map(|c| format!("c{c}")).collect()).unwrap())
}

/// Class = how many of the evenly spaced cut points the single watched
/// feature exceeds. Trained on a one-feature schema, so the oracle must
/// project.
#[derive(Debug)]
pub struct Banded {
    pub schema: FeatureSchema,
    pub n_classes: usize,
}

impl Banded {
    pub fn new(pool: &FeatureSchema, feature: usize, n_classes: usize) -> Self {
        Banded { schema: pool.select(&[feature]).unwrap(), n_classes }
    }
}

impl Classifier for Banded {
    fn kind(&self) -> &'static str {
        "banded"
    }
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn scores_unchecked(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let band = ((x[0] * self.n_classes as f64) as usize).min(self.n_classes - 1);
        (0..self.n_classes).map(|c| if c == band { 1.0 } else { 0.0 }).collect()
    }
    fn state(&self) -> camolab_core::Result<serde_json::Value> {
        Ok(serde_json::Value::Null)
    }
}

/// Linear rule over two features: class 1 when `x_a + x_b > 1`.
#[derive(Debug)]
pub struct HalfPlane {
    pub schema: FeatureSchema,
}

impl Classifier for HalfPlane {
    fn kind(&self) -> &'static str {
        "half-plane"
    }
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }
    fn n_classes(&self) -> usize {
        2
    }
    fn scores_unchecked(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let s = x[0] + x[1] - 1.0;
        vec![-s, s]
    }
    fn state(&self) -> camolab_core::Result<serde_json::Value> {
        Ok(serde_json::Value::Null)
    }
}

pub fn uniform_traffic(rows: usize, k: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng_from(seed);
    Array2::from_shape_fn((rows, k), |_| rng.random_range(0.0..1.0))
}

pub fn banded_oracle(k: usize, feature: usize, n_classes: usize) -> Oracle {
    let p = pool(k, &[]);
    Oracle::new(Box::new(Banded::new(&p, feature, n_classes)), classes(n_classes), p).unwrap()
}

pub fn quick_cfg(epochs: usize) -> SubstituteConfig {
    SubstituteConfig { epochs, hidden: vec![16], learning_rate: 1e-2, ..SubstituteConfig::default() }
}

/// Corpus of uniform traffic labeled by a banded oracle, and a substitute
/// on the full pool.
pub fn banded_setup(rows: usize, k: usize, feature: usize, n_classes: usize, epochs: usize, seed: u64) -> (EavesdropCorpus, SubstituteModel) {
    let oracle = banded_oracle(k, feature, n_classes);
    let corpus = oracle.collect(uniform_traffic(rows, k, seed).view()).unwrap();
    let all: Vec<usize> = (0..k).collect();
    let sub = train_substitute(&corpus, &all, &quick_cfg(epochs), seed).unwrap();
    (corpus, sub)
}
