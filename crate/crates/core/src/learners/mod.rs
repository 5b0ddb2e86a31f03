//! The classifier zoo: five target-model families behind one trait object
//! interface, registered by name so experiments pick them from config.

use std::collections::BTreeMap;
use std::fmt::Debug;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassSet, Dataset, DeviceClass};
use crate::schema::FeatureSchema;
use crate::{Error, Result};

pub mod forest;
pub mod knn;
pub mod mlp;
pub mod neural;
pub mod svm;
pub mod tree;

pub use forest::{ForestLearner, RandomForest};
pub use knn::{KnnClassifier, KnnLearner};
pub use mlp::{Activation, Adam, Dense, Gradients, Mlp, Objective};
pub use neural::{NeuralNetClassifier, NeuralNetLearner};
pub use svm::{LinearSvm, SvmLearner};
pub use tree::{DecisionTree, TreeClassifier, TreeLearner, TreeParams};

/// A trained multi-class model over a fixed feature schema.
pub trait Classifier: Send + Sync + Debug {
    /// Registry name of the learner that produced this model.
    fn kind(&self) -> &'static str;

    fn schema(&self) -> &FeatureSchema;

    fn n_classes(&self) -> usize;

    /// Per-class scores for a vector already known to match the schema.
    fn scores_unchecked(&self, x: ArrayView1<'_, f64>) -> Vec<f64>;

    /// Kind-specific trained state, for [`save_classifier`].
    fn state(&self) -> Result<serde_json::Value>;

    fn predict_scores(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        check_input(self.schema(), x)?;
        Ok(self.scores_unchecked(x))
    }

    /// Highest-scoring class; ties go to the lowest class id.
    fn predict(&self, x: ArrayView1<'_, f64>) -> Result<DeviceClass> {
        Ok(DeviceClass(argmax(&self.predict_scores(x)?)))
    }

    fn predict_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Vec<DeviceClass>> {
        xs.outer_iter().map(|x| self.predict(x)).collect()
    }
}

/// Learner strategy: validated hyperparameters plus the fit and load routines
/// of one model family.
pub trait Learner: Send + Sync + Debug {
    fn kind(&self) -> &'static str;

    fn fit(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Classifier>>;

    fn load(&self, schema: FeatureSchema, n_classes: usize, state: &serde_json::Value)
        -> Result<Box<dyn Classifier>>;
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn check_input(schema: &FeatureSchema, x: ArrayView1<'_, f64>) -> Result<()> {
    if x.len() != schema.len() {
        return Err(Error::Validation(format!(
            "input has {} features, model schema has {}",
            x.len(),
            schema.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("input contains a non-finite value".into()));
    }
    Ok(())
}

fn check_trainable(train: &Dataset) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    if train.present_classes() < 2 {
        return Err(Error::DegenerateTraining(format!(
            "{} class(es) present in the training set",
            train.present_classes()
        )));
    }
    Ok(())
}

/// Per-feature z-scoring fitted on training rows. Zero-variance features
/// get unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean = x.sum_axis(Axis(0)) / n;
        let mut var = Array1::<f64>::zeros(x.ncols());
        for row in x.outer_iter() {
            for ((v, r), m) in var.iter_mut().zip(row.iter()).zip(mean.iter()) {
                *v += (r - m) * (r - m);
            }
        }
        let scale = var.mapv(|v| {
            let s = (v / n).sqrt();
            if s > 1e-12 { s } else { 1.0 }
        });
        Standardizer { mean, scale }
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer { mean: Array1::zeros(dim), scale: Array1::ones(dim) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        (&x - &self.mean) / &self.scale
    }

    pub fn apply_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.scale
    }
}

/// Hyperparameters for every registered learner. Defaults are declared
/// choices, not tuned values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub knn_k: usize,
    pub tree_max_depth: Option<usize>,
    pub tree_min_samples_split: usize,
    pub forest_trees: usize,
    pub forest_max_depth: Option<usize>,
    /// Features tried per split; `None` means round(sqrt(K)).
    pub forest_max_features: Option<usize>,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub mlp_hidden: Vec<usize>,
    pub mlp_epochs: usize,
    pub mlp_batch_size: usize,
    pub mlp_learning_rate: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            knn_k: 5,
            tree_max_depth: None,
            tree_min_samples_split: 2,
            forest_trees: 50,
            forest_max_depth: None,
            forest_max_features: None,
            svm_lambda: 1e-4,
            svm_epochs: 30,
            mlp_hidden: vec![64, 64],
            mlp_epochs: 30,
            mlp_batch_size: 32,
            mlp_learning_rate: 1e-3,
        }
    }
}

/// Name → learner map.
#[derive(Debug, Default)]
pub struct Registry {
    learners: BTreeMap<&'static str, Box<dyn Learner>>,
}

/// Registry names of the five target families, in report order.
pub const TARGET_KINDS: [&str; 5] = ["random_forest", "decision_tree", "svm", "knn", "neural_net"];

impl Registry {
    pub fn empty() -> Self {
        Registry::default()
    }

    /// All five families configured from `params`.
    pub fn with_defaults(params: &Hyperparams) -> Result<Self> {
        let mut r = Registry::empty();
        r.register(Box::new(KnnLearner::new(params.knn_k)?));
        r.register(Box::new(TreeLearner::new(TreeParams {
            max_depth: params.tree_max_depth,
            min_samples_split: params.tree_min_samples_split,
            max_features: None,
        })?));
        r.register(Box::new(ForestLearner::new(
            params.forest_trees,
            params.forest_max_depth,
            params.forest_max_features,
        )?));
        r.register(Box::new(SvmLearner::new(params.svm_lambda, params.svm_epochs)?));
        r.register(Box::new(NeuralNetLearner::new(
            params.mlp_hidden.clone(),
            params.mlp_epochs,
            params.mlp_batch_size,
            params.mlp_learning_rate,
        )?));
        Ok(r)
    }

    /// Adds or replaces the learner registered under its kind name.
    pub fn register(&mut self, learner: Box<dyn Learner>) {
        self.learners.insert(learner.kind(), learner);
    }

    pub fn get(&self, kind: &str) -> Result<&dyn Learner> {
        self.learners
            .get(kind)
            .map(|l| l.as_ref())
            .ok_or_else(|| Error::Validation(format!("unknown classifier kind `{kind}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.learners.keys().copied()
    }

    pub fn fit(&self, kind: &str, train: &Dataset, seed: u64) -> Result<Box<dyn Classifier>> {
        self.get(kind)?.fit(train, seed)
    }

    /// Reads a model written by [`save_classifier`].
    pub fn load(&self, text: &str) -> Result<(Box<dyn Classifier>, ClassSet)> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Serialization(format!("not a classifier file (format `{}`)", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported classifier file version {} (expected {MODEL_VERSION})",
                file.version
            )));
        }
        let classes = ClassSet::new(file.classes)?;
        let model = self.get(&file.kind)?.load(file.schema, classes.len(), &file.state)?;
        Ok((model, classes))
    }
}

/// Fits `kind` from the default registry configured by `params`.
pub fn fit(kind: &str, train: &Dataset, params: &Hyperparams, seed: u64) -> Result<Box<dyn Classifier>> {
    Registry::with_defaults(params)?.fit(kind, train, seed)
}

pub const MODEL_FORMAT: &str = "camolab-classifier";
pub const MODEL_VERSION: u32 = 1;

/// On-disk model layout (JSON):
///
/// ```text
/// { "format": "camolab-classifier", "version": 1, "kind": "<registry name>",
///   "schema": { "features": [...] }, "classes": ["label", ...],
///   "state": <kind-specific> }
/// ```
///
/// Floats are written in shortest round-trip form, so a save/load cycle is
/// bit-exact.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kind: String,
    schema: FeatureSchema,
    classes: Vec<String>,
    state: serde_json::Value,
}

pub fn save_classifier(model: &dyn Classifier, classes: &ClassSet) -> Result<String> {
    if classes.len() != model.n_classes() {
        return Err(Error::Validation("class set does not match the model".into()));
    }
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        kind: model.kind().into(),
        schema: model.schema().clone(),
        classes: classes.labels().to_vec(),
        state: model.state()?,
    };
    Ok(serde_json::to_string(&file)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.5, 0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
        assert_eq!(argmax(&[0.0]), 0);
    }

    #[test]
    fn registry_knows_all_five_kinds() {
        let r = Registry::with_defaults(&Hyperparams::default()).unwrap();
        let mut names: Vec<_> = r.names().collect();
        names.sort();
        let mut expected = TARGET_KINDS.to_vec();
        expected.sort();
        assert_eq!(names, expected);
        assert!(r.get("gbdt").is_err());
    }

    #[test]
    fn standardizer_handles_constant_columns() {
        let x = ndarray::array![[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit(x.view());
        assert_eq!(s.mean, ndarray::array![2.0, 5.0]);
        assert_eq!(s.scale, ndarray::array![1.0, 1.0]);
        assert_eq!(s.apply(x.row(0)), ndarray::array![-1.0, 0.0]);
    }
}
