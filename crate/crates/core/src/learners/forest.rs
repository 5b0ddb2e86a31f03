use ndarray::ArrayView1;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{check_features, DecisionTree, TreeParams};
use super::{check_trainable, Classifier, Learner};
use crate::dataset::Dataset;
use crate::rng::{derive_index, rng_from};
use crate::schema::FeatureSchema;
use crate::{Error, Result};

/// Bagged CART trees with per-split feature subsampling. Each tree casts one
/// vote (its leaf majority); scores are vote fractions.
#[derive(Debug, Clone)]
pub struct ForestLearner {
    n_trees: usize,
    max_depth: Option<usize>,
    max_features: Option<usize>,
}

impl ForestLearner {
    pub fn new(n_trees: usize, max_depth: Option<usize>, max_features: Option<usize>) -> Result<Self> {
        if n_trees == 0 {
            return Err(Error::Validation("forest needs at least one tree".into()));
        }
        TreeParams { max_depth, min_samples_split: 2, max_features }.validate()?;
        Ok(ForestLearner { n_trees, max_depth, max_features })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    schema: FeatureSchema,
    n_classes: usize,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Forest from already-built trees.
    pub fn from_trees(schema: FeatureSchema, n_classes: usize, trees: Vec<DecisionTree>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Validation("forest needs at least one tree".into()));
        }
        for t in &trees {
            if t.n_classes() != n_classes {
                return Err(Error::Validation("tree class count does not match the forest".into()));
            }
            check_features(t, schema.len()).map_err(|e| Error::Validation(e.to_string()))?;
        }
        Ok(RandomForest { schema, n_classes, trees })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }
}

impl Classifier for RandomForest {
    fn kind(&self) -> &'static str {
        "random_forest"
    }

    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn scores_unchecked(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for t in &self.trees {
            votes[t.vote(x)] += 1.0;
        }
        let n = self.trees.len() as f64;
        votes.iter_mut().for_each(|v| *v /= n);
        votes
    }

    fn state(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(&self.trees)?)
    }
}

impl Learner for ForestLearner {
    fn kind(&self) -> &'static str {
        "random_forest"
    }

    fn fit(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Classifier>> {
        check_trainable(train)?;
        let k = train.schema().len();
        let max_features = self
            .max_features
            .unwrap_or_else(|| ((k as f64).sqrt().round() as usize).max(1))
            .min(k);
        let params = TreeParams { max_depth: self.max_depth, min_samples_split: 2, max_features: Some(max_features) };
        let y: Vec<usize> = train.labels().iter().map(|c| c.0).collect();
        let n = train.len();
        let trees = (0..self.n_trees)
            .map(|t| {
                let mut rng = rng_from(derive_index(seed, t as u64));
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                DecisionTree::fit(train.features(), &y, rows, train.n_classes(), &params, &mut rng)
            })
            .collect();
        Ok(Box::new(RandomForest { schema: train.schema().clone(), n_classes: train.n_classes(), trees }))
    }

    fn load(&self, schema: FeatureSchema, n_classes: usize, state: &serde_json::Value) -> Result<Box<dyn Classifier>> {
        let trees: Vec<DecisionTree> = serde_json::from_value(state.clone())?;
        let trees = trees
            .into_iter()
            .map(|t| DecisionTree::from_nodes(t.nodes().to_vec(), t.n_classes()))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Serialization(e.to_string()))?;
        let forest =
            RandomForest::from_trees(schema, n_classes, trees).map_err(|e| Error::Serialization(e.to_string()))?;
        Ok(Box::new(forest))
    }
}
