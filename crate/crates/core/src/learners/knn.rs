use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{check_trainable, Classifier, Learner, Standardizer};
use crate::dataset::Dataset;
use crate::schema::FeatureSchema;
use crate::{Error, Result};

/// k-nearest neighbours on z-scored features with Euclidean distance.
#[derive(Debug, Clone)]
pub struct KnnLearner {
    k: usize,
}

impl KnnLearner {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Validation("k-NN needs k >= 1".into()));
        }
        Ok(KnnLearner { k })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct KnnState {
    k: usize,
    standardizer: Standardizer,
    points: Array2<f64>,
    labels: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct KnnClassifier {
    schema: FeatureSchema,
    n_classes: usize,
    state: KnnState,
}

impl KnnClassifier {
    /// Stores `train` as-is, without the class-count check a fit performs.
    /// Useful for tiny hand-built reference sets.
    pub fn memorize(train: &Dataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Validation("k-NN needs k >= 1".into()));
        }
        if train.is_empty() {
            return Err(Error::Validation("training set is empty".into()));
        }
        let standardizer = Standardizer::fit(train.features());
        let points = standardizer.apply_batch(train.features());
        Ok(KnnClassifier {
            schema: train.schema().clone(),
            n_classes: train.n_classes(),
            state: KnnState { k, standardizer, points, labels: train.labels().iter().map(|c| c.0).collect() },
        })
    }

    /// Indices of the k nearest stored points, nearest first. Equal distances
    /// are ordered by stored row index.
    pub fn neighbours(&self, x: ArrayView1<'_, f64>) -> Vec<usize> {
        let q = self.state.standardizer.apply(x);
        let mut dist: Vec<(f64, usize)> = self
            .state
            .points
            .outer_iter()
            .enumerate()
            .map(|(i, p)| {
                let d: f64 = p.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        let k = self.state.k.min(dist.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
            dist.truncate(k);
        }
        dist.sort_by(cmp);
        dist.into_iter().map(|(_, i)| i).collect()
    }
}

impl Classifier for KnnClassifier {
    fn kind(&self) -> &'static str {
        "knn"
    }

    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Vote fractions among the k nearest training points.
    fn scores_unchecked(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let nn = self.neighbours(x);
        let mut votes = vec![0.0; self.n_classes];
        for &i in &nn {
            votes[self.state.labels[i]] += 1.0;
        }
        let k = nn.len() as f64;
        votes.iter_mut().for_each(|v| *v /= k);
        votes
    }

    fn state(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(&self.state)?)
    }
}

impl Learner for KnnLearner {
    fn kind(&self) -> &'static str {
        "knn"
    }

    fn fit(&self, train: &Dataset, _seed: u64) -> Result<Box<dyn Classifier>> {
        check_trainable(train)?;
        Ok(Box::new(KnnClassifier::memorize(train, self.k)?))
    }

    fn load(&self, schema: FeatureSchema, n_classes: usize, state: &serde_json::Value) -> Result<Box<dyn Classifier>> {
        let state: KnnState = serde_json::from_value(state.clone())?;
        if state.points.ncols() != schema.len() || state.labels.len() != state.points.nrows() {
            return Err(Error::Serialization("k-NN state does not match its schema".into()));
        }
        if state.labels.iter().any(|&l| l >= n_classes) || state.k == 0 {
            return Err(Error::Serialization("k-NN state is inconsistent".into()));
        }
        Ok(Box::new(KnnClassifier { schema, n_classes, state }))
    }
}
