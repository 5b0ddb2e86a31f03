use ndarray::{s, Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::sigmoid;
use super::{check_trainable, Classifier, Learner, Standardizer};
use crate::dataset::Dataset;
use crate::rng::rng_from;
use crate::schema::FeatureSchema;
use crate::{Error, Result};

/// Linear one-vs-rest SVM trained with the Pegasos subgradient method on the
/// regularised hinge loss. Scores are sigmoid-mapped margins.
#[derive(Debug, Clone)]
pub struct SvmLearner {
    lambda: f64,
    epochs: usize,
}

impl SvmLearner {
    pub fn new(lambda: f64, epochs: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Validation("SVM regularization must be > 0".into()));
        }
        if epochs == 0 {
            return Err(Error::Validation("SVM needs at least one epoch".into()));
        }
        Ok(SvmLearner { lambda, epochs })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SvmState {
    standardizer: Standardizer,
    /// One row per class.
    weights: Array2<f64>,
    bias: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct LinearSvm {
    schema: FeatureSchema,
    state: SvmState,
}

impl LinearSvm {
    pub fn margins(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let z = self.state.standardizer.apply(x);
        self.state.weights.dot(&z) + &self.state.bias
    }
}

impl Classifier for LinearSvm {
    fn kind(&self) -> &'static str {
        "svm"
    }

    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn n_classes(&self) -> usize {
        self.state.weights.nrows()
    }

    fn scores_unchecked(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        self.margins(x).iter().map(|&m| sigmoid(m)).collect()
    }

    fn state(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(&self.state)?)
    }
}

impl Learner for SvmLearner {
    fn kind(&self) -> &'static str {
        "svm"
    }

    fn fit(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Classifier>> {
        check_trainable(train)?;
        let standardizer = Standardizer::fit(train.features());
        let x = standardizer.apply_batch(train.features());
        let n = x.nrows();
        let d = x.ncols();
        let n_classes = train.n_classes();
        let mut weights = Array2::zeros((n_classes, d));
        let mut bias = Array1::zeros(n_classes);
        let mut rng = rng_from(seed);
        let mut order: Vec<usize> = (0..n).collect();
        let radius = 1.0 / self.lambda.sqrt();
        for c in 0..n_classes {
            // The bias is folded in as a weight on a constant unit feature.
            let mut w = Array1::<f64>::zeros(d + 1);
            let mut w_avg = Array1::<f64>::zeros(d + 1);
            let mut averaged = 0usize;
            let total = self.epochs * n;
            let mut t = 0usize;
            for _ in 0..self.epochs {
                order.shuffle(&mut rng);
                for &i in &order {
                    t += 1;
                    let eta = 1.0 / (self.lambda * t as f64);
                    let y = if train.labels()[i].0 == c { 1.0 } else { -1.0 };
                    let row = x.row(i);
                    let margin = y * (w.slice(s![..d]).dot(&row) + w[d]);
                    w *= 1.0 - eta * self.lambda;
                    if margin < 1.0 {
                        w.slice_mut(s![..d]).scaled_add(eta * y, &row);
                        w[d] += eta * y;
                    }
                    let norm = w.dot(&w).sqrt();
                    if norm > radius {
                        w *= radius / norm;
                    }
                    // Polyak average over the second half of the updates.
                    if 2 * t > total {
                        w_avg += &w;
                        averaged += 1;
                    }
                }
            }
            w_avg /= averaged.max(1) as f64;
            weights.row_mut(c).assign(&w_avg.slice(s![..d]));
            bias[c] = w_avg[d];
        }
        if weights.iter().any(|v: &f64| !v.is_finite()) {
            return Err(Error::Numeric("SVM training diverged".into()));
        }
        Ok(Box::new(LinearSvm { schema: train.schema().clone(), state: SvmState { standardizer, weights, bias } }))
    }

    fn load(&self, schema: FeatureSchema, n_classes: usize, state: &serde_json::Value) -> Result<Box<dyn Classifier>> {
        let state: SvmState = serde_json::from_value(state.clone())?;
        if state.weights.dim() != (n_classes, schema.len()) || state.bias.len() != n_classes {
            return Err(Error::Serialization("SVM state does not match its schema".into()));
        }
        Ok(Box::new(LinearSvm { schema, state }))
    }
}
