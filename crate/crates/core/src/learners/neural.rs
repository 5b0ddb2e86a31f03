use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Adam, Mlp};
use super::{argmax, check_input, check_trainable, Classifier, Learner, Standardizer};
use crate::dataset::{Dataset, DeviceClass};
use crate::rng::{derive_seed, rng_from};
use crate::schema::FeatureSchema;
use crate::{Error, Result};

/// Fully connected network with ReLU hidden layers and per-class sigmoid
/// outputs, trained with Adam on mean binary cross-entropy.
#[derive(Debug, Clone)]
pub struct NeuralNetLearner {
    hidden: Vec<usize>,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
}

impl NeuralNetLearner {
    pub fn new(hidden: Vec<usize>, epochs: usize, batch_size: usize, learning_rate: f64) -> Result<Self> {
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::Validation("neural net needs at least one non-empty hidden layer".into()));
        }
        if epochs == 0 || batch_size == 0 {
            return Err(Error::Validation("neural net needs epochs >= 1 and batch size >= 1".into()));
        }
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Validation("learning rate must be > 0".into()));
        }
        Ok(NeuralNetLearner { hidden, epochs, batch_size, learning_rate })
    }
}

/// One-hot target rows.
pub fn one_hot(labels: &[DeviceClass], n_classes: usize) -> Array2<f64> {
    let mut t = Array2::zeros((labels.len(), n_classes));
    for (i, c) in labels.iter().enumerate() {
        t[[i, c.0]] = 1.0;
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetState {
    standardizer: Standardizer,
    net: Mlp,
}

#[derive(Debug, Clone)]
pub struct NeuralNetClassifier {
    schema: FeatureSchema,
    state: NetState,
}

impl NeuralNetClassifier {
    pub fn net(&self) -> &Mlp {
        &self.state.net
    }
}

impl Classifier for NeuralNetClassifier {
    fn kind(&self) -> &'static str {
        "neural_net"
    }

    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn n_classes(&self) -> usize {
        self.state.net.output_dim()
    }

    fn scores_unchecked(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        self.state.net.forward(self.state.standardizer.apply(x).view()).to_vec()
    }

    fn predict_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Vec<DeviceClass>> {
        for x in xs.outer_iter() {
            check_input(&self.schema, x)?;
        }
        let out = self.state.net.forward_batch(self.state.standardizer.apply_batch(xs).view());
        Ok(out.outer_iter().map(|r| DeviceClass(argmax(r.as_slice().expect("contiguous")))).collect())
    }

    fn state(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(&self.state)?)
    }
}

impl Learner for NeuralNetLearner {
    fn kind(&self) -> &'static str {
        "neural_net"
    }

    fn fit(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Classifier>> {
        check_trainable(train)?;
        let standardizer = Standardizer::fit(train.features());
        let x = standardizer.apply_batch(train.features());
        let targets = one_hot(train.labels(), train.n_classes());
        let mut sizes = vec![train.schema().len()];
        sizes.extend(&self.hidden);
        sizes.push(train.n_classes());
        let mut net = Mlp::new(&sizes, Activation::Relu, Activation::Sigmoid, &mut rng_from(derive_seed(seed, "init")))?;
        let mut rng = rng_from(derive_seed(seed, "batches"));
        let mut adam = Adam::new(self.learning_rate);
        for _ in 0..self.epochs {
            net.train_epoch(x.view(), targets.view(), self.batch_size, &mut adam, &mut rng)?;
        }
        if !net.is_finite() {
            return Err(Error::Numeric("network weights diverged".into()));
        }
        Ok(Box::new(NeuralNetClassifier { schema: train.schema().clone(), state: NetState { standardizer, net } }))
    }

    fn load(&self, schema: FeatureSchema, n_classes: usize, state: &serde_json::Value) -> Result<Box<dyn Classifier>> {
        let state: NetState = serde_json::from_value(state.clone())?;
        if state.net.input_dim() != schema.len()
            || state.net.output_dim() != n_classes
            || state.standardizer.dim() != schema.len()
        {
            return Err(Error::Serialization("network state does not match its schema".into()));
        }
        Ok(Box::new(NeuralNetClassifier { schema, state }))
    }
}
