//! Fully connected feed-forward network with analytic backpropagation.
//!
//! Hidden layers use one activation (ReLU by default) and the output layer
//! another (sigmoid for classifiers, tanh for the traffic generator). Weights
//! are stored `in × out` so a batch forward pass is `x · W + b`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_at_output(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `in × out`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense { weights: Array2::zeros((inputs, outputs)), bias: Array1::zeros(outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    hidden: Activation,
    output: Activation,
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(m: &Mlp) -> Self {
        Gradients { layers: m.layers.iter().map(|l| Dense::zeros(l.inputs(), l.outputs())).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

/// Intermediate values of a batch forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `activations[0]` is the input, `activations[i + 1]` the output of layer `i`.
    pub activations: Vec<Array2<f64>>,
    /// Pre-activation values of the last layer.
    pub output_pre: Array2<f64>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("trace has an output")
    }
}

/// Scalar functions of the output scores whose input gradient can be taken.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Score of one class.
    Score(usize),
    /// Σ w_c · score_c.
    Weighted(Vec<f64>),
    /// Mean per-class binary cross-entropy of sigmoid scores against targets.
    BinaryCrossEntropy(Vec<f64>),
}

impl Mlp {
    /// Random network with weights and biases uniform in ±1/√fan_in.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Result<Self> {
        let mut m = Mlp::zeros(sizes, hidden, output)?;
        for layer in &mut m.layers {
            let bound = 1.0 / (layer.inputs() as f64).sqrt();
            layer.weights.mapv_inplace(|_| rng.random_range(-bound..=bound));
            layer.bias.mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
        Ok(m)
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Validation(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Mlp { layers, hidden, output })
    }

    pub fn from_layers(layers: Vec<Dense>, hidden: Activation, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::Validation(format!("layer {i}: bias length mismatch")));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(Error::Validation(format!("layer {i}: input width mismatch")));
            }
        }
        Ok(Mlp { layers, hidden, output })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(Dense::outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let batch = x.insert_axis(Axis(0));
        self.forward_batch(batch).row(0).to_owned()
    }

    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let act = self.activation_of(i);
            let mut z = a.dot(&layer.weights);
            z += &layer.bias;
            z.mapv_inplace(|v| act.apply(v));
            a = z;
        }
        a
    }

    pub fn forward_trace(&self, x: ArrayView2<'_, f64>) -> Trace {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        let mut output_pre = Array2::zeros((0, 0));
        for (i, layer) in self.layers.iter().enumerate() {
            let act = self.activation_of(i);
            let mut z = activations[i].dot(&layer.weights);
            z += &layer.bias;
            if i + 1 == self.layers.len() {
                output_pre = z.clone();
            }
            z.mapv_inplace(|v| act.apply(v));
            activations.push(z);
        }
        Trace { activations, output_pre }
    }

    /// Backpropagates `delta` = ∂L/∂(output pre-activation) through the
    /// network. Returns parameter gradients (when asked) and ∂L/∂input.
    pub fn backward(&self, trace: &Trace, delta: Array2<f64>, with_params: bool) -> (Option<Gradients>, Array2<f64>) {
        let mut grads = with_params.then(|| Gradients::zeros_like(self));
        let mut delta = delta;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &trace.activations[i];
            if let Some(g) = grads.as_mut() {
                g.layers[i].weights = input.t().dot(&delta);
                g.layers[i].bias = delta.sum_axis(Axis(0));
            }
            let mut upstream = delta.dot(&layer.weights.t());
            if i > 0 {
                let act = self.activation_of(i - 1);
                Zip::from(&mut upstream)
                    .and(input)
                    .for_each(|d, &a| *d *= act.derivative_at_output(a));
            }
            delta = upstream;
        }
        (grads, delta)
    }

    /// ∂L/∂(output pre-activation) from ∂L/∂(output).
    pub fn output_delta(&self, trace: &Trace, d_output: ArrayView2<'_, f64>) -> Array2<f64> {
        let act = self.output;
        let mut delta = d_output.to_owned();
        Zip::from(&mut delta)
            .and(trace.output())
            .for_each(|d, &a| *d *= act.derivative_at_output(a));
        delta
    }

    /// Mean per-class binary cross-entropy of a sigmoid-output network and the
    /// gradient with respect to every weight and bias.
    pub fn loss_and_gradients(&self, x: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<(f64, Gradients)> {
        let (loss, grads, _) = self.bce_backward(x, targets, true)?;
        Ok((loss, grads.expect("requested")))
    }

    /// Mean per-class binary cross-entropy and its gradient with respect to
    /// each input row.
    pub fn loss_input_gradients(&self, x: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
        let (loss, _, dx) = self.bce_backward(x, targets, false)?;
        Ok((loss, dx))
    }

    fn bce_backward(
        &self,
        x: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        with_params: bool,
    ) -> Result<(f64, Option<Gradients>, Array2<f64>)> {
        if self.output != Activation::Sigmoid {
            return Err(Error::Validation("cross-entropy needs a sigmoid output layer".into()));
        }
        if x.nrows() == 0 {
            return Err(Error::Validation("empty batch".into()));
        }
        if x.ncols() != self.input_dim() || targets.dim() != (x.nrows(), self.output_dim()) {
            return Err(Error::Validation("batch shape does not match the network".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite network input".into()));
        }
        if targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Validation("targets must lie in [0, 1]".into()));
        }
        let trace = self.forward_trace(x);
        let (loss, delta) = bce_with_logits(trace.output_pre.view(), targets);
        if !loss.is_finite() {
            return Err(Error::Numeric("non-finite loss".into()));
        }
        let (grads, dx) = self.backward(&trace, delta, with_params);
        if grads.as_ref().is_some_and(|g| !g.is_finite()) || dx.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        Ok((loss, grads, dx))
    }

    /// Gradient of a scalar objective of the output scores with respect to
    /// the input vector.
    pub fn input_gradient(&self, x: ArrayView1<'_, f64>, objective: &Objective) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Validation("input width does not match the network".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite network input".into()));
        }
        let batch = x.insert_axis(Axis(0));
        let n = self.output_dim();
        let dx = match objective {
            Objective::BinaryCrossEntropy(t) => {
                if t.len() != n {
                    return Err(Error::Validation("target length does not match the output".into()));
                }
                let targets = Array2::from_shape_vec((1, n), t.clone()).expect("shape");
                self.loss_input_gradients(batch, targets.view())?.1
            }
            Objective::Score(c) => {
                if *c >= n {
                    return Err(Error::Validation(format!("class {c} outside the output")));
                }
                let mut w = Array2::zeros((1, n));
                w[[0, *c]] = 1.0;
                self.weighted_input_gradient(batch, w)
            }
            Objective::Weighted(w) => {
                if w.len() != n {
                    return Err(Error::Validation("weight length does not match the output".into()));
                }
                let w = Array2::from_shape_vec((1, n), w.clone()).expect("shape");
                self.weighted_input_gradient(batch, w)
            }
        };
        let dx = dx.row(0).to_owned();
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite input gradient".into()));
        }
        Ok(dx)
    }

    fn weighted_input_gradient(&self, x: ArrayView2<'_, f64>, d_output: Array2<f64>) -> Array2<f64> {
        let trace = self.forward_trace(x);
        let delta = self.output_delta(&trace, d_output.view());
        self.backward(&trace, delta, false).1
    }

    /// One pass over `(x, targets)` in shuffled mini-batches. Returns the mean
    /// batch loss.
    pub fn train_epoch<R: Rng + ?Sized>(
        &mut self,
        x: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        batch_size: usize,
        optimizer: &mut Adam,
        rng: &mut R,
    ) -> Result<f64> {
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        order.shuffle(rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size.max(1)) {
            let xb = x.select(Axis(0), chunk);
            let tb = targets.select(Axis(0), chunk);
            let (loss, grads) = self.loss_and_gradients(xb.view(), tb.view())?;
            optimizer.step(self, &grads);
            total += loss;
            batches += 1;
        }
        Ok(total / batches.max(1) as f64)
    }
}

/// Numerically stable mean binary cross-entropy on logits, with
/// ∂loss/∂logit = (σ(z) − t) / (rows · cols).
pub fn bce_with_logits(z: ArrayView2<'_, f64>, t: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
    let count = z.len().max(1) as f64;
    let mut loss = 0.0;
    let mut delta = Array2::zeros(z.raw_dim());
    Zip::from(&mut delta).and(z).and(t).for_each(|d, &z, &t| {
        loss += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
        *d = (sigmoid(z) - t) / count;
    });
    (loss / count, delta)
}

/// Plain gradient descent.
#[derive(Debug, Clone, Copy)]
pub struct Sgd {
    pub learning_rate: f64,
}

impl Sgd {
    /// `params -= lr · grads`; pass a negative rate to ascend.
    pub fn step(&self, m: &mut Mlp, grads: &Gradients) {
        for (layer, g) in m.layers.iter_mut().zip(&grads.layers) {
            layer.weights.scaled_add(-self.learning_rate, &g.weights);
            layer.bias.scaled_add(-self.learning_rate, &g.bias);
        }
    }
}

/// Adam with the usual bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first: Option<Gradients>,
    second: Option<Gradients>,
    steps: i32,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Adam { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, first: None, second: None, steps: 0 }
    }

    pub fn step(&mut self, m: &mut Mlp, grads: &Gradients) {
        let first = self.first.get_or_insert_with(|| Gradients::zeros_like(m));
        let second = self.second.get_or_insert_with(|| Gradients::zeros_like(m));
        self.steps += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.steps);
        let c2 = 1.0 - b2.powi(self.steps);
        let lr = self.learning_rate;
        let eps = self.epsilon;
        for (((layer, g), m1), m2) in
            m.layers.iter_mut().zip(&grads.layers).zip(&mut first.layers).zip(&mut second.layers)
        {
            Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m1.weights)
                .and(&mut m2.weights)
                .for_each(|w, &g, m1, m2| {
                    *m1 = b1 * *m1 + (1.0 - b1) * g;
                    *m2 = b2 * *m2 + (1.0 - b2) * g * g;
                    *w -= lr * (*m1 / c1) / ((*m2 / c2).sqrt() + eps);
                });
            Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m1.bias)
                .and(&mut m2.bias)
                .for_each(|w, &g, m1, m2| {
                    *m1 = b1 * *m1 + (1.0 - b1) * g;
                    *m2 = b2 * *m2 + (1.0 - b2) * g * g;
                    *w -= lr * (*m1 / c1) / ((*m2 / c2).sqrt() + eps);
                });
        }
    }
}

/// Loss and gradients of a classifier network over a batch of
/// `(vector, target distribution)` rows.
pub fn mlp_loss_and_gradients(m: &Mlp, x: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<(f64, Gradients)> {
    m.loss_and_gradients(x, targets)
}

pub fn mlp_input_gradient(m: &Mlp, x: ArrayView1<'_, f64>, objective: &Objective) -> Result<Array1<f64>> {
    m.input_gradient(x, objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use ndarray::array;

    #[test]
    fn zero_network_scores_one_half() {
        let m = Mlp::zeros(&[3, 4, 2], Activation::Relu, Activation::Sigmoid).unwrap();
        let out = m.forward(array![1.0, -2.0, 3.0].view());
        assert_eq!(out, array![0.5, 0.5]);
        let g = m.input_gradient(array![1.0, 2.0, 3.0].view(), &Objective::Score(1)).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn perfect_prediction_has_near_zero_loss() {
        let mut m = Mlp::zeros(&[1, 2], Activation::Relu, Activation::Sigmoid).unwrap();
        m.layers_mut()[0].bias = array![40.0, -40.0];
        let (loss, _) = m.loss_and_gradients(array![[0.0]].view(), array![[1.0, 0.0]].view()).unwrap();
        assert!(loss < 1e-15, "{loss}");
    }

    #[test]
    fn duplicated_batch_keeps_mean_loss() {
        let m = Mlp::new(&[3, 5, 2], Activation::Relu, Activation::Sigmoid, &mut rng_from(9)).unwrap();
        let x = array![[0.1, 0.2, -0.3], [1.0, -1.0, 0.5]];
        let t = array![[1.0, 0.0], [0.0, 1.0]];
        let (a, _) = m.loss_and_gradients(x.view(), t.view()).unwrap();
        let x2 = ndarray::concatenate![Axis(0), x, x];
        let t2 = ndarray::concatenate![Axis(0), t, t];
        let (b, _) = m.loss_and_gradients(x2.view(), t2.view()).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn single_layer_input_gradient_is_weight_column_times_sigmoid_slope() {
        let w = array![[0.3, -0.2], [0.5, 0.1], [-0.4, 0.7]];
        let b = array![0.05, -0.1];
        let m = Mlp::from_layers(vec![Dense { weights: w.clone(), bias: b.clone() }], Activation::Relu, Activation::Sigmoid)
            .unwrap();
        let x = array![0.2, -0.6, 1.1];
        let z = x.dot(&w.column(1)) + b[1];
        let s = 1.0 / (1.0 + (-z as f64).exp());
        let expected = w.column(1).mapv(|v| v * s * (1.0 - s));
        let got = m.input_gradient(x.view(), &Objective::Score(1)).unwrap();
        for (g, e) in got.iter().zip(expected.iter()) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_finite_input() {
        let m = Mlp::zeros(&[2, 2], Activation::Relu, Activation::Sigmoid).unwrap();
        let x = array![[f64::NAN, 0.0]];
        assert!(matches!(m.loss_and_gradients(x.view(), array![[1.0, 0.0]].view()), Err(Error::Numeric(_))));
        assert!(matches!(m.input_gradient(array![f64::INFINITY, 0.0].view(), &Objective::Score(0)), Err(Error::Numeric(_))));
    }

    #[test]
    fn tanh_output_stays_bounded() {
        let m = Mlp::new(&[4, 8, 3], Activation::Relu, Activation::Tanh, &mut rng_from(1)).unwrap();
        let out = m.forward_batch(Array2::from_elem((5, 4), 100.0).view());
        assert!(out.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}
