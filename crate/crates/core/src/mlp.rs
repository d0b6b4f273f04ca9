//! Multi-layer perceptron with softmax output, trained by backpropagation on
//! mean cross-entropy.
//!
//! Class index 0 is non-defect and index 1 is defect, so `forward(x)[1]` is
//! the defect probability.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::{seed, Error, FeatureDataset, Matrix, Result};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output `a = f(z)`.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Tanh),
            _ => Err(Error::Codec(format!("unknown activation code {c}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    /// Input size, one or more hidden sizes, then the output size 2.
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl MlpArchitecture {
    pub fn new(input: usize, hidden: &[usize], seed: u64) -> Self {
        let mut layer_sizes = Vec::with_capacity(hidden.len() + 2);
        layer_sizes.push(input);
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(2);
        MlpArchitecture {
            layer_sizes,
            activation: Activation::Relu,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 3 {
            return Err(Error::validation("an MLP needs an input, at least one hidden and an output layer"));
        }
        if self.layer_sizes.last() != Some(&2) {
            return Err(Error::validation("the output layer must have exactly 2 units"));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::validation("layer sizes must be positive"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.layer_sizes[1..self.layer_sizes.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::validation("epochs and batch_size must be positive"));
        }
        // zero is allowed so a pass can be run without moving the weights
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Fully connected layer; `weights` is `inputs × outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols()
    }

    fn forward(&self, x: &Matrix<f64>) -> Matrix<f64> {
        let mut z = x.matmul(&self.weights);
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.biases) {
                *v += b;
            }
        }
        z
    }
}

/// Gradient of the mean loss with respect to every weight and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    /// All components in the order of [`MlpModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.flatten().iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<DenseLayer>,
    architecture: MlpArchitecture,
    training_log: Vec<f64>,
}

/// Numerically stable softmax via max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

fn check_labels(x: &Matrix<f64>, labels: &[u8]) -> Result<()> {
    if labels.len() != x.rows() {
        return Err(Error::validation(format!("{} labels for {} rows", labels.len(), x.rows())));
    }
    if x.rows() == 0 {
        return Err(Error::validation("empty batch"));
    }
    Ok(())
}

impl MlpModel {
    /// Random initialization keyed to `arch.seed`: He-uniform weights for
    /// ReLU, Glorot-uniform for tanh; zero biases.
    pub fn init(arch: &MlpArchitecture) -> Result<Self> {
        arch.validate()?;
        let mut rng = seed::rng(arch.seed);
        let n_layers = arch.layer_sizes.len() - 1;
        let layers = arch
            .layer_sizes
            .windows(2)
            .enumerate()
            .map(|(li, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = match arch.activation {
                    Activation::Relu if li + 1 < n_layers => (6.0 / fan_in as f64).sqrt(),
                    _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                };
                let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
                DenseLayer {
                    weights: Matrix::from_vec(fan_in, fan_out, data).expect("shape"),
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(MlpModel {
            layers,
            architecture: arch.clone(),
            training_log: Vec::new(),
        })
    }

    /// Builds a model from explicit layers (used by tests and the decoder).
    pub fn from_layers(architecture: MlpArchitecture, layers: Vec<DenseLayer>) -> Result<Self> {
        architecture.validate()?;
        let shapes_ok = layers.len() + 1 == architecture.layer_sizes.len()
            && layers.iter().zip(architecture.layer_sizes.windows(2)).all(|(l, w)| {
                l.inputs() == w[0] && l.outputs() == w[1] && l.biases.len() == w[1]
            });
        if !shapes_ok {
            return Err(Error::validation("layer shapes do not match the architecture"));
        }
        Ok(MlpModel {
            layers,
            architecture,
            training_log: Vec::new(),
        })
    }

    pub fn architecture(&self) -> &MlpArchitecture {
        &self.architecture
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    /// Mean training loss after each epoch's updates were accumulated.
    pub fn training_log(&self) -> &[f64] {
        &self.training_log
    }

    pub fn input_dim(&self) -> usize {
        self.architecture.input_dim()
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.biases.len()).sum()
    }

    /// Flat copy of all parameters: per layer, weights row-major then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_parameters());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_parameters() {
            return Err(Error::validation("parameter vector has the wrong length"));
        }
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weights.as_slice().len();
            l.weights.as_mut_slice().copy_from_slice(&params[k..k + nw]);
            k += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[k..k + nb]);
            k += nb;
        }
        Ok(())
    }

    fn check_dim(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: cols,
            });
        }
        Ok(())
    }

    /// Activations of every layer; the last entry holds output logits.
    fn activations(&self, x: &Matrix<f64>) -> Vec<Matrix<f64>> {
        let act = self.architecture.activation;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(acts.last().unwrap());
            if i + 1 < self.layers.len() {
                z.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
            }
            acts.push(z);
        }
        acts
    }

    pub fn logits_batch(&self, x: &Matrix<f64>) -> Result<Matrix<f64>> {
        self.check_dim(x.cols())?;
        Ok(self.activations(x).pop().unwrap())
    }

    /// Class probabilities for each row (`rows × 2`).
    pub fn forward_batch(&self, x: &Matrix<f64>) -> Result<Matrix<f64>> {
        let mut logits = self.logits_batch(x)?;
        for r in 0..logits.rows() {
            let p = softmax(logits.row(r));
            logits.row_mut(r).copy_from_slice(&p);
        }
        Ok(logits)
    }

    /// Class probabilities `[p_ok, p_defect]` for one sample.
    pub fn forward(&self, x: &[f64]) -> Result<[f64; 2]> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        let p = self.forward_batch(&m)?;
        Ok([p.get(0, 0), p.get(0, 1)])
    }

    /// Mean cross-entropy of the batch.
    pub fn loss(&self, x: &Matrix<f64>, labels: &[u8]) -> Result<f64> {
        check_labels(x, labels)?;
        let logits = self.logits_batch(x)?;
        let total: f64 = (0..logits.rows())
            .map(|r| {
                let z = logits.row(r);
                log_sum_exp(z) - z[usize::from(labels[r])]
            })
            .sum();
        Ok(total / x.rows() as f64)
    }

    /// Mean cross-entropy and its exact gradient by backpropagation.
    pub fn gradient(&self, x: &Matrix<f64>, labels: &[u8]) -> Result<(f64, Gradients)> {
        check_labels(x, labels)?;
        self.check_dim(x.cols())?;
        let act = self.architecture.activation;
        let acts = self.activations(x);
        let n = x.rows() as f64;

        let logits = acts.last().unwrap();
        let mut loss = 0.0;
        let mut delta = Matrix::zeros(logits.rows(), logits.cols());
        for r in 0..logits.rows() {
            let z = logits.row(r);
            let y = usize::from(labels[r]);
            loss += log_sum_exp(z) - z[y];
            let p = softmax(z);
            let d = delta.row_mut(r);
            for (k, (dk, pk)) in d.iter_mut().zip(p).enumerate() {
                *dk = (pk - if k == y { 1.0 } else { 0.0 }) / n;
            }
        }

        let mut grads: Vec<DenseLayer> = Vec::with_capacity(self.layers.len());
        for li in (0..self.layers.len()).rev() {
            let input = &acts[li];
            let d_w = input.t_matmul(&delta);
            let mut d_b = vec![0.0; delta.cols()];
            for r in 0..delta.rows() {
                for (b, v) in d_b.iter_mut().zip(delta.row(r)) {
                    *b += v;
                }
            }
            if li > 0 {
                let w = &self.layers[li].weights;
                let mut prev = Matrix::zeros(delta.rows(), w.rows());
                for r in 0..delta.rows() {
                    let dr = delta.row(r);
                    let a = input.row(r);
                    for (i, p) in prev.row_mut(r).iter_mut().enumerate() {
                        let back: f64 = crate::linalg::dot(dr, w.row(i));
                        *p = back * act.derivative_from_output(a[i]);
                    }
                }
                delta = prev;
            }
            grads.push(DenseLayer {
                weights: d_w,
                biases: d_b,
            });
        }
        grads.reverse();
        Ok((loss / n, Gradients { layers: grads }))
    }

    /// Mini-batch training on mean cross-entropy. Deterministic given the
    /// model, data and `config.shuffle_seed`.
    pub fn train(mut self, x: &Matrix<f64>, labels: &[u8], config: &TrainConfig) -> Result<MlpModel> {
        config.validate()?;
        check_labels(x, labels)?;
        self.check_dim(x.cols())?;
        if !(labels.contains(&0) && labels.contains(&1)) {
            return Err(Error::DegenerateTrainingSet("MLP training needs both classes".into()));
        }

        let n_params = self.n_parameters();
        let mut m = vec![0.0; n_params];
        let mut v = vec![0.0; n_params];
        let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
        let mut step = 0i32;

        let mut rng = seed::rng(config.shuffle_seed);
        let mut order: Vec<usize> = (0..x.rows()).collect();
        for epoch in 1..=config.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(config.batch_size) {
                let bx = x.select_rows(batch);
                let by: Vec<u8> = batch.iter().map(|&i| labels[i]).collect();
                let (loss, grads) = self.gradient(&bx, &by)?;
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                epoch_loss += loss * batch.len() as f64;
                step += 1;
                let lr = config.learning_rate;
                let bc1 = 1.0 - beta1.powi(step);
                let bc2 = 1.0 - beta2.powi(step);
                let mut k = 0;
                for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
                    let params = layer.weights.as_mut_slice().iter_mut().chain(layer.biases.iter_mut());
                    let gs = g.weights.as_slice().iter().chain(&g.biases);
                    for (p, &gi) in params.zip(gs) {
                        match config.optimizer {
                            Optimizer::Adam => {
                                m[k] = beta1 * m[k] + (1.0 - beta1) * gi;
                                v[k] = beta2 * v[k] + (1.0 - beta2) * gi * gi;
                                let mhat = m[k] / bc1;
                                let vhat = v[k] / bc2;
                                *p -= lr * mhat / (vhat.sqrt() + eps);
                            }
                            Optimizer::Sgd => *p -= lr * gi,
                        }
                        k += 1;
                    }
                }
            }
            let mean = epoch_loss / x.rows() as f64;
            if !mean.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            self.training_log.push(mean);
        }
        Ok(self)
    }

    /// Trains on a dataset's raw (unstandardized) features.
    pub fn train_dataset(self, train: &FeatureDataset, config: &TrainConfig) -> Result<MlpModel> {
        self.train(&train.features().to_f64(), train.labels(), config)
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        let arch = &self.architecture;
        w.usizes(&arch.layer_sizes);
        w.u8(arch.activation.code());
        w.u64(arch.seed);
        for l in &self.layers {
            w.f64s(l.weights.as_slice());
            w.f64s(&l.biases);
        }
        w.f64s(&self.training_log);
    }

    pub(crate) fn decode(r: &mut Reader) -> Result<Self> {
        let layer_sizes = r.usizes()?;
        let activation = Activation::from_code(r.u8()?)?;
        let seed = r.u64()?;
        let arch = MlpArchitecture {
            layer_sizes,
            activation,
            seed,
        };
        arch.validate().map_err(|e| Error::Codec(e.to_string()))?;
        let mut layers = Vec::new();
        for w in arch.layer_sizes.windows(2) {
            let weights = Matrix::from_vec(w[0], w[1], r.f64s()?).map_err(|e| Error::Codec(e.to_string()))?;
            let biases = r.f64s()?;
            layers.push(DenseLayer { weights, biases });
        }
        let mut model = MlpModel::from_layers(arch, layers).map_err(|e| Error::Codec(e.to_string()))?;
        model.training_log = r.f64s()?;
        Ok(model)
    }
}
