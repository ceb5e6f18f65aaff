//! Fully connected regressor: 2 inputs, three ReLU hidden layers, one linear
//! output, trained by mini-batch backpropagation on mean squared error.
//!
//! Inputs are standardized by a scaler fitted on the training data and
//! stored in the model. Weights start uniform in `±sqrt(6 / (fan_in +
//! fan_out))`, biases at zero, all drawn from ChaCha8 seeded with the
//! training seed; the same stream then drives the per-epoch shuffles.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, TrainingPoint};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("cannot train on {points} points with batch size {batch_size}")]
    EmptyDataset { points: usize, batch_size: usize },
    #[error("loss became non-finite at epoch {0}")]
    DivergedLoss(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MlpArchitecture {
    pub fn new(hidden: [usize; 3]) -> Result<Self, MlpError> {
        let arch = MlpArchitecture {
            layer_sizes: vec![2, hidden[0], hidden[1], hidden[2], 1],
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        let s = &self.layer_sizes;
        if s.len() != 5 || s[0] != 2 || s[4] != 1 || s.contains(&0) {
            return Err(MlpError::ShapeMismatch(format!(
                "layer sizes must be [2, h1, h2, h3, 1] with every width >= 1, got {s:?}"
            )));
        }
        Ok(())
    }

    fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }
}

impl Default for MlpArchitecture {
    fn default() -> Self {
        MlpArchitecture::new([32, 32, 32]).expect("default widths are valid")
    }
}

/// Per-feature `(x - mean) / std`; a feature with `std == 0` is constant in
/// training and maps to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

impl InputScaler {
    pub fn identity() -> Self {
        InputScaler {
            mean: [0.0; 2],
            std: [1.0; 2],
        }
    }

    pub fn fit(points: &[TrainingPoint]) -> Self {
        let n = points.len() as f64;
        let mut mean = [0.0; 2];
        let mut std = [0.0; 2];
        for d in 0..2 {
            mean[d] = points.iter().map(|p| p.features()[d]).sum::<f64>() / n;
            let var = points.iter().map(|p| (p.features()[d] - mean[d]).powi(2)).sum::<f64>() / n;
            std[d] = var.sqrt();
        }
        InputScaler { mean, std }
    }

    pub fn transform(&self, x: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for d in 0..2 {
            out[d] = if self.std[d] > 0.0 {
                (x[d] - self.mean[d]) / self.std[d]
            } else {
                0.0
            };
        }
        out
    }

    pub fn is_constant(&self, feature: usize) -> bool {
        self.std[feature] == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::default(),
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(MlpError::InvalidConfig("epochs and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(MlpError::InvalidConfig(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub version: u32,
    pub architecture: MlpArchitecture,
    pub scaler: InputScaler,
    /// `weights[l]` is row-major `layer_sizes[l+1] x layer_sizes[l]`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub train_config: Option<TrainConfig>,
}

/// Parameter gradients, same layout as the model.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpModel {
    /// All-zero parameters with an identity scaler.
    pub fn zeros(architecture: MlpArchitecture) -> Self {
        let sizes = &architecture.layer_sizes;
        let weights = (0..architecture.n_layers())
            .map(|l| vec![0.0; sizes[l] * sizes[l + 1]])
            .collect();
        let biases = (0..architecture.n_layers()).map(|l| vec![0.0; sizes[l + 1]]).collect();
        MlpModel {
            version: MODEL_VERSION,
            architecture,
            scaler: InputScaler::identity(),
            weights,
            biases,
            train_config: None,
        }
    }

    /// Scaled-uniform weights, zero biases.
    pub fn init(architecture: MlpArchitecture, rng: &mut impl Rng) -> Self {
        let mut model = MlpModel::zeros(architecture);
        let sizes = model.architecture.layer_sizes.clone();
        for (l, w) in model.weights.iter_mut().enumerate() {
            let bound = (6.0 / (sizes[l] + sizes[l + 1]) as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        model
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        self.architecture.validate()?;
        let sizes = &self.architecture.layer_sizes;
        let n = self.architecture.n_layers();
        if self.weights.len() != n || self.biases.len() != n {
            return Err(MlpError::ShapeMismatch(format!(
                "expected {n} weight and bias layers, got {} and {}",
                self.weights.len(),
                self.biases.len()
            )));
        }
        for l in 0..n {
            if self.weights[l].len() != sizes[l] * sizes[l + 1] || self.biases[l].len() != sizes[l + 1] {
                return Err(MlpError::ShapeMismatch(format!("layer {l} has inconsistent parameter sizes")));
            }
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Pre-activations of every layer for an already-scaled input.
    fn forward_trace(&self, input: [f64; 2]) -> Vec<Vec<f64>> {
        let sizes = &self.architecture.layer_sizes;
        let last = self.architecture.n_layers() - 1;
        let mut pre = Vec::with_capacity(last + 1);
        let mut act: Vec<f64> = input.to_vec();
        for l in 0..=last {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let w = &self.weights[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    self.biases[l][o] + row.iter().zip(&act).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            let f = if l == last {
                self.architecture.output_activation
            } else {
                self.architecture.hidden_activation
            };
            act = z.iter().map(|&v| f.apply(v)).collect();
            pre.push(z);
        }
        pre
    }

    fn output_of(&self, pre: &[Vec<f64>]) -> f64 {
        self.architecture.output_activation.apply(pre.last().expect("at least one layer")[0])
    }

    /// Output for a raw (unscaled) input.
    pub fn predict(&self, x: [f64; 2]) -> f64 {
        self.output_of(&self.forward_trace(self.scaler.transform(x)))
    }

    /// Pre-activations for a raw input; used to keep gradient checks away
    /// from ReLU kinks.
    pub fn pre_activations(&self, x: [f64; 2]) -> Vec<Vec<f64>> {
        self.forward_trace(self.scaler.transform(x))
    }

    /// Mean squared error over `batch`.
    pub fn loss(&self, batch: &[TrainingPoint]) -> f64 {
        batch
            .iter()
            .map(|p| (self.predict(p.features()) - p.received_ah).powi(2))
            .sum::<f64>()
            / batch.len() as f64
    }

    /// Loss and its gradient over `batch` by backpropagation.
    pub fn loss_and_gradients(&self, batch: &[TrainingPoint]) -> (f64, Gradients) {
        let sizes = &self.architecture.layer_sizes;
        let n_layers = self.architecture.n_layers();
        let mut gw: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;

        for p in batch {
            let input = self.scaler.transform(p.features());
            let pre = self.forward_trace(input);
            let err = self.output_of(&pre) - p.received_ah;
            loss += err * err * scale;

            // delta = dL/dz for the current layer
            let out_f = self.architecture.output_activation;
            let mut delta = vec![2.0 * err * scale * out_f.derivative(pre[n_layers - 1][0])];
            for l in (0..n_layers).rev() {
                let n_in = sizes[l];
                let hidden = self.architecture.hidden_activation;
                let prev_act: Vec<f64> = if l == 0 {
                    input.to_vec()
                } else {
                    pre[l - 1].iter().map(|&z| hidden.apply(z)).collect()
                };
                for (o, &d) in delta.iter().enumerate() {
                    gb[l][o] += d;
                    let row = &mut gw[l][o * n_in..(o + 1) * n_in];
                    for (g, a) in row.iter_mut().zip(&prev_act) {
                        *g += d * a;
                    }
                }
                if l > 0 {
                    let w = &self.weights[l];
                    delta = (0..n_in)
                        .map(|i| {
                            let back: f64 = delta.iter().enumerate().map(|(o, d)| d * w[o * n_in + i]).sum();
                            back * hidden.derivative(pre[l - 1][i])
                        })
                        .collect();
                }
            }
        }
        (loss, Gradients { weights: gw, biases: gb })
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut()).flatten()
    }

    /// Parameter `k` in the flat order weights-then-biases, layer by layer.
    fn param_mut(&mut self, mut k: usize) -> &mut f64 {
        for layer in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            if k < layer.len() {
                return &mut layer[k];
            }
            k -= layer.len();
        }
        panic!("parameter index out of range");
    }
}

impl Gradients {
    fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.biases).flatten()
    }
}

/// Prediction for one raw input, in Ah.
pub fn forward(model: &MlpModel, distance_cm: f64, duration_min: f64) -> Result<f64, MlpError> {
    model.validate()?;
    Ok(model.predict([distance_cm, duration_min]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Full-dataset MSE after each epoch.
    pub loss_history: Vec<f64>,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

pub fn train(data: &Dataset, arch: &MlpArchitecture, cfg: &TrainConfig) -> Result<TrainOutcome, MlpError> {
    arch.validate()?;
    cfg.validate()?;
    let points = &data.points;
    if points.is_empty() || points.len() < cfg.batch_size {
        return Err(MlpError::EmptyDataset {
            points: points.len(),
            batch_size: cfg.batch_size,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::init(arch.clone(), &mut rng);
    model.scaler = InputScaler::fit(points);
    model.train_config = Some(*cfg);

    let n_params = model.n_params();
    let mut adam = AdamState {
        m: vec![0.0; n_params],
        v: vec![0.0; n_params],
        t: 0,
    };
    let mut order: Vec<usize> = (0..points.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| points[i]));
            let (_, grads) = model.loss_and_gradients(&batch);
            step(&mut model, &grads, cfg, &mut adam);
        }
        let loss = model.loss(points);
        if !loss.is_finite() {
            return Err(MlpError::DivergedLoss(epoch + 1));
        }
        history.push(loss);
    }
    log::debug!(
        "mlp: {} epochs, final train mse {:.3e}",
        cfg.epochs,
        history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

fn step(model: &mut MlpModel, grads: &Gradients, cfg: &TrainConfig, adam: &mut AdamState) {
    let lr = cfg.learning_rate;
    match cfg.optimizer {
        Optimizer::Sgd => {
            for (p, g) in model.params_mut().zip(grads.iter()) {
                *p -= lr * g;
            }
        }
        Optimizer::Adam { beta1, beta2, epsilon } => {
            adam.t += 1;
            let c1 = 1.0 - beta1.powi(adam.t);
            let c2 = 1.0 - beta2.powi(adam.t);
            for (((p, g), m), v) in model
                .params_mut()
                .zip(grads.iter())
                .zip(adam.m.iter_mut())
                .zip(adam.v.iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
            }
        }
    }
}

/// Largest relative disagreement between backprop gradients and central
/// differences (step 1e-5) over every parameter. Leaves `model` untouched.
pub fn gradient_check(model: &MlpModel, batch: &[TrainingPoint]) -> f64 {
    const STEP: f64 = 1e-5;
    let (_, analytic) = model.loss_and_gradients(batch);
    let analytic: Vec<f64> = analytic.iter().copied().collect();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (k, &ga) in analytic.iter().enumerate() {
        let original = *probe.param_mut(k);
        *probe.param_mut(k) = original + STEP;
        let up = probe.loss(batch);
        *probe.param_mut(k) = original - STEP;
        let down = probe.loss(batch);
        *probe.param_mut(k) = original;
        let gn = (up - down) / (2.0 * STEP);
        worst = worst.max((ga - gn).abs() / (ga.abs() + gn.abs()).max(1e-8));
    }
    worst
}
