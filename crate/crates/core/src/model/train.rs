//! Minimal seeded SGD trainer used to produce desk-scale fixture models.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Activation, Dataset, InputRange, Layer, Network};

/// Width and activation of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(width: usize, activation: Activation) -> Self {
        Self { width, activation }
    }
}

/// Shape of the network to train. The last layer's outputs are read as class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input_dim: usize,
    pub input_range: InputRange,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            step: 0.05,
            seed: 0,
        }
    }
}

impl Architecture {
    /// Glorot-uniform weights and zero biases, drawn from `rng`.
    fn initialize(&self, rng: &mut ChaCha8Rng) -> Result<Network> {
        let mut fan_in = self.input_dim;
        let mut layers = Vec::with_capacity(self.layers.len());
        for spec in &self.layers {
            let limit = (6.0 / (fan_in + spec.width) as f64).sqrt();
            let weights = (0..spec.width)
                .map(|_| (0..fan_in).map(|_| rng.random_range(-limit..limit)).collect())
                .collect();
            layers.push(Layer::new(weights, vec![0.0; spec.width], spec.activation)?);
            fan_in = spec.width;
        }
        Network::new(self.input_dim, self.input_range, layers)
    }
}

/// Trains `arch` on `data` with per-sample SGD on softmax cross-entropy.
///
/// The result depends only on the inputs and `config.seed`. With zero epochs the
/// seeded initialization is returned unchanged.
pub fn train_fixture(arch: &Architecture, data: &Dataset, config: &TrainConfig) -> Result<Network> {
    let labels = data.require_labels()?;
    let classes = arch
        .layers
        .last()
        .map(|l| l.width)
        .ok_or_else(|| Error::InvalidModel("architecture has no layers".into()))?;
    if let Some(&bad) = labels.iter().find(|&&y| y as usize >= classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} does not fit an output layer of width {classes}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = arch.initialize(&mut rng)?;
    data.check_against(&net)?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            sgd_step(&mut net, &data.points()[k], labels[k] as usize, config.step);
        }
    }
    Ok(net)
}

fn sgd_step(net: &mut Network, input: &[f64], label: usize, step: f64) {
    // Forward pass keeping pre-activations `zs` and outputs `ys` (ys[0] is the input).
    let mut ys: Vec<Vec<f64>> = vec![input.to_vec()];
    let mut zs: Vec<Vec<f64>> = Vec::new();
    for layer in net.layers() {
        let z = layer.affine(ys.last().unwrap());
        let act = layer.activation();
        ys.push(z.iter().map(|v| act.apply(*v)).collect());
        zs.push(z);
    }

    // d loss / d output for softmax cross-entropy over the final outputs.
    let out = ys.last().unwrap();
    let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = out.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    let mut grad: Vec<f64> = exp.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;

    for l in (0..net.depth()).rev() {
        let layer = &net.layers()[l];
        let act = layer.activation();
        let delta: Vec<f64> = grad
            .iter()
            .zip(zs[l].iter().zip(&ys[l + 1]))
            .map(|(g, (z, y))| g * act.derivative(*z, *y))
            .collect();
        grad = (0..layer.in_dim())
            .map(|k| {
                layer
                    .weights()
                    .iter()
                    .zip(&delta)
                    .map(|(row, d)| row[k] * d)
                    .sum()
            })
            .collect();
        let layer = &mut net.layers_mut()[l];
        for (row, d) in layer.weights_mut().iter_mut().zip(&delta) {
            for (w, x) in row.iter_mut().zip(&ys[l]) {
                *w -= step * d * x;
            }
        }
        for (b, d) in layer.bias_mut().iter_mut().zip(&delta) {
            *b -= step * d;
        }
    }
}
