//! Fully connected feed-forward networks with monotone activations.
//!
//! Layers are indexed from 1 (layer 0 is the input vector); neurons inside a
//! layer are indexed from 0. A network carries the closed interval that every
//! input coordinate is assumed to lie in, which is what makes the bound
//! propagation in [`crate::bounds`] meaningful.

mod dataset;
mod train;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::Dataset;
pub use train::{train_fixture, Architecture, LayerSpec, TrainConfig};

/// Default slope of the negative branch of LeakyReLU.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// A monotonically non-decreasing element-wise activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu { slope } => {
                if x >= 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation `x`, given the output `y`.
    #[inline]
    pub(crate) fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if x >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    fn validate(self) -> Result<()> {
        if let Activation::LeakyRelu { slope } = self {
            if !slope.is_finite() || slope < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "LeakyReLU slope must be finite and non-negative, got {slope}"
                )));
            }
        }
        Ok(())
    }
}

/// The closed interval `[lo, hi]` that bounds every input coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", try_from = "[f64; 2]")]
pub struct InputRange {
    pub lo: f64,
    pub hi: f64,
}

impl InputRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidModel(format!(
                "input range [{lo}, {hi}] must be finite with lo <= hi"
            )));
        }
        Ok(Self { lo, hi })
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

impl From<InputRange> for [f64; 2] {
    fn from(r: InputRange) -> Self {
        [r.lo, r.hi]
    }
}

impl TryFrom<[f64; 2]> for InputRange {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        InputRange::new(v[0], v[1])
    }
}

/// A dense layer `y = activation(W x + b)`; `weights` is row-major with one row per neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LayerFile", try_from = "LayerFile")]
pub struct Layer {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.len() != bias.len() {
            return Err(Error::InvalidModel(format!(
                "{} weight rows but {} bias entries",
                weights.len(),
                bias.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::InvalidModel("layer has no neurons".into()));
        }
        let in_dim = weights[0].len();
        if in_dim == 0 {
            return Err(Error::InvalidModel("layer has zero inputs".into()));
        }
        if weights.iter().any(|row| row.len() != in_dim) {
            return Err(Error::InvalidModel("ragged weight matrix".into()));
        }
        let finite = weights.iter().flatten().chain(bias.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidModel("non-finite weight or bias".into()));
        }
        activation.validate()?;
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.len()
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Pre-activation `W x + b`.
    pub(crate) fn affine(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }

    pub fn eval(&self, input: &[f64]) -> Vec<f64> {
        let act = self.activation;
        let mut z = self.affine(input);
        z.iter_mut().for_each(|v| *v = act.apply(*v));
        z
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ActivationKind {
    Relu,
    LeakyRelu,
    Tanh,
    Identity,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: ActivationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slope: Option<f64>,
}

impl From<Layer> for LayerFile {
    fn from(layer: Layer) -> Self {
        let (activation, slope) = match layer.activation {
            Activation::Relu => (ActivationKind::Relu, None),
            Activation::LeakyRelu { slope } => (ActivationKind::LeakyRelu, Some(slope)),
            Activation::Tanh => (ActivationKind::Tanh, None),
            Activation::Identity => (ActivationKind::Identity, None),
        };
        LayerFile {
            weights: layer.weights,
            bias: layer.bias,
            activation,
            slope,
        }
    }
}

impl TryFrom<LayerFile> for Layer {
    type Error = Error;

    fn try_from(f: LayerFile) -> Result<Self> {
        let activation = match (f.activation, f.slope) {
            (ActivationKind::LeakyRelu, slope) => Activation::LeakyRelu {
                slope: slope.unwrap_or(DEFAULT_LEAKY_SLOPE),
            },
            (_, Some(_)) => {
                return Err(Error::InvalidModel(
                    "`slope` is only allowed for leaky_relu layers".into(),
                ))
            }
            (ActivationKind::Relu, None) => Activation::Relu,
            (ActivationKind::Tanh, None) => Activation::Tanh,
            (ActivationKind::Identity, None) => Activation::Identity,
        };
        Layer::new(f.weights, f.bias, activation)
    }
}

/// A feed-forward network `F = f^L ∘ … ∘ f^1` over inputs in `input_range^input_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NetworkFile", try_from = "NetworkFile")]
pub struct Network {
    input_dim: usize,
    input_range: InputRange,
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    input_dim: usize,
    input_range: InputRange,
    layers: Vec<Layer>,
}

impl From<Network> for NetworkFile {
    fn from(n: Network) -> Self {
        NetworkFile {
            input_dim: n.input_dim,
            input_range: n.input_range,
            layers: n.layers,
        }
    }
}

impl TryFrom<NetworkFile> for Network {
    type Error = Error;

    fn try_from(f: NetworkFile) -> Result<Self> {
        Network::new(f.input_dim, f.input_range, f.layers)
    }
}

impl Network {
    pub fn new(input_dim: usize, input_range: InputRange, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidModel("input_dim must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidModel("network has no layers".into()));
        }
        let mut width = input_dim;
        for (l, layer) in layers.iter().enumerate() {
            if layer.in_dim() != width {
                return Err(Error::InvalidModel(format!(
                    "layer {} expects {} inputs but the previous layer yields {}",
                    l + 1,
                    layer.in_dim(),
                    width
                )));
            }
            width = layer.out_dim();
        }
        Ok(Self {
            input_dim,
            input_range,
            layers,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn input_range(&self) -> InputRange {
        self.input_range
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Number of layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Width `d_l` of layer `l` (1-based).
    pub fn width(&self, layer: usize) -> Result<usize> {
        self.check_layer(layer)?;
        Ok(self.layers[layer - 1].out_dim())
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn check_layer(&self, layer: usize) -> Result<()> {
        if layer == 0 || layer > self.layers.len() {
            return Err(Error::LayerRange {
                layer,
                max: self.layers.len(),
            });
        }
        Ok(())
    }

    /// Checks that `input` has the right length and lies in the input box.
    pub fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::InputShape {
                expected: self.input_dim,
                actual: input.len(),
            });
        }
        let r = self.input_range;
        if let Some((index, &value)) = input.iter().enumerate().find(|(_, v)| !r.contains(**v)) {
            return Err(Error::Domain {
                index,
                value,
                lo: r.lo,
                hi: r.hi,
            });
        }
        Ok(())
    }

    /// Outputs of layers `1..=L` for one input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(input)?;
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let prev = outputs.last().map(Vec::as_slice).unwrap_or(input);
            let next = layer.eval(prev);
            outputs.push(next);
        }
        Ok(outputs)
    }

    /// Output `F^l(input)` of a single layer, skipping the layers above it.
    pub fn layer_output(&self, input: &[f64], layer: usize) -> Result<Vec<f64>> {
        self.check_layer(layer)?;
        self.check_input(input)?;
        let mut value = input.to_vec();
        for layer in &self.layers[..layer] {
            value = layer.eval(&value);
        }
        Ok(value)
    }

    /// Final-layer output.
    pub fn output(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.layer_output(input, self.layers.len())
    }

    /// Index of the largest output; ties go to the lowest index.
    pub fn predict(&self, input: &[f64]) -> Result<usize> {
        let out = self.output(input)?;
        let mut best = 0;
        for (k, v) in out.iter().enumerate() {
            if *v > out[best] {
                best = k;
            }
        }
        Ok(best)
    }

    /// Layer-`layer` outputs for every point, in dataset order.
    pub fn layer_outputs(&self, data: &Dataset, layer: usize) -> Result<Vec<Vec<f64>>> {
        self.check_layer(layer)?;
        data.points()
            .par_iter()
            .map(|p| self.layer_output(p, layer))
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("network serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Per-neuron value multisets `V^l_i(D)`: entry `i` holds neuron `i`'s value on
/// every point, in dataset order.
pub fn collect_values(net: &Network, data: &Dataset, layer: usize) -> Result<Vec<Vec<f64>>> {
    let width = net.width(layer)?;
    let outputs = net.layer_outputs(data, layer)?;
    let mut values = vec![Vec::with_capacity(data.len()); width];
    for out in outputs {
        for (i, v) in out.into_iter().enumerate() {
            values[i].push(v);
        }
    }
    Ok(values)
}
