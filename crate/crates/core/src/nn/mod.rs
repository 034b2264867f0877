//! Masked multilayer perceptron with explicit backpropagation.
//!
//! Layer `j` maps `layer_sizes[j]` inputs to `layer_sizes[j + 1]` outputs;
//! its weight matrix is stored `out × in`, so row `r` holds the incoming
//! weights of neuron `r`. Hidden layers apply the activation, the last layer
//! produces logits that feed a softmax.
//!
//! Every weight has a mask bit. A cleared bit pins the weight to exactly
//! zero: forward passes see zero, gradients are zeroed, and optimizer steps
//! (including weight decay) never touch it.

mod backprop;
mod checkpoint;
mod optim;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{gaussian_matrix, Matrix, Rng};

pub use backprop::{forward, loss_and_backward, ForwardTrace, Gradients};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT};
pub use optim::{OptimizerSpec, OptimizerState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// Exact GELU, `x · Φ(x)`.
    Gelu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Gelu => x * crate::numerics::normal_cdf(x),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => crate::numerics::normal_cdf(x) + x * crate::numerics::normal_pdf(x),
        }
    }
}

/// Weight initialisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitMode {
    /// Weights and biases i.i.d. N(0, sigma_w²).
    Theory { sigma_w: f64 },
    /// Weights N(0, 2 / fan_in), zero biases.
    Training,
}

/// Binary weight mask with the same shape as its weight matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn ones(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![true; rows * cols],
        }
    }

    pub fn from_bits(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} mask bits for a {rows}x{cols} layer",
                bits.len()
            )));
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn is_active(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    #[inline]
    pub fn clear(&mut self, idx: usize) {
        self.bits[idx] = false;
    }

    pub fn active_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Matrix,
    biases: Vec<f64>,
    mask: Mask,
    has_bias: bool,
}

impl Layer {
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn has_bias(&self) -> bool {
        self.has_bias
    }

    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    /// Zeroes every masked weight.
    fn enforce_mask(&mut self) {
        for (w, &keep) in self.weights.as_mut_slice().iter_mut().zip(&self.mask.bits) {
            if !keep {
                *w = 0.0;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedNetwork {
    layer_sizes: Vec<usize>,
    activation: Activation,
    layers: Vec<Layer>,
}

/// Builds a dense network with every layer biased.
pub fn init_network(
    rng: &mut Rng,
    layer_sizes: &[usize],
    activation: Activation,
    init: InitMode,
) -> Result<MaskedNetwork> {
    let biased = vec![true; layer_sizes.len().saturating_sub(1)];
    init_network_with_biases(rng, layer_sizes, activation, init, &biased)
}

/// Like [`init_network`], with a per-layer bias flag. Layers without a bias
/// keep a zero bias vector that is never updated.
pub fn init_network_with_biases(
    rng: &mut Rng,
    layer_sizes: &[usize],
    activation: Activation,
    init: InitMode,
    biased: &[bool],
) -> Result<MaskedNetwork> {
    if layer_sizes.len() < 2 {
        return Err(Error::invalid("a network needs at least two layer sizes"));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::invalid("layer sizes must be positive"));
    }
    if biased.len() != layer_sizes.len() - 1 {
        return Err(Error::shape(format!(
            "{} bias flags for {} layers",
            biased.len(),
            layer_sizes.len() - 1
        )));
    }
    if let InitMode::Theory { sigma_w } = init {
        if !sigma_w.is_finite() || sigma_w < 0.0 {
            return Err(Error::invalid(format!("sigma_w = {sigma_w}")));
        }
    }
    let layers = layer_sizes
        .windows(2)
        .zip(biased)
        .map(|(io, &has_bias)| {
            let (fan_in, fan_out) = (io[0], io[1]);
            let (weights, biases) = match init {
                InitMode::Theory { sigma_w } => {
                    let w = gaussian_matrix(rng, fan_out, fan_in, sigma_w);
                    let b = if has_bias {
                        (0..fan_out).map(|_| sigma_w * rng.gaussian()).collect()
                    } else {
                        vec![0.0; fan_out]
                    };
                    (w, b)
                }
                InitMode::Training => {
                    let sigma = (2.0 / fan_in as f64).sqrt();
                    (
                        gaussian_matrix(rng, fan_out, fan_in, sigma),
                        vec![0.0; fan_out],
                    )
                }
            };
            Layer {
                weights,
                biases,
                mask: Mask::ones(fan_out, fan_in),
                has_bias,
            }
        })
        .collect();
    Ok(MaskedNetwork {
        layer_sizes: layer_sizes.to_vec(),
        activation,
        layers,
    })
}

impl MaskedNetwork {
    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, j: usize) -> &Layer {
        &self.layers[j]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().expect("at least two sizes")
    }

    /// Total prunable weights (biases excluded).
    pub fn total_weights(&self) -> usize {
        self.layers.iter().map(|l| l.mask.len()).sum()
    }

    pub fn active_weights(&self) -> usize {
        self.layers.iter().map(|l| l.mask.active_count()).sum()
    }

    pub fn masks(&self) -> Vec<Mask> {
        self.layers.iter().map(|l| l.mask.clone()).collect()
    }

    pub fn weight_matrices(&self) -> Vec<Matrix> {
        self.layers.iter().map(|l| l.weights.clone()).collect()
    }

    /// Replaces a weight matrix; masked positions are zeroed afterwards.
    pub fn set_weights(&mut self, j: usize, weights: Matrix) -> Result<()> {
        let layer = self
            .layers
            .get_mut(j)
            .ok_or_else(|| Error::invalid(format!("no layer {j}")))?;
        if weights.shape() != layer.weights.shape() {
            return Err(Error::shape(format!(
                "layer {j} expects {:?}, got {:?}",
                layer.weights.shape(),
                weights.shape()
            )));
        }
        if !weights.is_finite() {
            return Err(Error::invalid("non-finite weights"));
        }
        layer.weights = weights;
        layer.enforce_mask();
        Ok(())
    }

    pub fn set_biases(&mut self, j: usize, biases: Vec<f64>) -> Result<()> {
        let layer = self
            .layers
            .get_mut(j)
            .ok_or_else(|| Error::invalid(format!("no layer {j}")))?;
        if biases.len() != layer.biases.len() {
            return Err(Error::shape(format!(
                "layer {j} expects {} biases, got {}",
                layer.biases.len(),
                biases.len()
            )));
        }
        layer.biases = biases;
        Ok(())
    }

    /// Replaces a mask and zeroes the newly masked weights.
    pub fn set_mask(&mut self, j: usize, mask: Mask) -> Result<()> {
        let layer = self
            .layers
            .get_mut(j)
            .ok_or_else(|| Error::invalid(format!("no layer {j}")))?;
        if mask.shape() != layer.weights.shape() {
            return Err(Error::shape(format!(
                "mask {:?} for layer {j} of shape {:?}",
                mask.shape(),
                layer.weights.shape()
            )));
        }
        layer.mask = mask;
        layer.enforce_mask();
        Ok(())
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub(crate) fn from_layers(
        layer_sizes: Vec<usize>,
        activation: Activation,
        layers: Vec<Layer>,
    ) -> Result<Self> {
        if layer_sizes.len() != layers.len() + 1 {
            return Err(Error::shape("layer count does not match layer sizes"));
        }
        for (j, l) in layers.iter().enumerate() {
            if l.weights.shape() != (layer_sizes[j + 1], layer_sizes[j])
                || l.mask.shape() != l.weights.shape()
                || l.biases.len() != layer_sizes[j + 1]
            {
                return Err(Error::shape(format!("layer {j} has inconsistent shapes")));
            }
        }
        let mut net = Self {
            layer_sizes,
            activation,
            layers,
        };
        net.layers.iter_mut().for_each(Layer::enforce_mask);
        Ok(net)
    }

    /// True when every masked weight is exactly zero.
    pub fn masked_weights_are_zero(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights
                .as_slice()
                .iter()
                .zip(&l.mask.bits)
                .all(|(&w, &keep)| keep || w == 0.0)
        })
    }
}

/// Top-1 accuracy and mean cross-entropy over a dataset. Argmax ties go to
/// the lowest class index.
pub fn evaluate(net: &MaskedNetwork, ds: &Dataset) -> Result<(f64, f64)> {
    if ds.is_empty() {
        return Err(Error::invalid("evaluate on an empty dataset"));
    }
    const CHUNK: usize = 1024;
    let mut correct = 0usize;
    let mut loss_sum = 0.0;
    let n = ds.len();
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let x = ds.features.select_rows(&idx);
        let labels = &ds.labels[start..end];
        let trace = forward(net, &x)?;
        let logits = trace.logits();
        let preds = logits.argmax_rows();
        correct += preds.iter().zip(labels).filter(|(p, y)| p == y).count();
        loss_sum += backprop::cross_entropy_sum(logits, labels)?;
        start = end;
    }
    Ok((correct as f64 / n as f64, loss_sum / n as f64))
}
