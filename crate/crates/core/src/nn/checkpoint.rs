//! JSON network checkpoints.
//!
//! ```json
//! {
//!   "format": "silo-network",
//!   "version": 1,
//!   "layer_sizes": [784, 64, 10],
//!   "activation": "relu",
//!   "layers": [
//!     { "rows": 64, "cols": 784, "has_bias": true,
//!       "weights": [...], "biases": [...], "mask": [1, 0, ...] }
//!   ]
//! }
//! ```
//!
//! `weights` and `mask` are row-major `rows × cols` arrays (`rows` = fan-out).
//! Floats are written in shortest round-trip form, so load(save(net)) is
//! bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, Layer, Mask, MaskedNetwork};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const CHECKPOINT_FORMAT: &str = "silo-network";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub layers: Vec<CheckpointLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointLayer {
    pub rows: usize,
    pub cols: usize,
    pub has_bias: bool,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub mask: Vec<u8>,
}

impl From<&MaskedNetwork> for Checkpoint {
    fn from(net: &MaskedNetwork) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: VERSION,
            layer_sizes: net.layer_sizes().to_vec(),
            activation: net.activation(),
            layers: net
                .layers()
                .iter()
                .map(|l| CheckpointLayer {
                    rows: l.fan_out(),
                    cols: l.fan_in(),
                    has_bias: l.has_bias(),
                    weights: l.weights().as_slice().to_vec(),
                    biases: l.biases().to_vec(),
                    mask: l.mask().bits().iter().map(|&b| b as u8).collect(),
                })
                .collect(),
        }
    }
}

impl Checkpoint {
    pub fn into_network(self) -> Result<MaskedNetwork> {
        if self.format != CHECKPOINT_FORMAT || self.version != VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let layers = self
            .layers
            .into_iter()
            .map(|l| {
                if l.mask.iter().any(|&b| b > 1) {
                    return Err(Error::invalid("mask entries must be 0 or 1"));
                }
                Ok(Layer {
                    weights: Matrix::from_vec(l.rows, l.cols, l.weights)?,
                    biases: l.biases,
                    mask: Mask::from_bits(
                        l.rows,
                        l.cols,
                        l.mask.iter().map(|&b| b == 1).collect(),
                    )?,
                    has_bias: l.has_bias,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MaskedNetwork::from_layers(self.layer_sizes, self.activation, layers)
    }
}

pub fn save_checkpoint(net: &MaskedNetwork, path: &Path) -> Result<()> {
    let doc = Checkpoint::from(net);
    std::fs::write(path, serde_json::to_vec(&doc)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<MaskedNetwork> {
    let doc: Checkpoint = serde_json::from_slice(&std::fs::read(path)?)?;
    doc.into_network()
}
