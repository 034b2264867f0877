//! Mask-aware SGD with momentum, Adam and RMSProp.
//!
//! Weight decay is L2-style (added to the gradient) and applies to weights
//! only. Masked positions are skipped entirely: their buffers stay zero and
//! the weight stays exactly zero.

use serde::{Deserialize, Serialize};

use super::{Gradients, MaskedNetwork};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

fn default_momentum() -> f64 {
    0.9
}
fn default_weight_decay() -> f64 {
    1e-4
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_alpha() -> f64 {
    0.99
}
fn default_eps() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerSpec {
    SgdMomentum {
        #[serde(default = "default_momentum")]
        momentum: f64,
        #[serde(default = "default_weight_decay")]
        weight_decay: f64,
    },
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default = "default_weight_decay")]
        weight_decay: f64,
    },
    #[serde(rename = "rmsprop")]
    RmsProp {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default = "default_weight_decay")]
        weight_decay: f64,
    },
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self::sgd_momentum()
    }
}

impl OptimizerSpec {
    /// Momentum 0.9, weight decay 1e-4.
    pub fn sgd_momentum() -> Self {
        OptimizerSpec::SgdMomentum {
            momentum: default_momentum(),
            weight_decay: default_weight_decay(),
        }
    }

    /// Plain gradient descent: no momentum, no decay.
    pub fn plain_sgd() -> Self {
        OptimizerSpec::SgdMomentum {
            momentum: 0.0,
            weight_decay: 0.0,
        }
    }

    pub fn adam() -> Self {
        OptimizerSpec::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            weight_decay: default_weight_decay(),
        }
    }

    pub fn rmsprop() -> Self {
        OptimizerSpec::RmsProp {
            alpha: default_alpha(),
            eps: default_eps(),
            weight_decay: default_weight_decay(),
        }
    }

    fn weight_decay(&self) -> f64 {
        match *self {
            OptimizerSpec::SgdMomentum { weight_decay, .. }
            | OptimizerSpec::Adam { weight_decay, .. }
            | OptimizerSpec::RmsProp { weight_decay, .. } => weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::config(format!("optimizer {what} out of range")));
        let wd = self.weight_decay();
        if !(wd.is_finite() && wd >= 0.0) {
            return bad("weight_decay");
        }
        match *self {
            OptimizerSpec::SgdMomentum { momentum, .. } if !(0.0..1.0).contains(&momentum) => {
                bad("momentum")
            }
            OptimizerSpec::Adam {
                beta1, beta2, eps, ..
            } if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 => {
                bad("adam parameters")
            }
            OptimizerSpec::RmsProp { alpha, eps, .. }
                if !(0.0..1.0).contains(&alpha) || eps <= 0.0 =>
            {
                bad("rmsprop parameters")
            }
            _ => Ok(()),
        }
    }
}

/// Per-parameter buffers. `first` holds SGD velocity or Adam's first moment;
/// `second` holds the squared-gradient average for Adam and RMSProp.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    spec: OptimizerSpec,
    first_w: Vec<Matrix>,
    first_b: Vec<Vec<f64>>,
    second_w: Vec<Matrix>,
    second_b: Vec<Vec<f64>>,
    steps: u64,
}

impl OptimizerState {
    pub fn new(spec: OptimizerSpec, net: &MaskedNetwork) -> Self {
        let zw = || -> Vec<Matrix> {
            net.layers()
                .iter()
                .map(|l| Matrix::zeros(l.fan_out(), l.fan_in()))
                .collect()
        };
        let zb = || -> Vec<Vec<f64>> {
            net.layers()
                .iter()
                .map(|l| vec![0.0; l.fan_out()])
                .collect()
        };
        Self {
            spec,
            first_w: zw(),
            first_b: zb(),
            second_w: zw(),
            second_b: zb(),
            steps: 0,
        }
    }

    pub fn spec(&self) -> &OptimizerSpec {
        &self.spec
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update with learning rate `lr`.
    pub fn step(&mut self, net: &mut MaskedNetwork, grads: &Gradients, lr: f64) -> Result<()> {
        if !lr.is_finite() {
            return Err(Error::invalid(format!("learning rate {lr}")));
        }
        if grads.weights.len() != net.num_layers()
            || self.first_w.len() != net.num_layers()
            || grads
                .weights
                .iter()
                .zip(net.layers())
                .any(|(g, l)| g.shape() != l.weights().shape())
        {
            return Err(Error::shape(
                "gradients or buffers do not match the network",
            ));
        }
        self.steps += 1;
        let spec = self.spec;
        let wd = spec.weight_decay();
        let t = self.steps as i32;

        for (j, layer) in net.layers_mut().iter_mut().enumerate() {
            let gw = grads.weights[j].as_slice();
            let m1 = self.first_w[j].as_mut_slice();
            let m2 = self.second_w[j].as_mut_slice();
            let mask = layer.mask.bits.as_slice();
            let w = layer.weights.as_mut_slice();
            for i in 0..w.len() {
                if !mask[i] {
                    w[i] = 0.0;
                    continue;
                }
                let g = gw[i] + wd * w[i];
                w[i] -= update(&spec, g, &mut m1[i], &mut m2[i], lr, t);
            }
            if layer.has_bias {
                let gb = &grads.biases[j];
                let b1 = &mut self.first_b[j];
                let b2 = &mut self.second_b[j];
                for i in 0..layer.biases.len() {
                    layer.biases[i] -= update(&spec, gb[i], &mut b1[i], &mut b2[i], lr, t);
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn update(spec: &OptimizerSpec, g: f64, m1: &mut f64, m2: &mut f64, lr: f64, t: i32) -> f64 {
    match *spec {
        OptimizerSpec::SgdMomentum { momentum, .. } => {
            *m1 = momentum * *m1 + g;
            lr * *m1
        }
        OptimizerSpec::Adam {
            beta1, beta2, eps, ..
        } => {
            *m1 = beta1 * *m1 + (1.0 - beta1) * g;
            *m2 = beta2 * *m2 + (1.0 - beta2) * g * g;
            let m_hat = *m1 / (1.0 - beta1.powi(t));
            let v_hat = *m2 / (1.0 - beta2.powi(t));
            lr * m_hat / (v_hat.sqrt() + eps)
        }
        OptimizerSpec::RmsProp { alpha, eps, .. } => {
            *m2 = alpha * *m2 + (1.0 - alpha) * g * g;
            lr * g / (m2.sqrt() + eps)
        }
    }
}
