//! Activation-energy lower bounds under iterative magnitude pruning, their
//! Monte-Carlo checks, and the empirical energy measurements.
//!
//! Setting: inputs `X ~ N(0, σ_X² I_d)`, first-layer weights and biases
//! `~ N(0, σ_W²)`, ReLU hidden units. After `k` rounds that each prune a
//! fraction `p` of the smallest-magnitude remaining weights, the fraction of
//! pruned weights is `τ = 1 - (1 - p)^k`, and the surviving weight
//! distribution is a Gaussian with its central `τ` mass removed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{forward, Mask, MaskedNetwork};
use crate::numerics::{erfinv, Matrix};

mod monte_carlo;

pub use monte_carlo::{mc_activation_energy, mc_inputs, theory_network, McConfig, SHARD_SAMPLES};

/// τ at or above this is treated as "everything pruned" for the erfinv term.
const TAU_LIMIT: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub sigma_x: f64,
    pub sigma_w: f64,
    /// Input dimension.
    pub d: usize,
    /// Pruning rate per round.
    pub p: f64,
    /// Pruning rounds so far.
    pub k: u32,
    /// Network depth (number of ReLU layers stacked before the measured one).
    pub depth: u32,
    /// Target weight-gradient energy `K`.
    pub target_energy: f64,
    /// Proportionality constant between the weight-gradient energy bound and
    /// `α² · C`.
    pub gamma_const: f64,
}

impl TheoryParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.sigma_x) || !pos(self.sigma_w) {
            return Err(Error::config("sigma_x and sigma_w must be positive"));
        }
        if self.d == 0 {
            return Err(Error::config("d must be at least 1"));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::config("p must lie in (0, 1)"));
        }
        if self.depth == 0 {
            return Err(Error::config("depth must be at least 1"));
        }
        if !pos(self.target_energy) || !pos(self.gamma_const) {
            return Err(Error::config(
                "target_energy and gamma_const must be positive",
            ));
        }
        Ok(())
    }

    /// Fraction of weights pruned after `k` rounds.
    pub fn tau(&self) -> f64 {
        1.0 - (1.0 - self.p).powi(self.k as i32)
    }
}

/// Second moment of `N(0, σ_W²)` after zeroing its smallest-magnitude `τ`
/// mass, averaged over all weights (pruned ones count as zero):
/// `σ_W² ((1 - τ) + (2/√π) e e^{-e²})` with `e = erfinv(τ)`.
pub fn pruned_gaussian_second_moment(sigma_w: f64, tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("tau = {tau} outside [0, 1]")));
    }
    Ok(sigma_w * sigma_w * pruned_bracket(tau)?)
}

/// `(1 - τ) + (2/√π) erfinv(τ) exp(-erfinv(τ)²)`.
fn pruned_bracket(tau: f64) -> Result<f64> {
    let keep = 1.0 - tau;
    if tau >= TAU_LIMIT {
        return Ok(keep);
    }
    let e = erfinv(tau)?;
    Ok(keep + std::f64::consts::FRAC_2_SQRT_PI * e * (-e * e).exp())
}

/// Lower bound on `4·E_AA(H)` for a single ReLU hidden layer:
/// `σ_W² + d σ_X² σ_W² · bracket(τ)`.
pub fn thm1_lower_bound(params: &TheoryParams) -> Result<f64> {
    corollary1_lower_bound(&TheoryParams {
        depth: 1,
        ..*params
    })
}

/// Lower bound on `4·E_AA(H_D)` for depth `D`:
/// `σ_W² + d σ_X² σ_W^{2D} / 2^{D-1} · bracket(τ)`. Reduces to
/// [`thm1_lower_bound`] at `D = 1`.
pub fn corollary1_lower_bound(params: &TheoryParams) -> Result<f64> {
    params.validate()?;
    let s2 = params.sigma_w * params.sigma_w;
    let prefactor =
        params.d as f64 * params.sigma_x * params.sigma_x * s2.powi(params.depth as i32)
            / 2f64.powi(params.depth as i32 - 1);
    Ok(s2 + prefactor * pruned_bracket(params.tau())?)
}

/// Mean squared change over active positions:
/// `E_i[(w_i - w'_i)²]` for `mask_i = 1`, pooled over all layers.
pub fn measure_ewg(before: &[Matrix], after: &[Matrix], masks: &[Mask]) -> Result<f64> {
    if before.len() != after.len() || before.len() != masks.len() {
        return Err(Error::shape("layer counts differ"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((b, a), m) in before.iter().zip(after).zip(masks) {
        if b.shape() != a.shape() || b.shape() != m.shape() {
            return Err(Error::shape(format!(
                "weights {:?} vs {:?} with mask {:?}",
                b.shape(),
                a.shape(),
                m.shape()
            )));
        }
        for ((x, y), &keep) in b.as_slice().iter().zip(a.as_slice()).zip(m.bits()) {
            if keep {
                sum += (x - y) * (x - y);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::invalid("no active weights"));
    }
    Ok(sum / count as f64)
}

/// Empirical `E_AA` of hidden layer `layer_index` (0 = first hidden layer):
/// the mean over rows of `(1/N) Σ_i h_i²`.
pub fn measure_eaa(net: &MaskedNetwork, data: &Matrix, layer_index: usize) -> Result<f64> {
    let hidden = net.num_layers() - 1;
    if layer_index >= hidden {
        return Err(Error::invalid(format!(
            "hidden layer {layer_index} requested, network has {hidden}"
        )));
    }
    if data.rows() == 0 {
        return Err(Error::invalid("no input rows"));
    }
    let trace = forward(net, data)?;
    let h = &trace.post[layer_index];
    let total: f64 = h.as_slice().iter().map(|v| v * v).sum();
    Ok(total / (h.rows() * h.cols()) as f64)
}
