//! Pruning scorers, mask updates, weight rewinding and the iterative
//! prune / freeze / retrain driver.
//!
//! Only weights are pruned; biases always stay trainable.

mod distributions;
mod driver;
mod train;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{Mask, MaskedNetwork};
use crate::numerics::Matrix;

pub use distributions::{gradient_distribution, mean_gradient};
pub(crate) use driver::prune_for_cycle;
pub use driver::{run_iterative_pruning, CycleReport, PruneRunConfig, RunReport, CYCLE_CSV_HEADER};
pub use train::{train_cycle, CycleTraining, TrainSettings};

fn default_gradient_batch() -> usize {
    1024
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PruneMethod {
    /// Smallest |w| anywhere in the network.
    GlobalMagnitude,
    /// Smallest |w| within each layer, same rate per layer.
    LayerMagnitude,
    /// Smallest |w · g| anywhere, `g` the mean gradient over the first
    /// `gradient_batch_size` scoring samples.
    GlobalGradient {
        #[serde(default = "default_gradient_batch")]
        gradient_batch_size: usize,
    },
    /// Layer-adaptive magnitude scores, compared globally.
    Lamp,
    /// Structured: hidden neurons with the smallest incoming L1 norm.
    L1Neuron,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreScope {
    /// One ranking over the whole network.
    Global,
    /// Each layer is ranked and pruned separately.
    PerLayer,
}

/// Score of one active weight; `index` is the row-major position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredWeight {
    pub layer: usize,
    pub index: usize,
    pub score: f64,
}

/// Scores for the active weights of a network. Lower scores are pruned first.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub scope: ScoreScope,
    pub entries: Vec<ScoredWeight>,
}

impl Scores {
    /// Entries in pruning order: ascending score, ties by (layer, index).
    pub fn pruning_order(&self) -> Vec<ScoredWeight> {
        let mut v = self.entries.clone();
        v.sort_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then(a.layer.cmp(&b.layer))
                .then(a.index.cmp(&b.index))
        });
        v
    }
}

fn active_entries(net: &MaskedNetwork, f: impl Fn(usize, usize, f64) -> f64) -> Vec<ScoredWeight> {
    let mut out = Vec::with_capacity(net.active_weights());
    for (j, layer) in net.layers().iter().enumerate() {
        for (i, (&w, &keep)) in layer
            .weights()
            .as_slice()
            .iter()
            .zip(layer.mask().bits())
            .enumerate()
        {
            if keep {
                out.push(ScoredWeight {
                    layer: j,
                    index: i,
                    score: f(j, i, w),
                });
            }
        }
    }
    out
}

/// LAMP scores for one layer's active weights: `w_u²` over the sum of `w_v²`
/// for all active `v` at or after `u` in ascending-magnitude order (ties by
/// index). The largest weight in each layer scores exactly 1.
pub fn lamp_layer_scores(weights: &[f64], mask: &[bool]) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = (0..weights.len()).filter(|&i| mask[i]).collect();
    order.sort_by(|&a, &b| {
        weights[a]
            .abs()
            .total_cmp(&weights[b].abs())
            .then(a.cmp(&b))
    });
    let mut scores = vec![(0usize, 0.0f64); order.len()];
    let mut trailing = 0.0;
    for (pos, &i) in order.iter().enumerate().rev() {
        let sq = weights[i] * weights[i];
        trailing += sq;
        scores[pos] = (i, if trailing > 0.0 { sq / trailing } else { 0.0 });
    }
    scores
}

/// Scores every active weight. `data` is required for gradient scoring and
/// ignored otherwise.
pub fn score_weights(
    net: &MaskedNetwork,
    method: PruneMethod,
    data: Option<&Dataset>,
) -> Result<Scores> {
    match method {
        PruneMethod::GlobalMagnitude => Ok(Scores {
            scope: ScoreScope::Global,
            entries: active_entries(net, |_, _, w| w.abs()),
        }),
        PruneMethod::LayerMagnitude => Ok(Scores {
            scope: ScoreScope::PerLayer,
            entries: active_entries(net, |_, _, w| w.abs()),
        }),
        PruneMethod::GlobalGradient {
            gradient_batch_size,
        } => {
            let data = data.ok_or_else(|| Error::invalid("gradient scoring needs data"))?;
            if data.is_empty() || gradient_batch_size == 0 {
                return Err(Error::invalid("gradient scoring needs a nonempty batch"));
            }
            let g = mean_gradient(net, &data.head(gradient_batch_size))?;
            Ok(Scores {
                scope: ScoreScope::Global,
                entries: active_entries(net, |j, i, w| (w * g.weights[j].as_slice()[i]).abs()),
            })
        }
        PruneMethod::Lamp => {
            let mut entries = Vec::with_capacity(net.active_weights());
            for (j, layer) in net.layers().iter().enumerate() {
                let mut layer_scores =
                    lamp_layer_scores(layer.weights().as_slice(), layer.mask().bits());
                layer_scores.sort_by_key(|&(i, _)| i);
                entries.extend(layer_scores.into_iter().map(|(index, score)| ScoredWeight {
                    layer: j,
                    index,
                    score,
                }));
            }
            Ok(Scores {
                scope: ScoreScope::Global,
                entries,
            })
        }
        PruneMethod::L1Neuron => Err(Error::invalid(
            "L1 neuron pruning is structured; use prune_neurons_l1",
        )),
    }
}

/// Clears the mask bits of the lowest-scoring active weights:
/// `floor(p × active)` of them over the whole network (global scope) or per
/// layer (per-layer scope). Returns the number pruned.
pub fn prune_step(masks: &mut [Mask], scores: &Scores, p: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("pruning rate {p} outside [0, 1]")));
    }
    let active: usize = masks.iter().map(Mask::active_count).sum();
    if scores.entries.len() != active
        || scores.entries.iter().any(|e| {
            e.layer >= masks.len()
                || e.index >= masks[e.layer].len()
                || !masks[e.layer].is_active(e.index)
        })
    {
        return Err(Error::invalid(
            "scores must cover exactly the active weights",
        ));
    }
    let order = scores.pruning_order();
    let mut pruned = 0;
    match scores.scope {
        ScoreScope::Global => {
            let n = (p * order.len() as f64).floor() as usize;
            for e in &order[..n] {
                masks[e.layer].clear(e.index);
            }
            pruned = n;
        }
        ScoreScope::PerLayer => {
            for (j, mask) in masks.iter_mut().enumerate() {
                let n = (p * mask.active_count() as f64).floor() as usize;
                for e in order.iter().filter(|e| e.layer == j).take(n) {
                    mask.clear(e.index);
                }
                pruned += n;
            }
        }
    }
    Ok(pruned)
}

/// [`prune_step`] applied to a network's masks, zeroing the pruned weights.
pub fn prune_network(net: &mut MaskedNetwork, scores: &Scores, p: f64) -> Result<usize> {
    let mut masks = net.masks();
    let pruned = prune_step(&mut masks, scores, p)?;
    for (j, m) in masks.into_iter().enumerate() {
        net.set_mask(j, m)?;
    }
    Ok(pruned)
}

/// Structured pruning of hidden neurons by incoming L1 norm.
///
/// Hidden layers are processed front to back. In each, `floor(p × active)`
/// active neurons with the smallest sum of |incoming active weight| (ties by
/// neuron index) lose their whole incoming row and their outgoing column in
/// the next layer. A neuron counts as active while any incoming weight is.
/// Returns the number of neurons removed.
pub fn prune_neurons_l1(net: &mut MaskedNetwork, p: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("pruning rate {p} outside [0, 1)")));
    }
    let mut removed_total = 0;
    for j in 0..net.num_layers() - 1 {
        let layer = net.layer(j);
        let cols = layer.fan_in();
        let w = layer.weights();
        let mask = layer.mask();
        let mut active: Vec<(usize, f64)> = (0..layer.fan_out())
            .filter(|&r| (0..cols).any(|c| mask.is_active(r * cols + c)))
            .map(|r| (r, w.row(r).iter().map(|v| v.abs()).sum()))
            .collect();
        let n = (p * active.len() as f64).floor() as usize;
        if active.len() == n {
            return Err(Error::invalid(format!(
                "pruning would leave hidden layer {j} without neurons"
            )));
        }
        if n == 0 {
            continue;
        }
        active.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let victims: Vec<usize> = active[..n].iter().map(|&(r, _)| r).collect();

        let mut incoming = net.layer(j).mask().clone();
        let mut outgoing = net.layer(j + 1).mask().clone();
        let next_cols = net.layer(j + 1).fan_in();
        for &r in &victims {
            for c in 0..cols {
                incoming.clear(r * cols + c);
            }
            for row in 0..net.layer(j + 1).fan_out() {
                outgoing.clear(row * next_cols + r);
            }
        }
        net.set_mask(j, incoming)?;
        net.set_mask(j + 1, outgoing)?;
        removed_total += n;
    }
    Ok(removed_total)
}

/// Percent of weights remaining (biases excluded).
pub fn lambda_of(net: &MaskedNetwork) -> f64 {
    100.0 * net.active_weights() as f64 / net.total_weights() as f64
}

/// Saved parameters for weight rewinding.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn take(net: &MaskedNetwork) -> Self {
        Self {
            weights: net.weight_matrices(),
            biases: net.layers().iter().map(|l| l.biases().to_vec()).collect(),
        }
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }
}

/// Restores active weights (and all biases) from `snapshot`; masked weights
/// stay zero. The caller starts a fresh optimizer afterwards.
pub fn rewind_to(net: &mut MaskedNetwork, snapshot: &Snapshot) -> Result<()> {
    if snapshot.weights.len() != net.num_layers()
        || snapshot
            .weights
            .iter()
            .zip(net.layers())
            .any(|(s, l)| s.shape() != l.weights().shape())
    {
        return Err(Error::shape("snapshot does not match the network"));
    }
    for j in 0..net.num_layers() {
        // set_weights re-applies the current mask.
        net.set_weights(j, snapshot.weights[j].clone())?;
        net.set_biases(j, snapshot.biases[j].clone())?;
    }
    Ok(())
}
