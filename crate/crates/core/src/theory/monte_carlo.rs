//! Monte-Carlo estimate of the first-layer activation energy.
//!
//! The estimator is split into fixed-size shards. Shard `s` draws its inputs
//! from stream `s + 1` of the configured seed (stream 0 builds the network),
//! shards run in parallel and their partial sums are added in shard order,
//! so the result does not depend on the thread count.

use rayon::prelude::*;

use super::TheoryParams;
use crate::error::{Error, Result};
use crate::nn::{init_network, Activation, InitMode, Mask, MaskedNetwork};
use crate::numerics::{gaussian_matrix, Matrix, Rng};

pub const SHARD_SAMPLES: usize = 250;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    /// Hidden width `N`.
    pub width: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            width: 4096,
            n_samples: 2000,
            seed: 0,
        }
    }
}

/// Single-hidden-layer ReLU network `d → width → 1` with theory-mode init,
/// whose first layer has had `k` rounds of smallest-magnitude pruning at
/// rate `p` (floor of `p` times the remaining count each round).
pub fn theory_network(params: &TheoryParams, width: usize, seed: u64) -> Result<MaskedNetwork> {
    params.validate()?;
    if width == 0 {
        return Err(Error::invalid("width must be at least 1"));
    }
    let mut net = init_network(
        &mut Rng::stream(seed, 0),
        &[params.d, width, 1],
        Activation::Relu,
        InitMode::Theory {
            sigma_w: params.sigma_w,
        },
    )?;
    let weights = net.layer(0).weights().as_slice().to_vec();
    let mut bits = vec![true; weights.len()];
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        weights[a]
            .abs()
            .total_cmp(&weights[b].abs())
            .then(a.cmp(&b))
    });
    // Magnitudes of survivors never change, so pruning k rounds removes a
    // growing prefix of the same ascending order.
    let mut pruned = 0usize;
    for _ in 0..params.k {
        let active = weights.len() - pruned;
        pruned += (params.p * active as f64).floor() as usize;
    }
    for &i in &order[..pruned] {
        bits[i] = false;
    }
    net.set_mask(0, Mask::from_bits(width, params.d, bits)?)?;
    Ok(net)
}

fn shard_inputs(params: &TheoryParams, cfg: &McConfig, shard: usize) -> Matrix {
    let start = shard * SHARD_SAMPLES;
    let rows = SHARD_SAMPLES.min(cfg.n_samples - start);
    gaussian_matrix(
        &mut Rng::stream(cfg.seed, shard as u64 + 1),
        rows,
        params.d,
        params.sigma_x,
    )
}

fn shard_count(cfg: &McConfig) -> usize {
    cfg.n_samples.div_ceil(SHARD_SAMPLES)
}

/// All Monte-Carlo inputs, shard by shard, as one matrix.
pub fn mc_inputs(params: &TheoryParams, cfg: &McConfig) -> Matrix {
    let mut data = Vec::with_capacity(cfg.n_samples * params.d);
    for s in 0..shard_count(cfg) {
        data.extend(shard_inputs(params, cfg, s).into_vec());
    }
    Matrix::from_vec(cfg.n_samples, params.d, data).expect("shard sizes add up")
}

/// Estimate of `E_AA(H) = E_X[(1/N) Σ_i h_i(X)²]` for the pruned theory
/// network.
pub fn mc_activation_energy(params: &TheoryParams, cfg: &McConfig) -> Result<f64> {
    if cfg.n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let net = theory_network(params, cfg.width, cfg.seed)?;
    let layer = net.layer(0);
    let w = layer.weights();
    let b = layer.biases();
    let partial: Vec<f64> = (0..shard_count(cfg))
        .into_par_iter()
        .map(|s| {
            let x = shard_inputs(params, cfg, s);
            let mut sum = 0.0;
            for r in 0..x.rows() {
                let xr = x.row(r);
                let mut row_energy = 0.0;
                for (unit, &bias) in b.iter().enumerate() {
                    let z: f64 = bias + w.row(unit).iter().zip(xr).map(|(a, c)| a * c).sum::<f64>();
                    if z > 0.0 {
                        row_energy += z * z;
                    }
                }
                sum += row_energy / cfg.width as f64;
            }
            sum
        })
        .collect();
    Ok(partial.iter().sum::<f64>() / cfg.n_samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::{measure_eaa, thm1_lower_bound};

    fn params(k: u32, sigma_w: f64) -> TheoryParams {
        TheoryParams {
            sigma_x: 1.0,
            sigma_w,
            d: 10,
            p: 0.2,
            k,
            depth: 1,
            target_energy: 1.0,
            gamma_const: 1.0,
        }
    }

    #[test]
    fn pruning_fraction_follows_floor_rule() {
        let net = theory_network(&params(3, 1.0), 100, 1).unwrap();
        // 1000 -> 800 -> 640 -> 512
        assert_eq!(net.layer(0).mask().active_count(), 512);
        // The survivors are the largest magnitudes.
        let w = net.layer(0).weights().as_slice();
        let min_kept = w
            .iter()
            .filter(|v| **v != 0.0)
            .map(|v| v.abs())
            .fold(f64::INFINITY, f64::min);
        let net0 = theory_network(&params(0, 1.0), 100, 1).unwrap();
        let dropped_max = net0
            .layer(0)
            .weights()
            .as_slice()
            .iter()
            .zip(net.layer(0).mask().bits())
            .filter(|(_, &keep)| !keep)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max);
        assert!(dropped_max <= min_kept);
    }

    #[test]
    fn zero_sigma_w_gives_zero_energy() {
        // sigma_w must be positive for the bound, so check the network path directly.
        let mut net = theory_network(&params(0, 1.0), 16, 2).unwrap();
        net.set_weights(0, Matrix::zeros(16, 10)).unwrap();
        net.set_biases(0, vec![0.0; 16]).unwrap();
        let x = mc_inputs(
            &params(0, 1.0),
            &McConfig {
                width: 16,
                n_samples: 300,
                seed: 2,
            },
        );
        assert_eq!(measure_eaa(&net, &x, 0).unwrap(), 0.0);
    }

    #[test]
    fn matches_measure_eaa_on_same_inputs() {
        let p = params(2, 0.7);
        let cfg = McConfig {
            width: 64,
            n_samples: 600,
            seed: 5,
        };
        let net = theory_network(&p, cfg.width, cfg.seed).unwrap();
        let direct = measure_eaa(&net, &mc_inputs(&p, &cfg), 0).unwrap();
        let mc = mc_activation_energy(&p, &cfg).unwrap();
        assert!(((direct - mc) / mc).abs() < 1e-12, "{direct} vs {mc}");
    }

    #[test]
    fn unpruned_energy_respects_bound() {
        let cfg = McConfig {
            width: 4096,
            n_samples: 2000,
            seed: 1,
        };
        let e = mc_activation_energy(&params(0, 1.0), &cfg).unwrap();
        assert!(4.0 * e >= 11.0 * 0.95, "{e}");
    }

    #[test]
    fn energy_decreases_with_pruning() {
        let cfg = McConfig {
            width: 512,
            n_samples: 500,
            seed: 3,
        };
        let es: Vec<f64> = (0..=10)
            .map(|k| mc_activation_energy(&params(k, 1.0), &cfg).unwrap())
            .collect();
        assert!(es.windows(2).all(|w| w[1] < w[0]), "{es:?}");
        assert!(4.0 * es[10] >= 0.95 * thm1_lower_bound(&params(10, 1.0)).unwrap());
    }
}
