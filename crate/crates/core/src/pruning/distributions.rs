//! Weight-gradient and hidden-representation distributions of a network.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{forward, loss_and_backward, Gradients, MaskedNetwork};
use crate::numerics::{build_histogram, sturges_bin_count, HistogramSummary};

const CHUNK: usize = 512;

/// Mean loss gradient over every row of `data`, accumulated in chunks.
pub fn mean_gradient(net: &MaskedNetwork, data: &Dataset) -> Result<Gradients> {
    if data.is_empty() {
        return Err(Error::invalid("cannot average a gradient over no samples"));
    }
    let mut total = Gradients::zeros_like(net);
    let n = data.len();
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let x = data.features.select_rows(&idx);
        let trace = forward(net, &x)?;
        let (_, g) = loss_and_backward(net, &trace, &data.labels[start..end])?;
        total.add_scaled(&g, (end - start) as f64 / n as f64);
    }
    Ok(total)
}

/// Histograms of (a) the weight gradients of consecutive mini-batches of
/// `scoring`, pooled over every batch and every weight position (pruned
/// weights contribute zero), and (b) every hidden activation produced on
/// `scoring`. Both use Sturges bin counts.
pub fn gradient_distribution(
    net: &MaskedNetwork,
    scoring: &Dataset,
    batch_size: usize,
) -> Result<(HistogramSummary, HistogramSummary)> {
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be at least 1"));
    }
    if scoring.is_empty() {
        return Err(Error::invalid("cannot measure gradients over no samples"));
    }
    let n = scoring.len();
    let per_batch = net.total_weights();
    let mut grads = Vec::with_capacity(per_batch * n.div_ceil(batch_size));
    let mut hidden = Vec::new();
    for start in (0..n).step_by(batch_size) {
        let end = (start + batch_size).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let trace = forward(net, &scoring.features.select_rows(&idx))?;
        let (_, g) = loss_and_backward(net, &trace, &scoring.labels[start..end])?;
        for (layer, gw) in net.layers().iter().zip(&g.weights) {
            grads.extend(
                gw.as_slice()
                    .iter()
                    .zip(layer.mask().bits())
                    .map(|(v, &keep)| if keep { *v } else { 0.0 }),
            );
        }
        for h in &trace.post {
            hidden.extend_from_slice(h.as_slice());
        }
    }
    if hidden.is_empty() {
        return Err(Error::invalid("network has no hidden layers"));
    }

    let gh = build_histogram(&grads, sturges_bin_count(grads.len())?)?;
    let hh = build_histogram(&hidden, sturges_bin_count(hidden.len())?)?;
    Ok((gh, hh))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_synthetic_gaussian;
    use crate::nn::{init_network, Activation, InitMode, Mask};
    use crate::numerics::Rng;

    #[test]
    fn counts_cover_every_weight_of_every_batch() {
        let mut net = init_network(
            &mut Rng::new(4),
            &[5, 7, 6, 3],
            Activation::Relu,
            InitMode::Training,
        )
        .unwrap();
        let ds = make_synthetic_gaussian(&mut Rng::new(5), 1100, 5, 3, 1.0).unwrap();
        let (g, h) = gradient_distribution(&net, &ds, 128).unwrap();
        let total = net.total_weights() * 1100usize.div_ceil(128);
        assert_eq!(g.n as usize, total);
        assert_eq!(h.n, 1100 * (7 + 6));
        assert_eq!(g.counts.len(), sturges_bin_count(total).unwrap());
        assert!(g.std > 0.0 && h.std > 0.0);

        // With every weight pruned the pooled values are all zero.
        let before = g.std;
        for j in 0..net.layers().len() {
            let (r, c) = net.layers()[j].mask().shape();
            net.set_mask(j, Mask::from_bits(r, c, vec![false; r * c]).unwrap())
                .unwrap();
        }
        let (g, _) = gradient_distribution(&net, &ds, 128).unwrap();
        assert_eq!(g.n as usize, total);
        assert_eq!(g.std, 0.0);
        assert!(before > 0.0);
    }

    #[test]
    fn chunked_gradient_matches_full_batch() {
        let net = init_network(
            &mut Rng::new(6),
            &[4, 5, 2],
            Activation::Gelu,
            InitMode::Training,
        )
        .unwrap();
        let ds = make_synthetic_gaussian(&mut Rng::new(7), 1300, 4, 2, 1.0).unwrap();
        let chunked = mean_gradient(&net, &ds).unwrap();
        let trace = forward(&net, &ds.features).unwrap();
        let (_, full) = loss_and_backward(&net, &trace, &ds.labels).unwrap();
        for (a, b) in chunked.weights.iter().zip(&full.weights) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }
}
