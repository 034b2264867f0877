//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use silo::data::Dataset;
use silo::nn::{forward, loss_and_backward, Gradients, MaskedNetwork};
use silo::numerics::Matrix;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn config_path(name: &str) -> PathBuf {
    repo_root().join("configs").join(name)
}

/// Relative error `‖a - b‖ / max(‖a‖ + ‖b‖, tiny)` of two flat vectors.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm =
        a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / norm.max(1e-300)
}

fn loss(net: &MaskedNetwork, x: &Matrix, y: &[usize]) -> f64 {
    let trace = forward(net, x).expect("forward");
    loss_and_backward(net, &trace, y).expect("loss").0
}

/// Central finite-difference gradient of the mean loss, flattened as all
/// weights of every layer followed by all biases of every layer.
pub fn numeric_gradient(net: &MaskedNetwork, x: &Matrix, y: &[usize], h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for j in 0..net.num_layers() {
        let w = net.layer(j).weights().clone();
        for i in 0..w.len() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp.as_mut_slice()[i] += h;
            wm.as_mut_slice()[i] -= h;
            plus.set_weights(j, wp).unwrap();
            minus.set_weights(j, wm).unwrap();
            out.push((loss(&plus, x, y) - loss(&minus, x, y)) / (2.0 * h));
        }
    }
    for j in 0..net.num_layers() {
        let b = net.layer(j).biases().to_vec();
        for i in 0..b.len() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut bp = b.clone();
            let mut bm = b.clone();
            bp[i] += h;
            bm[i] -= h;
            plus.set_biases(j, bp).unwrap();
            minus.set_biases(j, bm).unwrap();
            out.push((loss(&plus, x, y) - loss(&minus, x, y)) / (2.0 * h));
        }
    }
    out
}

/// Same flattening as [`numeric_gradient`].
pub fn flatten(g: &Gradients) -> Vec<f64> {
    let mut out: Vec<f64> = g
        .weights
        .iter()
        .flat_map(|m| m.as_slice().to_vec())
        .collect();
    out.extend(g.biases.iter().flatten());
    out
}

/// The gradient of a batch as produced by backprop.
pub fn analytic_gradient(net: &MaskedNetwork, data: &Dataset) -> Vec<f64> {
    let trace = forward(net, &data.features).unwrap();
    flatten(&loss_and_backward(net, &trace, &data.labels).unwrap().1)
}

/// Last value below the first, and the 3-point moving average never rises.
pub fn narrowing_trend(values: &[f64]) -> bool {
    if values.len() < 3 {
        return false;
    }
    let ma: Vec<f64> = values
        .windows(3)
        .map(|w| (w[0] + w[1] + w[2]) / 3.0)
        .collect();
    values[values.len() - 1] < values[0] && ma.windows(2).all(|w| w[1] <= w[0])
}
