use super::MaskedNetwork;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// The input batch.
    pub inputs: Matrix,
    /// Pre-activations per layer; the last entry holds the logits.
    pub pre: Vec<Matrix>,
    /// Post-activations of the hidden layers.
    pub post: Vec<Matrix>,
    /// Softmax output probabilities.
    pub probs: Matrix,
}

impl ForwardTrace {
    pub fn logits(&self) -> &Matrix {
        self.pre.last().expect("at least one layer")
    }

    /// Input to layer `j`: the batch for `j = 0`, else hidden output `j - 1`.
    pub fn layer_input(&self, j: usize) -> &Matrix {
        if j == 0 {
            &self.inputs
        } else {
            &self.post[j - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &MaskedNetwork) -> Self {
        Self {
            weights: net
                .layers()
                .iter()
                .map(|l| Matrix::zeros(l.fan_out(), l.fan_in()))
                .collect(),
            biases: net
                .layers()
                .iter()
                .map(|l| vec![0.0; l.fan_out()])
                .collect(),
        }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &Gradients, factor: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += factor * y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += factor * y;
            }
        }
    }
}

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

pub fn forward(net: &MaskedNetwork, batch: &Matrix) -> Result<ForwardTrace> {
    if batch.cols() != net.input_dim() {
        return Err(Error::shape(format!(
            "batch has {} columns, network expects {}",
            batch.cols(),
            net.input_dim()
        )));
    }
    let act = net.activation();
    let last = net.num_layers() - 1;
    let mut pre = Vec::with_capacity(net.num_layers());
    let mut post = Vec::with_capacity(last);
    for (j, layer) in net.layers().iter().enumerate() {
        let input = if j == 0 { batch } else { &post[j - 1] };
        let mut z = input.matmul_bt(layer.weights())?;
        if layer.has_bias() {
            z.add_row_vector(layer.biases())?;
        }
        if j < last {
            post.push(z.map(|v| act.apply(v)));
        }
        pre.push(z);
    }
    let probs = softmax_rows(pre.last().expect("at least one layer"));
    Ok(ForwardTrace {
        inputs: batch.clone(),
        pre,
        post,
        probs,
    })
}

fn check_labels(labels: &[usize], classes: usize, rows: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::shape(format!(
            "{} labels for {rows} rows",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::invalid(format!(
            "label {bad} outside [0, {classes})"
        )));
    }
    Ok(())
}

/// Summed cross-entropy from logits via log-sum-exp.
pub(crate) fn cross_entropy_sum(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    check_labels(labels, logits.cols(), logits.rows())?;
    let mut total = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    Ok(total)
}

/// Mean cross-entropy over the batch and its gradient with respect to every
/// weight and bias. Gradients at masked positions are zero.
pub fn loss_and_backward(
    net: &MaskedNetwork,
    trace: &ForwardTrace,
    labels: &[usize],
) -> Result<(f64, Gradients)> {
    let batch = trace.probs.rows();
    if batch == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let loss = cross_entropy_sum(trace.logits(), labels)? / batch as f64;

    // d loss / d logits = (a - y) / B
    let inv_b = 1.0 / batch as f64;
    let mut delta = trace.probs.clone();
    for (r, &y) in labels.iter().enumerate() {
        let row = delta.row_mut(r);
        row[y] -= 1.0;
        row.iter_mut().for_each(|v| *v *= inv_b);
    }

    let act = net.activation();
    let n_layers = net.num_layers();
    let mut grad_w = vec![Matrix::zeros(0, 0); n_layers];
    let mut grad_b = vec![Vec::new(); n_layers];
    for j in (0..n_layers).rev() {
        let layer = net.layer(j);
        let mut gw = delta.matmul_at(trace.layer_input(j))?;
        for (g, &keep) in gw.as_mut_slice().iter_mut().zip(layer.mask().bits()) {
            if !keep {
                *g = 0.0;
            }
        }
        grad_w[j] = gw;
        grad_b[j] = if layer.has_bias() {
            delta.column_sums()
        } else {
            vec![0.0; layer.fan_out()]
        };
        if j > 0 {
            let mut upstream = delta.matmul(layer.weights())?;
            let z = &trace.pre[j - 1];
            for (u, &zv) in upstream.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *u *= act.derivative(zv);
            }
            delta = upstream;
        }
    }
    Ok((
        loss,
        Gradients {
            weights: grad_w,
            biases: grad_b,
        },
    ))
}
