//! Histograms and summary statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSummary {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: u64,
}

/// Sturges' rule: `1 + ceil(log2 n)`.
pub fn sturges_bin_count(n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::invalid("Sturges bin count of an empty sample"));
    }
    // ceil(log2 n) computed exactly on integers.
    let ceil_log2 = (usize::BITS - (n - 1).leading_zeros()) as usize;
    Ok(1 + if n == 1 { 0 } else { ceil_log2 })
}

/// Population mean and standard deviation (two-pass).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Equal-width histogram over `[min, max]`; the maximum lands in the last bin.
///
/// Constant data get a unit-width bin centred on the value so the edges stay
/// strictly ascending.
pub fn build_histogram(values: &[f64], bins: usize) -> Result<HistogramSummary> {
    if values.is_empty() {
        return Err(Error::invalid("histogram of an empty sample"));
    }
    if bins == 0 {
        return Err(Error::invalid("histogram with zero bins"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("histogram of non-finite values"));
    }
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut bin_edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    bin_edges.push(hi);

    let mut counts = vec![0u64; bins];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let (mean, std) = mean_std(values);
    Ok(HistogramSummary {
        bin_edges,
        counts,
        mean,
        std,
        n: values.len() as u64,
    })
}
