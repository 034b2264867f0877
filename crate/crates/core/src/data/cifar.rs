//! CIFAR-10 binary batches: records of one label byte followed by 3072
//! channel-major pixel bytes.

use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const CIFAR_RECORD_BYTES: usize = 3073;
const PIXELS: usize = CIFAR_RECORD_BYTES - 1;

pub fn load_cifar10_bin(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    let fail = |msg: String| Error::Format {
        path: path.display().to_string(),
        msg,
    };
    if bytes.len() % CIFAR_RECORD_BYTES != 0 {
        return Err(fail(format!(
            "length {} is not a multiple of {CIFAR_RECORD_BYTES}",
            bytes.len()
        )));
    }
    let n = bytes.len() / CIFAR_RECORD_BYTES;
    let mut features = Vec::with_capacity(n * PIXELS);
    let mut labels = Vec::with_capacity(n);
    for (i, record) in bytes.chunks_exact(CIFAR_RECORD_BYTES).enumerate() {
        if record[0] > 9 {
            return Err(fail(format!("record {i} has label byte {}", record[0])));
        }
        labels.push(record[0] as usize);
        features.extend(record[1..].iter().map(|&p| p as f64 / 255.0));
    }
    Dataset::new(Matrix::from_vec(n, PIXELS, features)?, labels, 10)
}
