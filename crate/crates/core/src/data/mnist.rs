//! MNIST IDX files (big-endian). Paths ending in `.gz` are decompressed on
//! the fly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(file).read_to_end(&mut buf)?;
    } else {
        let mut file = file;
        file.read_to_end(&mut buf)?;
    }
    Ok(buf)
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(path, "truncated header"))
}

/// Loads an IDX image/label pair. Pixels are scaled by 1/255.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = read_bytes(images_path)?;
    let labels = read_bytes(labels_path)?;

    let magic = be_u32(&images, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(format_err(
            images_path,
            format!("image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        ));
    }
    let n = be_u32(&images, 4, images_path)? as usize;
    let rows = be_u32(&images, 8, images_path)? as usize;
    let cols = be_u32(&images, 12, images_path)? as usize;
    let d = rows * cols;
    let body = &images[16..];
    if body.len() < n * d {
        return Err(format_err(
            images_path,
            format!(
                "truncated: {} pixel bytes for {n} images of {d}",
                body.len()
            ),
        ));
    }

    let magic = be_u32(&labels, 0, labels_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(format_err(
            labels_path,
            format!("label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        ));
    }
    let n_labels = be_u32(&labels, 4, labels_path)? as usize;
    if n_labels != n {
        return Err(format_err(
            labels_path,
            format!("{n_labels} labels for {n} images"),
        ));
    }
    let label_body = &labels[8..];
    if label_body.len() < n {
        return Err(format_err(
            labels_path,
            format!("truncated: {} label bytes for {n} labels", label_body.len()),
        ));
    }

    let features: Vec<f64> = body[..n * d].iter().map(|&p| p as f64 / 255.0).collect();
    let label_vec: Vec<usize> = label_body[..n].iter().map(|&l| l as usize).collect();
    if let Some(bad) = label_vec.iter().find(|&&l| l > 9) {
        return Err(format_err(labels_path, format!("label {bad} > 9")));
    }
    Dataset::new(Matrix::from_vec(n, d, features)?, label_vec, 10)
}

/// Writes an uncompressed IDX pair. `pixels` holds n·rows·cols bytes.
pub fn write_mnist_idx(
    images_path: &Path,
    labels_path: &Path,
    rows: usize,
    cols: usize,
    pixels: &[u8],
    labels: &[u8],
) -> Result<()> {
    let n = labels.len();
    if pixels.len() != n * rows * cols {
        return Err(Error::shape(format!(
            "{} pixel bytes for {n} images of {rows}x{cols}",
            pixels.len()
        )));
    }
    let mut f = File::create(images_path)?;
    for v in [IDX_IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        f.write_all(&v.to_be_bytes())?;
    }
    f.write_all(pixels)?;
    let mut f = File::create(labels_path)?;
    for v in [IDX_LABELS_MAGIC, n as u32] {
        f.write_all(&v.to_be_bytes())?;
    }
    f.write_all(labels)?;
    Ok(())
}
