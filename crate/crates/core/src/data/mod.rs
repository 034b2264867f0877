//! Datasets: IDX/CIFAR loaders, synthetic Gaussian data, splits and
//! deterministic mini-batching.

mod batches;
mod cifar;
mod mnist;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gaussian_matrix, Matrix, Rng};

pub use batches::{iterate_batches, BatchIter};
pub use cifar::{load_cifar10_bin, CIFAR_RECORD_BYTES};
pub use mnist::{load_mnist_idx, write_mnist_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// First `n` rows (or all of them if fewer).
    pub fn head(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }
}

/// Fractions for a train/validation/test split; the test set takes the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub shuffle_seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            val_fraction: 0.1,
            shuffle_seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |f: f64| f > 0.0 && f < 1.0;
        if !ok(self.train_fraction)
            || !ok(self.val_fraction)
            || self.train_fraction + self.val_fraction >= 1.0
        {
            return Err(Error::config(format!(
                "split fractions train={} val={} must lie in (0,1) and sum below 1",
                self.train_fraction, self.val_fraction
            )));
        }
        Ok(())
    }

    /// Index sets for (train, val, test). Sizes are floor(fraction·n) for
    /// train and val, and the remainder for test.
    pub fn indices(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        self.validate()?;
        let perm = Rng::new(self.shuffle_seed).permutation(n);
        let n_train = (self.train_fraction * n as f64).floor() as usize;
        let n_val = (self.val_fraction * n as f64).floor() as usize;
        let train = perm[..n_train].to_vec();
        let val = perm[n_train..n_train + n_val].to_vec();
        let test = perm[n_train + n_val..].to_vec();
        Ok((train, val, test))
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

pub fn split_dataset(ds: &Dataset, spec: &SplitSpec) -> Result<Split> {
    let (train, val, test) = spec.indices(ds.len())?;
    Ok(Split {
        train: ds.subset(&train),
        val: ds.subset(&val),
        test: ds.subset(&test),
    })
}

/// Gaussian features with labels from a fixed random linear rule.
///
/// Features are i.i.d. N(0, sigma_x²). A `classes × d` matrix of standard
/// normal directions is drawn first from the same generator; each sample's
/// label is the argmax of its scores against those directions (ties go to
/// the lowest class).
pub fn make_synthetic_gaussian(
    rng: &mut Rng,
    n: usize,
    d: usize,
    classes: usize,
    sigma_x: f64,
) -> Result<Dataset> {
    if n == 0 || d == 0 || classes == 0 {
        return Err(Error::invalid("synthetic dataset needs n, d, classes >= 1"));
    }
    let directions = gaussian_matrix(rng, classes, d, 1.0);
    let features = gaussian_matrix(rng, n, d, sigma_x);
    let scores = features.matmul_bt(&directions)?;
    let labels = scores.argmax_rows();
    Dataset::new(features, labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    #[test]
    fn synthetic_zero_sigma() {
        let ds = make_synthetic_gaussian(&mut Rng::new(1), 20, 3, 4, 0.0).unwrap();
        assert!(ds.features.as_slice().iter().all(|&v| v == 0.0));
        assert!(ds.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn synthetic_deterministic() {
        let a = make_synthetic_gaussian(&mut Rng::new(9), 50, 4, 3, 1.0).unwrap();
        let b = make_synthetic_gaussian(&mut Rng::new(9), 50, 4, 3, 1.0).unwrap();
        assert_eq!(a, b);
        // More than one class appears.
        assert!(a.labels.iter().any(|&l| l != a.labels[0]));
    }

    #[test]
    fn synthetic_feature_std() {
        let ds = make_synthetic_gaussian(&mut Rng::new(4), 100_000, 3, 2, 1.0).unwrap();
        for c in 0..3 {
            let col: Vec<f64> = (0..ds.len()).map(|r| ds.features.get(r, c)).collect();
            let (_, std) = crate::numerics::mean_std(&col);
            assert!((0.99..=1.01).contains(&std), "col {c} std {std}");
        }
    }

    #[test]
    fn synthetic_rejects_empty_shapes() {
        assert!(make_synthetic_gaussian(&mut Rng::new(0), 0, 1, 1, 1.0).is_err());
        assert!(make_synthetic_gaussian(&mut Rng::new(0), 1, 0, 1, 1.0).is_err());
        assert!(make_synthetic_gaussian(&mut Rng::new(0), 1, 1, 0, 1.0).is_err());
    }

    #[test]
    fn dataset_rejects_bad_labels() {
        assert!(Dataset::new(Matrix::zeros(2, 1), vec![0, 3], 3).is_err());
        assert!(Dataset::new(Matrix::zeros(2, 1), vec![0], 3).is_err());
    }

    #[test]
    fn split_validation() {
        let bad = SplitSpec {
            train_fraction: 0.7,
            val_fraction: 0.3,
            shuffle_seed: 0,
        };
        assert!(bad.validate().is_err());
        assert!(SplitSpec::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 0usize..500, tf in 0.05f64..0.8, vf in 0.05f64..0.15, seed in any::<u64>()) {
            let spec = SplitSpec { train_fraction: tf, val_fraction: vf, shuffle_seed: seed };
            let (a, b, c) = spec.indices(n).unwrap();
            let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(spec.indices(n).unwrap(), (a, b, c));
        }
    }
}
