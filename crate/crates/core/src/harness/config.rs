//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    load_cifar10_bin, load_mnist_idx, make_synthetic_gaussian, split_dataset, Dataset, Split,
    SplitSpec,
};
use crate::error::{Error, Result};
use crate::nn::{Activation, OptimizerSpec};
use crate::numerics::{Matrix, Rng};
use crate::pruning::{PruneMethod, PruneRunConfig};
use crate::schedules::ScheduleSpec;

fn default_sigma_x() -> f64 {
    1.0
}

/// Where the samples come from. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Synthetic {
        n: usize,
        d: usize,
        classes: usize,
        #[serde(default = "default_sigma_x")]
        sigma_x: f64,
        #[serde(default)]
        seed: u64,
    },
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        /// Keep only the first `limit` samples.
        #[serde(default)]
        limit: Option<usize>,
    },
    Cifar10 {
        files: Vec<PathBuf>,
        #[serde(default)]
        limit: Option<usize>,
    },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Dataset> {
        let ds = match self {
            DatasetSpec::Synthetic {
                n,
                d,
                classes,
                sigma_x,
                seed,
            } => return make_synthetic_gaussian(&mut Rng::new(*seed), *n, *d, *classes, *sigma_x),
            DatasetSpec::Mnist { images, labels, .. } => load_mnist_idx(images, labels)?,
            DatasetSpec::Cifar10 { files, .. } => {
                let parts = files
                    .iter()
                    .map(|f| load_cifar10_bin(f))
                    .collect::<Result<Vec<_>>>()?;
                concat(&parts)?
            }
        };
        Ok(match self.limit() {
            Some(n) if n < ds.len() => ds.head(n),
            _ => ds,
        })
    }

    fn limit(&self) -> Option<usize> {
        match self {
            DatasetSpec::Synthetic { .. } => None,
            DatasetSpec::Mnist { limit, .. } | DatasetSpec::Cifar10 { limit, .. } => *limit,
        }
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            DatasetSpec::Synthetic { .. } => {}
            DatasetSpec::Mnist { images, labels, .. } => {
                fix(images);
                fix(labels);
            }
            DatasetSpec::Cifar10 { files, .. } => files.iter_mut().for_each(fix),
        }
    }
}

fn concat(parts: &[Dataset]) -> Result<Dataset> {
    let first = parts
        .first()
        .ok_or_else(|| Error::config("cifar10 needs at least one file"))?;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for p in parts {
        data.extend_from_slice(p.features.as_slice());
        labels.extend_from_slice(&p.labels);
    }
    Dataset::new(
        Matrix::from_vec(labels.len(), first.dim(), data)?,
        labels,
        first.num_classes,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

fn default_batch_size() -> usize {
    128
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSpec {
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_patience")]
    pub patience: Option<usize>,
    #[serde(default)]
    pub restore_best: bool,
}

fn default_patience() -> Option<usize> {
    Some(10)
}

fn default_score_samples() -> usize {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneSpec {
    pub method: PruneMethod,
    pub rate: f64,
    pub cycles: u32,
    #[serde(default)]
    pub imp: bool,
    #[serde(default)]
    pub rewind_epoch: Option<usize>,
    #[serde(default = "default_score_samples")]
    pub score_samples: usize,
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub split: SplitSpec,
    pub arch: ArchSpec,
    pub optimizer: OptimizerSpec,
    pub schedule: ScheduleSpec,
    pub training: TrainingSpec,
    pub prune: PruneSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads and validates a config file, resolving relative data paths
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.dataset.resolve(base);
        if let Some(out) = cfg.output_dir.as_mut() {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        if let DatasetSpec::Synthetic { n, d, classes, .. } = self.dataset {
            if n == 0 || d == 0 || classes == 0 {
                return Err(Error::config("synthetic n, d and classes must be positive"));
            }
        }
        self.prune_config().validate()
    }

    pub fn prune_config(&self) -> PruneRunConfig {
        PruneRunConfig {
            hidden: self.arch.hidden.clone(),
            activation: self.arch.activation,
            optimizer: self.optimizer,
            schedule: self.schedule.clone(),
            method: self.prune.method,
            rate: self.prune.rate,
            cycles: self.prune.cycles,
            epochs: self.training.epochs,
            batch_size: self.training.batch_size,
            patience: self.training.patience,
            restore_best: self.training.restore_best,
            imp: self.prune.imp,
            rewind_epoch: self.prune.rewind_epoch,
            score_samples: self.prune.score_samples,
            seed: self.seed,
        }
    }

    /// Loads the dataset and splits it.
    pub fn load_split(&self) -> Result<Split> {
        let ds = self.dataset.load()?;
        let split = split_dataset(&ds, &self.split)?;
        if split.train.is_empty() || split.val.is_empty() || split.test.is_empty() {
            return Err(Error::config(format!(
                "{} samples leave an empty train, validation or test set",
                ds.len()
            )));
        }
        Ok(split)
    }
}
