//! The iterative prune / freeze / retrain loop.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::train::{train_cycle, TrainSettings};
use super::{
    gradient_distribution, lambda_of, prune_network, prune_neurons_l1, rewind_to, score_weights,
    PruneMethod, Snapshot,
};
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::nn::{init_network, Activation, InitMode, MaskedNetwork, OptimizerSpec};
use crate::numerics::{mix_seed, HistogramSummary, Rng};
use crate::schedules::ScheduleSpec;

/// Column order of `cycles.csv`.
pub const CYCLE_CSV_HEADER: &str =
    "cycle,lambda_percent,max_lr,epochs_run,best_val_acc,test_acc,train_loss,grad_std,hidden_std,ewg";

fn default_batch_size() -> usize {
    128
}

fn default_patience() -> Option<usize> {
    Some(10)
}

fn default_score_samples() -> usize {
    1024
}

/// Everything the pruning loop needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneRunConfig {
    /// Hidden layer widths; input and output sizes come from the data.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub optimizer: OptimizerSpec,
    pub schedule: ScheduleSpec,
    pub method: PruneMethod,
    /// Fraction of the remaining weights (or neurons) pruned per cycle.
    pub rate: f64,
    /// Number of pruning events `L`; the run has `L + 1` training cycles.
    pub cycles: u32,
    /// Maximum training epochs per cycle.
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Early-stopping patience in epochs; `None` trains every epoch.
    #[serde(default = "default_patience")]
    pub patience: Option<usize>,
    /// Continue from the best-validation weights of each cycle instead of
    /// the final ones.
    #[serde(default)]
    pub restore_best: bool,
    /// Rewind surviving weights to a snapshot from the first cycle after
    /// every pruning step. Otherwise retraining continues from the trained
    /// weights with only the schedule rewound.
    #[serde(default)]
    pub imp: bool,
    /// Epoch of cycle 0 whose weights are the rewind target. Defaults to
    /// `min(6, epochs)`.
    #[serde(default)]
    pub rewind_epoch: Option<usize>,
    /// Rows of the training set used for gradient-based pruning scores.
    #[serde(default = "default_score_samples")]
    pub score_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl PruneRunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(Error::config(format!(
                "pruning rate {} must lie in (0, 1)",
                self.rate
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        if self.score_samples == 0 {
            return Err(Error::config("score_samples must be positive"));
        }
        if let Some(e) = self.rewind_epoch {
            if e > self.epochs {
                return Err(Error::config("rewind_epoch exceeds epochs"));
            }
        }
        if let PruneMethod::GlobalGradient {
            gradient_batch_size: 0,
        } = self.method
        {
            return Err(Error::config("gradient_batch_size must be positive"));
        }
        self.train_settings().validate()
    }

    pub fn train_settings(&self) -> TrainSettings {
        TrainSettings {
            optimizer: self.optimizer,
            schedule: self.schedule.clone(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            patience: self.patience,
            restore_best: self.restore_best,
            seed: mix_seed(self.seed, 1),
        }
    }

    pub fn effective_rewind_epoch(&self) -> usize {
        self.rewind_epoch.unwrap_or(self.epochs.min(6))
    }

    pub fn layer_sizes(&self, data: &Dataset) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(data.dim());
        sizes.extend(&self.hidden);
        sizes.push(data.num_classes);
        sizes
    }

    /// The dense starting network.
    pub fn initial_network(&self, data: &Dataset) -> Result<MaskedNetwork> {
        init_network(
            &mut Rng::stream(self.seed, 0),
            &self.layer_sizes(data),
            self.activation,
            InitMode::Training,
        )
    }
}

/// One training cycle of a pruning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycle: u32,
    pub lambda_percent: f64,
    pub max_lr: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Percent.
    pub best_val_acc: f64,
    /// Percent, at the best validation epoch.
    pub test_acc: f64,
    pub train_loss: f64,
    pub grad: HistogramSummary,
    pub hidden: HistogramSummary,
    /// Mean of the per-epoch weight-change energies of this cycle.
    pub ewg: f64,
    pub ewg_per_epoch: Vec<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub cycles: Vec<CycleReport>,
}

impl RunReport {
    /// `cycles.csv` contents, header included.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CYCLE_CSV_HEADER);
        s.push('\n');
        for c in &self.cycles {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                c.cycle,
                c.lambda_percent,
                c.max_lr,
                c.epochs_run,
                c.best_val_acc,
                c.test_acc,
                c.train_loss,
                c.grad.std,
                c.hidden.std,
                c.ewg
            )
            .expect("writing to a String cannot fail");
        }
        s
    }
}

/// Prunes the network for cycle `m > 0` and applies the rewind, if any.
pub(crate) fn prune_for_cycle(
    net: &mut MaskedNetwork,
    config: &PruneRunConfig,
    scoring: &Dataset,
    rewind: Option<&Snapshot>,
) -> Result<()> {
    match config.method {
        PruneMethod::L1Neuron => {
            prune_neurons_l1(net, config.rate)?;
        }
        method => {
            let scores = score_weights(net, method, Some(scoring))?;
            prune_network(net, &scores, config.rate)?;
        }
    }
    if let Some(snapshot) = rewind {
        rewind_to(net, snapshot)?;
    }
    Ok(())
}

/// Runs cycle 0 (dense training) followed by `config.cycles` rounds of
/// prune, optional rewind, and retrain. `observer` sees each finished cycle
/// together with its trained network. Gradient and hidden-representation
/// distributions are measured on the validation split.
pub fn run_iterative_pruning(
    config: &PruneRunConfig,
    split: &Split,
    observer: &mut dyn FnMut(&CycleReport, &MaskedNetwork) -> Result<()>,
) -> Result<RunReport> {
    config.validate()?;
    let mut net = config.initial_network(&split.train)?;
    let scoring = split.train.head(config.score_samples);
    let settings = config.train_settings();
    let rewind_epoch = config.effective_rewind_epoch();
    // Falls back to the initial weights if cycle 0 stops before the rewind epoch.
    let mut snapshot = config.imp.then(|| Snapshot::take(&net));

    let mut report = RunReport { cycles: Vec::new() };
    for m in 0..=config.cycles {
        if m > 0 {
            prune_for_cycle(&mut net, config, &scoring, snapshot.as_ref())?;
        }
        let lambda = lambda_of(&net);
        let mut hook = |epoch: usize, n: &MaskedNetwork| {
            if m == 0 && epoch == rewind_epoch {
                if let Some(s) = snapshot.as_mut() {
                    *s = Snapshot::take(n);
                }
            }
        };
        let t = train_cycle(&mut net, split, m, &settings, &mut hook)?;
        let (grad, hidden) = gradient_distribution(&net, &split.val, config.batch_size)?;
        let ewg = if t.ewg_per_epoch.is_empty() {
            0.0
        } else {
            t.ewg_per_epoch.iter().sum::<f64>() / t.ewg_per_epoch.len() as f64
        };
        let cycle = CycleReport {
            cycle: m,
            lambda_percent: lambda,
            max_lr: config.schedule.max_lr(m),
            epochs_run: t.epochs_run,
            best_epoch: t.best_epoch,
            best_val_acc: t.best_val_acc,
            test_acc: t.test_acc,
            train_loss: t.train_loss,
            grad,
            hidden,
            ewg,
            ewg_per_epoch: t.ewg_per_epoch,
            diverged: t.diverged,
        };
        observer(&cycle, &net)?;
        report.cycles.push(cycle);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic_gaussian, split_dataset, SplitSpec};

    fn split() -> Split {
        let ds = make_synthetic_gaussian(&mut Rng::new(21), 500, 8, 3, 1.0).unwrap();
        split_dataset(&ds, &SplitSpec::default()).unwrap()
    }

    fn config(cycles: u32) -> PruneRunConfig {
        PruneRunConfig {
            hidden: vec![24, 24],
            activation: Activation::Relu,
            optimizer: OptimizerSpec::sgd_momentum(),
            schedule: ScheduleSpec::Constant { lr: 0.05 },
            method: PruneMethod::GlobalMagnitude,
            rate: 0.2,
            cycles,
            epochs: 4,
            batch_size: 32,
            patience: Some(10),
            restore_best: false,
            imp: false,
            rewind_epoch: None,
            score_samples: 200,
            seed: 3,
        }
    }

    #[test]
    fn zero_cycles_is_dense_training() {
        let r = run_iterative_pruning(&config(0), &split(), &mut |_, _| Ok(())).unwrap();
        assert_eq!(r.cycles.len(), 1);
        assert_eq!(r.cycles[0].lambda_percent, 100.0);
    }

    #[test]
    fn lambda_follows_closed_form() {
        let cfg = config(6);
        let total = (8 * 24 + 24 * 24 + 24 * 3) as f64;
        let mut frozen_ok = true;
        let r = run_iterative_pruning(&cfg, &split(), &mut |_, net| {
            frozen_ok &= net.masked_weights_are_zero();
            Ok(())
        })
        .unwrap();
        assert!(frozen_ok);
        for (m, c) in r.cycles.iter().enumerate() {
            let expected = 100.0 * 0.8f64.powi(m as i32);
            assert!((c.lambda_percent - expected).abs() <= 100.0 * cfg.cycles as f64 / total);
        }
        assert!(r
            .cycles
            .windows(2)
            .all(|w| w[1].lambda_percent < w[0].lambda_percent));
    }

    #[test]
    fn deterministic_reports() {
        let mut cfg = config(2);
        cfg.imp = true;
        let a = run_iterative_pruning(&cfg, &split(), &mut |_, _| Ok(())).unwrap();
        let b = run_iterative_pruning(&cfg, &split(), &mut |_, _| Ok(())).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a, b);
    }

    #[test]
    fn every_method_runs() {
        for method in [
            PruneMethod::LayerMagnitude,
            PruneMethod::GlobalGradient {
                gradient_batch_size: 64,
            },
            PruneMethod::Lamp,
            PruneMethod::L1Neuron,
        ] {
            let cfg = PruneRunConfig {
                method,
                epochs: 2,
                ..config(2)
            };
            let r = run_iterative_pruning(&cfg, &split(), &mut |_, _| Ok(())).unwrap();
            assert_eq!(r.cycles.len(), 3);
            assert!(r.cycles[2].lambda_percent < 100.0, "{method:?}");
        }
    }

    #[test]
    fn rejects_bad_rate() {
        let cfg = PruneRunConfig {
            rate: 0.0,
            ..config(1)
        };
        assert!(run_iterative_pruning(&cfg, &split(), &mut |_, _| Ok(())).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let r = run_iterative_pruning(&config(1), &split(), &mut |_, _| Ok(())).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CYCLE_CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 10));
    }
}
