//! Training one pruning cycle, with early-stopping bookkeeping.

use serde::{Deserialize, Serialize};

use crate::data::{iterate_batches, Split};
use crate::error::{Error, Result};
use crate::nn::{
    evaluate, forward, loss_and_backward, MaskedNetwork, OptimizerSpec, OptimizerState,
};
use crate::numerics::mix_seed;
use crate::schedules::{ScheduleSpec, ScheduleState};
use crate::theory::measure_ewg;

/// Per-cycle training knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub optimizer: OptimizerSpec,
    pub schedule: ScheduleSpec,
    /// Maximum epochs per cycle.
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after this many epochs without a lower validation loss. `None`
    /// trains for all `epochs`.
    pub patience: Option<usize>,
    /// Leave the network at its best-validation epoch instead of its final
    /// epoch.
    pub restore_best: bool,
    /// Base seed for the mini-batch order.
    pub seed: u64,
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.schedule.validate()?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be at least 1"));
        }
        if self.patience == Some(0) {
            return Err(Error::config("patience must be at least 1"));
        }
        Ok(())
    }

    /// Seed for the batch order of `epoch` (0-based) in `cycle`.
    pub fn epoch_seed(&self, cycle: u32, epoch: usize) -> u64 {
        mix_seed(self.seed, ((cycle as u64) << 32) | epoch as u64)
    }
}

/// What happened while training one cycle. Accuracies are percentages and
/// the `best_*` / `test_acc` fields describe the epoch with the lowest
/// validation loss (early-stopping accuracy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTraining {
    pub epochs_run: usize,
    /// 1-based epoch with the lowest validation loss; 0 when no epoch
    /// finished with a finite loss and the starting weights were kept.
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub test_acc: f64,
    /// Mean training loss of the best epoch.
    pub train_loss: f64,
    /// Mean squared change of the active weights over each epoch.
    pub ewg_per_epoch: Vec<f64>,
    pub train_loss_per_epoch: Vec<f64>,
    pub val_loss_per_epoch: Vec<f64>,
    /// Training produced a non-finite loss and was stopped; the network is
    /// left at its best finite epoch.
    pub diverged: bool,
}

struct EpochStats {
    epoch: usize,
    val_loss: f64,
    val_acc: f64,
    test_acc: f64,
    train_loss: f64,
}

/// Trains `net` for one cycle with a fresh optimizer state and the schedule
/// rewound to step 0 of `cycle`. Training runs for `epochs` epochs, or until
/// `patience` epochs pass without a lower validation loss. `on_epoch_end`
/// sees the network after every completed epoch (1-based count).
pub fn train_cycle(
    net: &mut MaskedNetwork,
    split: &Split,
    cycle: u32,
    settings: &TrainSettings,
    on_epoch_end: &mut dyn FnMut(usize, &MaskedNetwork),
) -> Result<CycleTraining> {
    settings.validate()?;
    let mut opt = OptimizerState::new(settings.optimizer, net);
    let mut sched = ScheduleState::start_cycle(cycle);

    let (val_acc, val_loss) = evaluate(net, &split.val)?;
    let (test_acc, _) = evaluate(net, &split.test)?;
    let (_, train_loss) = evaluate(net, &split.train)?;
    // The starting point only stands in when no epoch finishes.
    let mut best = EpochStats {
        epoch: 0,
        val_loss,
        val_acc,
        test_acc,
        train_loss,
    };
    let mut best_net = net.clone();
    let mut out = CycleTraining {
        epochs_run: 0,
        best_epoch: 0,
        best_val_acc: 0.0,
        test_acc: 0.0,
        train_loss: 0.0,
        ewg_per_epoch: Vec::new(),
        train_loss_per_epoch: Vec::new(),
        val_loss_per_epoch: Vec::new(),
        diverged: false,
    };
    let mut since_best = 0usize;

    for epoch in 0..settings.epochs {
        let before = net.weight_matrices();
        let mut loss_sum = 0.0;
        let batches = iterate_batches(
            &split.train,
            settings.batch_size,
            settings.epoch_seed(cycle, epoch),
        );
        for (x, y) in batches {
            let trace = forward(net, &x)?;
            let (loss, grads) = loss_and_backward(net, &trace, &y)?;
            if !loss.is_finite() {
                out.diverged = true;
                break;
            }
            loss_sum += loss * y.len() as f64;
            opt.step(net, &grads, sched.next_lr(&settings.schedule))?;
        }
        if out.diverged || net.layers().iter().any(|l| !l.weights().is_finite()) {
            out.diverged = true;
            break;
        }
        out.epochs_run = epoch + 1;
        let train_loss = loss_sum / split.train.len() as f64;
        out.train_loss_per_epoch.push(train_loss);
        out.ewg_per_epoch
            .push(measure_ewg(&before, &net.weight_matrices(), &net.masks())?);
        let (val_acc, val_loss) = evaluate(net, &split.val)?;
        out.val_loss_per_epoch.push(val_loss);
        on_epoch_end(epoch + 1, net);

        if best.epoch == 0 || val_loss < best.val_loss {
            let (test_acc, _) = evaluate(net, &split.test)?;
            best = EpochStats {
                epoch: epoch + 1,
                val_loss,
                val_acc,
                test_acc,
                train_loss,
            };
            best_net = net.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if settings.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }

    if settings.restore_best || out.diverged {
        *net = best_net;
    }
    out.best_epoch = best.epoch;
    out.best_val_acc = 100.0 * best.val_acc;
    out.test_acc = 100.0 * best.test_acc;
    out.train_loss = best.train_loss;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic_gaussian, split_dataset, SplitSpec};
    use crate::nn::{init_network, Activation, InitMode};
    use crate::numerics::Rng;

    fn setup() -> (MaskedNetwork, Split) {
        let ds = make_synthetic_gaussian(&mut Rng::new(8), 600, 6, 3, 1.0).unwrap();
        let split = split_dataset(&ds, &SplitSpec::default()).unwrap();
        let net = init_network(
            &mut Rng::new(9),
            &[6, 16, 3],
            Activation::Relu,
            InitMode::Training,
        )
        .unwrap();
        (net, split)
    }

    fn settings(lr: f64) -> TrainSettings {
        TrainSettings {
            optimizer: OptimizerSpec::sgd_momentum(),
            schedule: ScheduleSpec::Constant { lr },
            epochs: 15,
            batch_size: 32,
            patience: Some(3),
            restore_best: true,
            seed: 1,
        }
    }

    #[test]
    fn learns_the_synthetic_task() {
        let (mut net, split) = setup();
        let mut epochs_seen = Vec::new();
        let r = train_cycle(&mut net, &split, 0, &settings(0.05), &mut |e, _| {
            epochs_seen.push(e)
        })
        .unwrap();
        assert!(r.test_acc > 80.0, "{r:?}");
        assert_eq!(epochs_seen, (1..=r.epochs_run).collect::<Vec<_>>());
        assert_eq!(r.ewg_per_epoch.len(), r.epochs_run);
        assert!(r.best_epoch >= 1 && r.best_epoch <= r.epochs_run);
        assert!(!r.diverged);
    }

    #[test]
    fn best_weights_are_restored() {
        let (mut net, split) = setup();
        let r = train_cycle(&mut net, &split, 0, &settings(0.05), &mut |_, _| {}).unwrap();
        let (_, val_loss) = evaluate(&net, &split.val).unwrap();
        assert_eq!(val_loss, r.val_loss_per_epoch[r.best_epoch - 1]);
    }

    #[test]
    fn deterministic() {
        let (net, split) = setup();
        let (mut a, mut b) = (net.clone(), net);
        let ra = train_cycle(&mut a, &split, 2, &settings(0.05), &mut |_, _| {}).unwrap();
        let rb = train_cycle(&mut b, &split, 2, &settings(0.05), &mut |_, _| {}).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_keeps_finite_weights() {
        let (mut net, split) = setup();
        let start = net.clone();
        let r = train_cycle(&mut net, &split, 0, &settings(1e6), &mut |_, _| {}).unwrap();
        assert!(net.layers().iter().all(|l| l.weights().is_finite()));
        if r.best_epoch == 0 {
            assert_eq!(net, start);
        }
    }
}
