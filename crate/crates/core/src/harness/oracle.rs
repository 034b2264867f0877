//! Per-cycle grid search for the best peak learning rate.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Split;
use crate::error::{Error, Result};
use crate::nn::MaskedNetwork;
use crate::pruning::{train_cycle, PruneRunConfig, Snapshot};
use crate::schedules::{silo_max_lr, ScheduleSpec, SiloParams};

pub const ORACLE_CSV_HEADER: &str = "cycle,best_max_lr,interval_lo,interval_hi,silo_max_lr";

/// Candidates whose validation accuracy is within this many percentage
/// points of the best one form the interval.
pub const INTERVAL_POINTS: f64 = 0.5;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SILO_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCandidate {
    pub max_lr: f64,
    /// Percent.
    pub val_acc: f64,
    /// Percent.
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCycle {
    pub cycle: u32,
    pub best_max_lr: f64,
    pub interval_lo: f64,
    pub interval_hi: f64,
    /// SILO's peak for the same cycle, for comparison.
    pub silo_max_lr: f64,
    pub candidates: Vec<OracleCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub cycles: Vec<OracleCycle>,
    /// Number of cycle trainings performed (`grid × (L + 1)`).
    pub trainings: usize,
}

impl OracleResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(ORACLE_CSV_HEADER);
        s.push('\n');
        for c in &self.cycles {
            writeln!(
                s,
                "{},{},{},{},{}",
                c.cycle, c.best_max_lr, c.interval_lo, c.interval_hi, c.silo_max_lr
            )
            .expect("writing to a String cannot fail");
        }
        s
    }
}

/// `points` log-spaced values from 1e-4 to 1e-1 inclusive.
pub fn default_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![1e-4],
        _ => (0..points)
            .map(|i| 10f64.powf(-4.0 + 3.0 * i as f64 / (points - 1) as f64))
            .collect(),
    }
}

fn comparison_params(run: &PruneRunConfig) -> SiloParams {
    match &run.schedule {
        ScheduleSpec::Silo { params, .. } => *params,
        _ => SiloParams {
            p: run.rate,
            ..SiloParams::table6()
        },
    }
}

struct Trained {
    net: MaskedNetwork,
    snapshot: Option<Snapshot>,
    val_acc: f64,
    test_acc: f64,
}

/// Index of the best validation accuracy; the earliest (smallest rate)
/// wins ties.
fn best_index(accs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &a) in accs.iter().enumerate() {
        if a > accs[best] {
            best = i;
        }
    }
    best
}

/// Smallest and largest grid values within [`INTERVAL_POINTS`] of the best.
fn interval(grid: &[f64], accs: &[f64], best: usize) -> (f64, f64) {
    let close = grid
        .iter()
        .zip(accs)
        .filter(|(_, &a)| a >= accs[best] - INTERVAL_POINTS)
        .map(|(&g, _)| g);
    let lo = close.clone().fold(f64::INFINITY, f64::min);
    let hi = close.fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// For every cycle of `run`, retrains the cycle once per grid value (same
/// schedule shape, peak fixed to the candidate), keeps the candidate with the
/// best validation accuracy and continues the next cycle from its weights.
/// Candidates of one cycle run in parallel when `parallel` is set; results
/// do not depend on it.
pub fn oracle_search(
    run: &PruneRunConfig,
    split: &Split,
    grid: &[f64],
    parallel: bool,
) -> Result<OracleResult> {
    run.validate()?;
    if grid.len() < 2 {
        return Err(Error::config("oracle grid needs at least two points"));
    }
    if grid.iter().any(|g| !(g.is_finite() && *g > 0.0)) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("oracle grid must be positive and ascending"));
    }
    let schedules = grid
        .iter()
        .map(|&lr| run.schedule.with_fixed_peak(lr))
        .collect::<Result<Vec<_>>>()?;
    let base = run.train_settings();
    let rewind_epoch = run.effective_rewind_epoch();
    let scoring = split.train.head(run.score_samples);
    let silo = comparison_params(run);

    let pool = match (parallel, thread_cap()) {
        (true, Some(n)) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("thread pool: {e}")))?,
        ),
        _ => None,
    };

    let mut net = run.initial_network(&split.train)?;
    let mut snapshot = run.imp.then(|| Snapshot::take(&net));
    let mut cycles = Vec::new();
    for m in 0..=run.cycles {
        if m > 0 {
            crate::pruning::prune_for_cycle(&mut net, run, &scoring, snapshot.as_ref())?;
        }
        let train_one = |schedule: &ScheduleSpec| -> Result<Trained> {
            let mut candidate = net.clone();
            let mut snap = None;
            let settings = crate::pruning::TrainSettings {
                schedule: schedule.clone(),
                ..base.clone()
            };
            let t = train_cycle(&mut candidate, split, m, &settings, &mut |epoch, n| {
                if m == 0 && run.imp && epoch == rewind_epoch {
                    snap = Some(Snapshot::take(n));
                }
            })?;
            Ok(Trained {
                net: candidate,
                snapshot: snap,
                val_acc: t.best_val_acc,
                test_acc: t.test_acc,
            })
        };
        let results: Vec<Trained> = if parallel {
            let run_all = || {
                schedules
                    .par_iter()
                    .map(train_one)
                    .collect::<Result<Vec<_>>>()
            };
            match &pool {
                Some(p) => p.install(run_all)?,
                None => run_all()?,
            }
        } else {
            schedules
                .iter()
                .map(train_one)
                .collect::<Result<Vec<_>>>()?
        };

        let accs: Vec<f64> = results.iter().map(|r| r.val_acc).collect();
        let best = best_index(&accs);
        let (interval_lo, interval_hi) = interval(grid, &accs, best);
        let candidates = grid
            .iter()
            .zip(&results)
            .map(|(&max_lr, r)| OracleCandidate {
                max_lr,
                val_acc: r.val_acc,
                test_acc: r.test_acc,
            })
            .collect();
        cycles.push(OracleCycle {
            cycle: m,
            best_max_lr: grid[best],
            interval_lo,
            interval_hi,
            silo_max_lr: silo_max_lr(&silo, m),
            candidates,
        });

        let chosen = results
            .into_iter()
            .nth(best)
            .expect("best index is in range");
        net = chosen.net;
        if m == 0 && run.imp {
            if let Some(s) = chosen.snapshot {
                snapshot = Some(s);
            }
        }
    }
    Ok(OracleResult {
        trainings: grid.len() * cycles.len(),
        cycles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic_gaussian, split_dataset, SplitSpec};
    use crate::nn::{Activation, OptimizerSpec};
    use crate::numerics::Rng;
    use crate::pruning::PruneMethod;

    fn run() -> PruneRunConfig {
        PruneRunConfig {
            hidden: vec![12],
            activation: Activation::Relu,
            optimizer: OptimizerSpec::sgd_momentum(),
            schedule: ScheduleSpec::Warmup {
                max_lr: 0.05,
                warmup_steps: 10,
                drop_steps: vec![],
                drop_factor: 10.0,
            },
            method: PruneMethod::GlobalMagnitude,
            rate: 0.2,
            cycles: 2,
            epochs: 3,
            batch_size: 32,
            patience: None,
            restore_best: false,
            imp: false,
            rewind_epoch: None,
            score_samples: 100,
            seed: 4,
        }
    }

    fn split() -> Split {
        let ds = make_synthetic_gaussian(&mut Rng::new(30), 400, 6, 3, 1.0).unwrap();
        split_dataset(&ds, &SplitSpec::default()).unwrap()
    }

    #[test]
    fn grid_defaults() {
        let g = default_grid(8);
        assert_eq!(g.len(), 8);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[7] - 0.1).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn tie_goes_to_smaller_rate() {
        assert_eq!(best_index(&[90.0, 95.0, 95.0]), 1);
        assert_eq!(
            interval(&[0.1, 0.2, 0.3], &[94.6, 95.0, 95.0], 1),
            (0.1, 0.3)
        );
        assert_eq!(
            interval(&[0.1, 0.2, 0.3], &[94.4, 95.0, 90.0], 1),
            (0.2, 0.2)
        );
    }

    #[test]
    fn repeated_value_grid() {
        let r = oracle_search(&run(), &split(), &[0.01, 0.01], false).unwrap();
        for c in &r.cycles {
            assert_eq!(
                (c.best_max_lr, c.interval_lo, c.interval_hi),
                (0.01, 0.01, 0.01)
            );
        }
    }

    #[test]
    fn serial_equals_parallel() {
        let grid = [0.001, 0.01, 0.1];
        let a = oracle_search(&run(), &split(), &grid, false).unwrap();
        let b = oracle_search(&run(), &split(), &grid, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cycles.len(), 3);
        assert_eq!(a.trainings, 9);
        for c in &a.cycles {
            assert!(c.interval_lo <= c.best_max_lr && c.best_max_lr <= c.interval_hi);
        }
        assert_eq!(a.to_csv().lines().next(), Some(ORACLE_CSV_HEADER));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(oracle_search(&run(), &split(), &[0.01], false).is_err());
        assert!(oracle_search(&run(), &split(), &[0.1, 0.01], false).is_err());
        let mut cosine = run();
        cosine.schedule = ScheduleSpec::Cosine {
            lr0: 0.1,
            total_steps: 10,
        };
        assert!(oracle_search(&cosine, &split(), &[0.01, 0.1], false).is_err());
    }
}
