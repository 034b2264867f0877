//! Running an experiment end to end and writing its artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::nn::{load_checkpoint, save_checkpoint};
use crate::numerics::HistogramSummary;
use crate::pruning::{gradient_distribution, run_iterative_pruning, RunReport};

/// Header of the histogram CSV files.
pub const HIST_CSV_HEADER: &str = "bin_lo,bin_hi,count";

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub report: RunReport,
}

pub fn checkpoint_path(dir: &Path, cycle: u32) -> PathBuf {
    dir.join(format!("checkpoint_{cycle}.json"))
}

/// `hist_<cycle>_<kind>.csv`, with kind `grad` or `hidden`.
pub fn hist_path(dir: &Path, cycle: u32, kind: &str) -> PathBuf {
    dir.join(format!("hist_{cycle}_{kind}.csv"))
}

pub fn histogram_csv(h: &HistogramSummary) -> String {
    let mut s = String::from(HIST_CSV_HEADER);
    s.push('\n');
    for (i, c) in h.counts.iter().enumerate() {
        writeln!(s, "{},{},{}", h.bin_edges[i], h.bin_edges[i + 1], c)
            .expect("writing to a String cannot fail");
    }
    s
}

fn write_hists(
    dir: &Path,
    cycle: u32,
    grad: &HistogramSummary,
    hidden: &HistogramSummary,
) -> Result<()> {
    std::fs::write(hist_path(dir, cycle, "grad"), histogram_csv(grad))?;
    std::fs::write(hist_path(dir, cycle, "hidden"), histogram_csv(hidden))?;
    Ok(())
}

/// Loads the data, runs the pruning loop and writes `cycles.csv`,
/// `run.json`, one checkpoint per cycle and the two histogram files per
/// cycle into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    config.validate()?;
    let split = config.load_split()?;
    std::fs::create_dir_all(out_dir)?;
    let report = run_iterative_pruning(&config.prune_config(), &split, &mut |cycle, net| {
        save_checkpoint(net, &checkpoint_path(out_dir, cycle.cycle))?;
        write_hists(out_dir, cycle.cycle, &cycle.grad, &cycle.hidden)
    })?;
    std::fs::write(out_dir.join("cycles.csv"), report.to_csv())?;
    let record = RunRecord {
        config: config.clone(),
        report: report.clone(),
    };
    std::fs::write(
        out_dir.join("run.json"),
        serde_json::to_vec_pretty(&record)?,
    )?;
    Ok(report)
}

/// Per-cycle distributions recomputed from a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub cycle: u32,
    pub grad: HistogramSummary,
    pub hidden: HistogramSummary,
}

/// Recomputes the weight-gradient and hidden-representation histograms of
/// every cycle from the checkpoints in `run_dir`, using the run's own
/// validation split, and rewrites the histogram files.
pub fn gradient_distribution_report(run_dir: &Path) -> Result<Vec<DistributionRow>> {
    let record: RunRecord = serde_json::from_slice(&std::fs::read(run_dir.join("run.json"))?)?;
    let split = record.config.load_split()?;
    let mut rows = Vec::new();
    for cycle in 0..=record.config.prune.cycles {
        let path = checkpoint_path(run_dir, cycle);
        if !path.exists() {
            return Err(Error::invalid(format!(
                "missing checkpoint {}",
                path.display()
            )));
        }
        let net = load_checkpoint(&path)?;
        let (grad, hidden) =
            gradient_distribution(&net, &split.val, record.config.training.batch_size)?;
        write_hists(run_dir, cycle, &grad, &hidden)?;
        rows.push(DistributionRow {
            cycle,
            grad,
            hidden,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::MINIMAL_CONFIG;

    #[test]
    fn writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_json(MINIMAL_CONFIG).unwrap();
        let report = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(report.cycles.len(), 3);
        for m in 0..3 {
            assert!(checkpoint_path(dir.path(), m).exists());
            assert!(hist_path(dir.path(), m, "grad").exists());
            assert!(hist_path(dir.path(), m, "hidden").exists());
        }
        let csv = std::fs::read_to_string(dir.path().join("cycles.csv")).unwrap();
        assert_eq!(csv, report.to_csv());

        let rows = gradient_distribution_report(dir.path()).unwrap();
        for (row, c) in rows.iter().zip(&report.cycles) {
            assert_eq!(row.grad, c.grad);
            assert_eq!(row.hidden, c.hidden);
        }
    }

    #[test]
    fn rerun_gives_identical_csv() {
        let cfg = ExperimentConfig::from_json(MINIMAL_CONFIG).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_experiment(&cfg, a.path()).unwrap();
        run_experiment(&cfg, b.path()).unwrap();
        let read = |d: &Path| std::fs::read(d.join("cycles.csv")).unwrap();
        assert_eq!(read(a.path()), read(b.path()));
    }

    #[test]
    fn missing_checkpoint_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_json(MINIMAL_CONFIG).unwrap();
        run_experiment(&cfg, dir.path()).unwrap();
        std::fs::remove_file(checkpoint_path(dir.path(), 1)).unwrap();
        assert!(gradient_distribution_report(dir.path()).is_err());
    }

    #[test]
    fn histogram_csv_rows() {
        let h = crate::numerics::build_histogram(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(histogram_csv(&h), "bin_lo,bin_hi,count\n0,1.5,2\n1.5,3,2\n");
    }
}
