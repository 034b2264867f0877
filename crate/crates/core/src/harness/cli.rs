//! Command-line entry point.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::config::ExperimentConfig;
use super::experiment::{gradient_distribution_report, run_experiment};
use super::oracle::{default_grid, oracle_search};
use crate::error::{Error, Result};
use crate::schedules::{adapted_alpha, ScheduleSpec};
use crate::theory::{
    corollary1_lower_bound, pruned_gaussian_second_moment, thm1_lower_bound, TheoryParams,
};

#[derive(Debug, Parser)]
#[command(
    name = "silo",
    about = "Iterative pruning experiments with S-shaped learning-rate schedules"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    emit: Emit,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the dense network only (no pruning cycles).
    Train(RunArgs),
    /// Run the iterative prune / retrain loop.
    Prune(RunArgs),
    /// Dump (cycle, step, lr) rows of a schedule.
    Schedule {
        /// Schedule as JSON text or a path to a JSON file.
        #[arg(long)]
        spec: String,
        #[arg(long)]
        cycles: u32,
        #[arg(long)]
        steps: u64,
        #[arg(long, value_enum, default_value = "csv")]
        emit: Emit,
    },
    /// Tabulate the activation-energy bound and adapted rate over k.
    Theory {
        #[arg(long)]
        sigma_x: f64,
        #[arg(long)]
        sigma_w: f64,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 25)]
        k_max: u32,
        #[arg(long, default_value_t = 1)]
        depth: u32,
        #[arg(long, default_value_t = 1.0)]
        target_energy: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma_const: f64,
        #[arg(long, value_enum, default_value = "csv")]
        emit: Emit,
    },
    /// Grid-search the best peak rate per cycle.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated ascending grid; defaults to log-spaced points.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 8)]
        grid_points: usize,
        /// Train candidates one after another.
        #[arg(long)]
        serial: bool,
    },
    /// Recompute gradient and hidden-representation histograms of a run.
    Hist {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        emit: Emit,
    },
}

/// Runs the CLI with `argv` (program name first), writing results to `out`.
/// Returns the process exit code: 0 on success, 1 on a runtime error and 2 on
/// a usage error.
pub fn cli_main_with<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = write!(out, "{}", e.render());
            } else {
                eprint!("{}", e.render());
            }
            return code;
        }
    };
    match run(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    cli_main_with(argv, &mut lock)
}

fn load_config(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::config("no output directory: pass --out or set output_dir"))?;
    Ok((cfg, dir))
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn parse_schedule(spec: &str) -> Result<ScheduleSpec> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_owned()
    } else {
        std::fs::read_to_string(Path::new(spec))?
    };
    let s: ScheduleSpec = serde_json::from_str(&text)?;
    s.validate()?;
    Ok(s)
}

#[derive(Serialize)]
struct TheoryRow {
    k: u32,
    tau: f64,
    bound: f64,
    second_moment: f64,
    alpha: f64,
}

#[derive(Serialize)]
struct ScheduleRow {
    cycle: u32,
    step: u64,
    lr: f64,
}

#[derive(Serialize)]
struct HistRow {
    cycle: u32,
    grad_std: f64,
    hidden_std: f64,
}

fn run_pipeline(args: &RunArgs, dense_only: bool, out: &mut dyn Write) -> Result<()> {
    let (mut cfg, dir) = load_config(args)?;
    if dense_only {
        cfg.prune.cycles = 0;
    }
    let report = run_experiment(&cfg, &dir)?;
    match args.emit {
        Emit::Csv => write!(out, "{}", report.to_csv())?,
        Emit::Json => emit_json(out, &report)?,
    }
    Ok(())
}

fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train(args) => run_pipeline(&args, true, out)?,
        Command::Prune(args) => run_pipeline(&args, false, out)?,
        Command::Schedule {
            spec,
            cycles,
            steps,
            emit,
        } => {
            let s = parse_schedule(&spec)?;
            let rows: Vec<ScheduleRow> = (0..cycles)
                .flat_map(|cycle| (0..steps).map(move |step| (cycle, step)))
                .map(|(cycle, step)| ScheduleRow {
                    cycle,
                    step,
                    lr: s.lr_at(cycle, step),
                })
                .collect();
            match emit {
                Emit::Csv => {
                    writeln!(out, "cycle,step,lr")?;
                    for r in &rows {
                        writeln!(out, "{},{},{}", r.cycle, r.step, r.lr)?;
                    }
                }
                Emit::Json => emit_json(out, &rows)?,
            }
        }
        Command::Theory {
            sigma_x,
            sigma_w,
            d,
            p,
            k_max,
            depth,
            target_energy,
            gamma_const,
            emit,
        } => {
            let params = TheoryParams {
                sigma_x,
                sigma_w,
                d,
                p,
                k: 0,
                depth,
                target_energy,
                gamma_const,
            };
            params.validate()?;
            let rows = (0..=k_max)
                .map(|k| {
                    let pk = TheoryParams { k, ..params };
                    let bound = if depth == 1 {
                        thm1_lower_bound(&pk)?
                    } else {
                        corollary1_lower_bound(&pk)?
                    };
                    Ok(TheoryRow {
                        k,
                        tau: pk.tau(),
                        bound,
                        second_moment: pruned_gaussian_second_moment(sigma_w, pk.tau())?,
                        alpha: adapted_alpha(&params, k)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            match emit {
                Emit::Csv => {
                    writeln!(out, "k,tau,bound,second_moment,alpha")?;
                    for r in &rows {
                        writeln!(
                            out,
                            "{},{},{},{},{}",
                            r.k, r.tau, r.bound, r.second_moment, r.alpha
                        )?;
                    }
                }
                Emit::Json => emit_json(out, &rows)?,
            }
        }
        Command::Oracle {
            run,
            grid,
            grid_points,
            serial,
        } => {
            let (cfg, dir) = load_config(&run)?;
            let grid = grid.unwrap_or_else(|| default_grid(grid_points));
            let split = cfg.load_split()?;
            let result = oracle_search(&cfg.prune_config(), &split, &grid, !serial)?;
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("oracle.csv"), result.to_csv())?;
            std::fs::write(dir.join("oracle.json"), serde_json::to_vec_pretty(&result)?)?;
            match run.emit {
                Emit::Csv => write!(out, "{}", result.to_csv())?,
                Emit::Json => emit_json(out, &result)?,
            }
        }
        Command::Hist { run, emit } => {
            let rows: Vec<HistRow> = gradient_distribution_report(&run)?
                .into_iter()
                .map(|r| HistRow {
                    cycle: r.cycle,
                    grad_std: r.grad.std,
                    hidden_std: r.hidden.std,
                })
                .collect();
            match emit {
                Emit::Csv => {
                    writeln!(out, "cycle,grad_std,hidden_std")?;
                    for r in &rows {
                        writeln!(out, "{},{},{}", r.cycle, r.grad_std, r.hidden_std)?;
                    }
                }
                Emit::Json => emit_json(out, &rows)?,
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let code = cli_main_with(
            std::iter::once("silo").chain(args.iter().copied()),
            &mut buf,
        );
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn help_exits_zero() {
        let (code, text) = call(&["schedule", "--help"]);
        assert_eq!(code, 0);
        assert!(text.contains("--spec"));
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&["theory", "--bogus"]).0, 2);
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&[]).0, 2);
    }

    #[test]
    fn theory_table_rows() {
        let (code, text) = call(&[
            "theory",
            "--sigma-x",
            "1",
            "--sigma-w",
            "1",
            "--d",
            "10",
            "--p",
            "0.2",
            "--k-max",
            "25",
            "--emit",
            "csv",
        ]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,tau,bound,second_moment,alpha");
        assert_eq!(lines.len(), 27);
        assert!(lines[1].starts_with("0,0,11,"));
    }

    #[test]
    fn theory_rejects_bad_params() {
        let (code, _) = call(&[
            "theory",
            "--sigma-x",
            "1",
            "--sigma-w",
            "1",
            "--d",
            "10",
            "--p",
            "1.5",
        ]);
        assert_eq!(code, 1);
    }

    #[test]
    fn schedule_dump() {
        let (code, text) = call(&[
            "schedule",
            "--spec",
            r#"{"kind":"constant","lr":0.1}"#,
            "--cycles",
            "2",
            "--steps",
            "3",
        ]);
        assert_eq!(code, 0);
        assert_eq!(
            text,
            "cycle,step,lr\n0,0,0.1\n0,1,0.1\n0,2,0.1\n1,0,0.1\n1,1,0.1\n1,2,0.1\n"
        );
        let (code, text) = call(&[
            "schedule",
            "--spec",
            r#"{"kind":"constant","lr":0.1}"#,
            "--cycles",
            "1",
            "--steps",
            "1",
            "--emit",
            "json",
        ]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v[0]["lr"], 0.1);
    }
}
