//! Learning-rate schedules for iterative pruning.
//!
//! Every schedule is a pure function of `(cycle, step)`: the step counter
//! restarts at zero at the beginning of each pruning cycle (LR rewinding),
//! and only SILO looks at the cycle index.

mod silo;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theory::{corollary1_lower_bound, TheoryParams};

pub use silo::{silo_max_lr, silo_max_lr_at_gamma, SiloParams};

fn default_drop_factor() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    Constant {
        lr: f64,
    },
    LinearDecay {
        lr0: f64,
        total_steps: u64,
    },
    /// Linear warmup from 0 to `max_lr`, then a division by `drop_factor`
    /// after each drop step.
    Warmup {
        max_lr: f64,
        warmup_steps: u64,
        #[serde(default)]
        drop_steps: Vec<u64>,
        #[serde(default = "default_drop_factor")]
        drop_factor: f64,
    },
    /// Triangular wave between `lo` and `hi`; `step_size` is the half period.
    Cyclical {
        lo: f64,
        hi: f64,
        step_size: u64,
    },
    Cosine {
        lr0: f64,
        total_steps: u64,
    },
    /// The warmup shape with its peak raised per cycle along an S-curve.
    Silo {
        #[serde(flatten)]
        params: SiloParams,
        warmup_steps: u64,
        #[serde(default)]
        drop_steps: Vec<u64>,
        #[serde(default = "default_drop_factor")]
        drop_factor: f64,
    },
}

/// Position within a pruning run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub cycle: u32,
    pub step: u64,
}

impl ScheduleState {
    /// Rewinds to step 0 of `cycle`.
    pub fn start_cycle(cycle: u32) -> Self {
        Self { cycle, step: 0 }
    }

    /// Current rate, then advances the step counter.
    pub fn next_lr(&mut self, spec: &ScheduleSpec) -> f64 {
        let lr = spec.lr_at(self.cycle, self.step);
        self.step += 1;
        lr
    }
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "{name} = {v} must be finite and >= 0"
        )))
    }
}

fn check_drops(drop_steps: &[u64], drop_factor: f64) -> Result<()> {
    if drop_steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("drop_steps must be strictly ascending"));
    }
    if !(drop_factor.is_finite() && drop_factor >= 1.0) {
        return Err(Error::config(format!(
            "drop_factor = {drop_factor} must be >= 1"
        )));
    }
    Ok(())
}

/// `peak · step / warmup` up to the warmup end, then one division by
/// `factor` for every drop step strictly below `step`.
fn warmup_lr(peak: f64, warmup_steps: u64, drop_steps: &[u64], factor: f64, step: u64) -> f64 {
    let base = if warmup_steps == 0 || step >= warmup_steps {
        peak
    } else {
        peak * (step as f64 / warmup_steps as f64)
    };
    let passed = drop_steps.iter().filter(|&&d| step > d).count();
    (0..passed).fold(base, |lr, _| lr / factor)
}

impl ScheduleSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScheduleSpec::Constant { lr } => check_rate("lr", *lr),
            ScheduleSpec::LinearDecay { lr0, total_steps }
            | ScheduleSpec::Cosine { lr0, total_steps } => {
                check_rate("lr0", *lr0)?;
                if *total_steps == 0 {
                    return Err(Error::config("total_steps must be positive"));
                }
                Ok(())
            }
            ScheduleSpec::Warmup {
                max_lr,
                drop_steps,
                drop_factor,
                ..
            } => {
                check_rate("max_lr", *max_lr)?;
                check_drops(drop_steps, *drop_factor)
            }
            ScheduleSpec::Cyclical { lo, hi, step_size } => {
                check_rate("lo", *lo)?;
                check_rate("hi", *hi)?;
                if lo > hi {
                    return Err(Error::config("cyclical lo must not exceed hi"));
                }
                if *step_size == 0 {
                    return Err(Error::config("cyclical step_size must be positive"));
                }
                Ok(())
            }
            ScheduleSpec::Silo {
                params,
                drop_steps,
                drop_factor,
                ..
            } => {
                params.validate()?;
                check_drops(drop_steps, *drop_factor)
            }
        }
    }

    /// Learning rate at `step` of pruning cycle `cycle`.
    pub fn lr_at(&self, cycle: u32, step: u64) -> f64 {
        match self {
            ScheduleSpec::Constant { lr } => *lr,
            ScheduleSpec::LinearDecay { lr0, total_steps } => {
                lr0 * (1.0 - step as f64 / *total_steps as f64).max(0.0)
            }
            ScheduleSpec::Warmup {
                max_lr,
                warmup_steps,
                drop_steps,
                drop_factor,
            } => warmup_lr(*max_lr, *warmup_steps, drop_steps, *drop_factor, step),
            ScheduleSpec::Cyclical { lo, hi, step_size } => {
                let pos = step % (2 * step_size);
                let frac = if pos <= *step_size {
                    pos as f64 / *step_size as f64
                } else {
                    (2 * step_size - pos) as f64 / *step_size as f64
                };
                lo + (hi - lo) * frac
            }
            ScheduleSpec::Cosine { lr0, total_steps } => {
                let t = (step.min(*total_steps)) as f64 / *total_steps as f64;
                lr0 * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
            ScheduleSpec::Silo {
                params,
                warmup_steps,
                drop_steps,
                drop_factor,
            } => warmup_lr(
                silo_max_lr(params, cycle),
                *warmup_steps,
                drop_steps,
                *drop_factor,
                step,
            ),
        }
    }

    /// Peak rate used in `cycle` (for reports).
    pub fn max_lr(&self, cycle: u32) -> f64 {
        match self {
            ScheduleSpec::Constant { lr } => *lr,
            ScheduleSpec::LinearDecay { lr0, .. } | ScheduleSpec::Cosine { lr0, .. } => *lr0,
            ScheduleSpec::Warmup { max_lr, .. } => *max_lr,
            ScheduleSpec::Cyclical { hi, .. } => *hi,
            ScheduleSpec::Silo { params, .. } => silo_max_lr(params, cycle),
        }
    }

    /// A schedule with the same shape as `self` whose peak is `max_lr` in
    /// every cycle. Warmup and SILO schedules become warmup schedules;
    /// constant schedules stay constant.
    pub fn with_fixed_peak(&self, max_lr: f64) -> Result<ScheduleSpec> {
        match self {
            ScheduleSpec::Constant { .. } => Ok(ScheduleSpec::Constant { lr: max_lr }),
            ScheduleSpec::Warmup {
                warmup_steps,
                drop_steps,
                drop_factor,
                ..
            }
            | ScheduleSpec::Silo {
                warmup_steps,
                drop_steps,
                drop_factor,
                ..
            } => Ok(ScheduleSpec::Warmup {
                max_lr,
                warmup_steps: *warmup_steps,
                drop_steps: drop_steps.clone(),
                drop_factor: *drop_factor,
            }),
            _ => Err(Error::config(
                "a fixed-peak variant needs a constant, warmup or silo schedule",
            )),
        }
    }
}

/// Learning rate that keeps the weight-gradient energy bound at `K` after
/// `k` pruning rounds: `sqrt(K / (gamma_const · C(k)))`, where `C` is the
/// activation-energy lower bound for the network depth in `params`.
pub fn adapted_alpha(params: &TheoryParams, k: u32) -> Result<f64> {
    let p = TheoryParams { k, ..*params };
    let c = corollary1_lower_bound(&p)?;
    if c <= 0.0 {
        return Err(Error::Domain(format!(
            "activation bound {c} is not positive"
        )));
    }
    Ok((params.target_energy / (params.gamma_const * c)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table8_warmup() -> ScheduleSpec {
        ScheduleSpec::Warmup {
            max_lr: 0.03,
            warmup_steps: 20_000,
            drop_steps: vec![20_000, 25_000],
            drop_factor: 10.0,
        }
    }

    #[test]
    fn warmup_examples() {
        let s = table8_warmup();
        assert!((s.lr_at(0, 10_000) - 0.015).abs() < 1e-15);
        assert_eq!(s.lr_at(0, 20_000), 0.03);
        assert!((s.lr_at(0, 20_001) - 0.003).abs() < 1e-15);
        assert!((s.lr_at(0, 22_000) - 0.003).abs() < 1e-15);
        assert!((s.lr_at(0, 26_000) - 0.0003).abs() < 1e-15);
        assert_eq!(s.lr_at(0, 0), 0.0);
    }

    #[test]
    fn cyclical_extrema() {
        let s = ScheduleSpec::Cyclical {
            lo: 0.0,
            hi: 0.03,
            step_size: 8000,
        };
        assert_eq!(s.lr_at(0, 8000), 0.03);
        assert_eq!(s.lr_at(0, 16000), 0.0);
        assert!((s.lr_at(0, 4000) - 0.015).abs() < 1e-15);
        assert!((s.lr_at(0, 12000) - 0.015).abs() < 1e-15);
    }

    #[test]
    fn decay_endpoints() {
        let lin = ScheduleSpec::LinearDecay {
            lr0: 0.1,
            total_steps: 100,
        };
        assert_eq!(lin.lr_at(0, 0), 0.1);
        assert!((lin.lr_at(0, 50) - 0.05).abs() < 1e-15);
        assert_eq!(lin.lr_at(0, 100), 0.0);
        assert_eq!(lin.lr_at(0, 1000), 0.0);
        let cos = ScheduleSpec::Cosine {
            lr0: 0.1,
            total_steps: 100,
        };
        assert_eq!(cos.lr_at(0, 0), 0.1);
        assert!((cos.lr_at(0, 50) - 0.05).abs() < 1e-15);
        assert_eq!(cos.lr_at(0, 100), 0.0);
        assert_eq!(cos.lr_at(0, 500), 0.0);
    }

    #[test]
    fn silo_schedule_uses_cycle_peak() {
        let s = ScheduleSpec::Silo {
            params: SiloParams::table6(),
            warmup_steps: 10,
            drop_steps: vec![],
            drop_factor: 10.0,
        };
        assert_eq!(s.lr_at(0, 10), 0.04);
        assert!((s.lr_at(3, 10) - silo_max_lr(&SiloParams::table6(), 3)).abs() < 1e-18);
        assert!((s.lr_at(3, 5) - 0.5 * silo_max_lr(&SiloParams::table6(), 3)).abs() < 1e-15);

        let fixed = s.with_fixed_peak(0.02).unwrap();
        assert_eq!(fixed.max_lr(0), 0.02);
        assert_eq!(fixed.max_lr(9), 0.02);
        assert_eq!(fixed.lr_at(9, 5), 0.01);
    }

    #[test]
    fn fixed_peak_variants() {
        let c = ScheduleSpec::Constant { lr: 0.1 }
            .with_fixed_peak(0.3)
            .unwrap();
        assert_eq!(c, ScheduleSpec::Constant { lr: 0.3 });
        let cos = ScheduleSpec::Cosine {
            lr0: 0.1,
            total_steps: 10,
        };
        assert!(cos.with_fixed_peak(0.3).is_err());
    }

    #[test]
    fn state_rewinds_each_cycle() {
        let s = table8_warmup();
        let mut st = ScheduleState::start_cycle(0);
        let first: Vec<f64> = (0..5).map(|_| st.next_lr(&s)).collect();
        let mut st = ScheduleState::start_cycle(4);
        let again: Vec<f64> = (0..5).map(|_| st.next_lr(&s)).collect();
        assert_eq!(first, again);
    }

    #[test]
    fn validation() {
        assert!(ScheduleSpec::Warmup {
            max_lr: 0.1,
            warmup_steps: 1,
            drop_steps: vec![5, 5],
            drop_factor: 10.0
        }
        .validate()
        .is_err());
        assert!(ScheduleSpec::Constant { lr: -1.0 }.validate().is_err());
        assert!(ScheduleSpec::Cyclical {
            lo: 0.2,
            hi: 0.1,
            step_size: 3
        }
        .validate()
        .is_err());
        assert!(table8_warmup().validate().is_ok());
    }

    #[test]
    fn json_shape() {
        let s: ScheduleSpec = serde_json::from_str(
            r#"{"kind":"silo","epsilon":0.04,"delta":0.06,"beta":5,"q":1,"p":0.2,"warmup_steps":100}"#,
        )
        .unwrap();
        assert_eq!(
            s,
            ScheduleSpec::Silo {
                params: SiloParams::table6(),
                warmup_steps: 100,
                drop_steps: vec![],
                drop_factor: 10.0
            }
        );
    }

    fn unit_params(k: u32) -> TheoryParams {
        TheoryParams {
            sigma_x: 1.0,
            sigma_w: 1.0,
            d: 10,
            p: 0.2,
            k,
            depth: 1,
            target_energy: 1.0,
            gamma_const: 1.0,
        }
    }

    #[test]
    fn adapted_alpha_values() {
        let a0 = adapted_alpha(&unit_params(0), 0).unwrap();
        assert!((a0 - 1.0 / 11f64.sqrt()).abs() < 1e-15);
        assert!((a0 - 0.3015).abs() < 1e-4);
        let far = adapted_alpha(&unit_params(0), 400).unwrap();
        assert!((far - 1.0).abs() < 1e-9);
        let alphas: Vec<f64> = (0..=25)
            .map(|k| adapted_alpha(&unit_params(0), k).unwrap())
            .collect();
        assert!(alphas.windows(2).all(|w| w[1] >= w[0]));
    }
}
