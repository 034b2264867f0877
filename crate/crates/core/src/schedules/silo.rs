use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the S-shaped peak-rate curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiloParams {
    /// Peak rate before growth starts (lower bound of the curve).
    pub epsilon: f64,
    /// Total growth; the curve saturates at `epsilon + delta`.
    pub delta: f64,
    /// Steepness of the S-curve.
    pub beta: f64,
    /// Number of initial cycles held at `epsilon`.
    pub q: u32,
    /// Pruning rate per cycle.
    pub p: f64,
}

impl SiloParams {
    /// ε = 0.04, δ = 0.06, β = 5, q = 1, p = 0.2.
    pub fn table6() -> Self {
        Self {
            epsilon: 0.04,
            delta: 0.06,
            beta: 5.0,
            q: 1,
            p: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.epsilon) || !finite_nonneg(self.delta) {
            return Err(Error::config(
                "silo epsilon and delta must be finite and >= 0",
            ));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::config("silo beta must be positive"));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::config("silo p must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Peak learning rate for pruning cycle `m`.
///
/// Held at `epsilon` for `m <= q`. Afterwards, with
/// `gamma = 1 - (1 - p)^(m - q)`,
///
/// ```text
/// max_lr = epsilon + delta / (1 + (gamma / (1 - gamma))^(-beta))
/// ```
///
/// The odds power is evaluated as `exp(-beta · (ln gamma - ln(1 - gamma)))`
/// with `ln(1 - gamma) = (m - q) · ln(1 - p)` and
/// `ln gamma = ln(-expm1((m - q) · ln(1 - p)))`, so neither tail overflows.
pub fn silo_max_lr(params: &SiloParams, m: u32) -> f64 {
    if m <= params.q {
        return params.epsilon;
    }
    let steps = (m - params.q) as f64;
    let ln_keep = steps * (-params.p).ln_1p();
    let ln_gamma = (-ln_keep.exp_m1()).ln();
    sigmoid_of_log_odds(params, ln_gamma - ln_keep)
}

/// `epsilon + delta · sigmoid(beta · log_odds)`.
pub(crate) fn sigmoid_of_log_odds(params: &SiloParams, log_odds: f64) -> f64 {
    let exponent = -params.beta * log_odds;
    // exp overflows past ~709; the growth term is then below 1e-300.
    if exponent > 700.0 {
        return params.epsilon;
    }
    params.epsilon + params.delta / (1.0 + exponent.exp())
}

/// Peak rate as a function of `gamma` directly (for `gamma` in (0, 1)).
pub fn silo_max_lr_at_gamma(params: &SiloParams, gamma: f64) -> f64 {
    sigmoid_of_log_odds(params, gamma.ln() - (-gamma).ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table6_values() {
        let p = SiloParams::table6();
        let hundredths = |m| 100.0 * silo_max_lr(&p, m);
        assert_eq!(hundredths(0), 4.0);
        assert_eq!(hundredths(1), 4.0);
        assert!((hundredths(3) - 4.32).abs() < 0.005, "{}", hundredths(3));
        assert!((hundredths(5) - 9.17).abs() < 0.005, "{}", hundredths(5));
        assert!((hundredths(7) - 9.97).abs() < 0.005, "{}", hundredths(7));
        assert!((hundredths(13) - 9.99).abs() < 0.1, "{}", hundredths(13));
        assert!(hundredths(13) < 10.0);
    }

    #[test]
    fn midpoint() {
        let p = SiloParams::table6();
        assert!((silo_max_lr_at_gamma(&p, 0.5) - (0.04 + 0.03)).abs() < 1e-16);
    }

    #[test]
    fn extreme_beta_does_not_overflow() {
        let p = SiloParams {
            beta: 50.0,
            p: 0.01,
            ..SiloParams::table6()
        };
        let v = silo_max_lr(&p, 2);
        assert!(v.is_finite() && v >= p.epsilon);
        let v = silo_max_lr(&p, 4000);
        assert!((v - (p.epsilon + p.delta)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn symmetric_about_half(gamma in 1e-6f64..0.999_999, beta in 0.1f64..20.0, delta in 0.0f64..1.0) {
            let p = SiloParams { epsilon: 0.01, delta, beta, q: 0, p: 0.2 };
            let a = silo_max_lr_at_gamma(&p, gamma) - p.epsilon;
            let b = silo_max_lr_at_gamma(&p, 1.0 - gamma) - p.epsilon;
            prop_assert!((a + b - delta).abs() <= 1e-12);
        }
    }
}
