//! Polynomial two-timescale schedules for the perturbation radius and the
//! stepsize, plus the guided-perturbation weight parameters.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub delta0: f64,
    pub alpha: f64,
    pub eta0: f64,
    pub beta: f64,
    /// Contraction of `1 - w` per iteration under guided perturbation.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Initial guided-perturbation weight.
    #[serde(default)]
    pub w0: f64,
}

fn default_rho() -> f64 {
    0.9
}

impl Default for ScheduleConfig {
    /// Exponents and contraction used in the supply-chain experiments.
    fn default() -> Self {
        Self {
            delta0: 1.0,
            alpha: 0.75,
            eta0: 0.1,
            beta: 1.0,
            rho: 0.9,
            w0: 0.0,
        }
    }
}

impl ScheduleConfig {
    /// Structural sanity of the parameters (ranges, not summability).
    pub fn check_ranges(&self) -> Result<(), String> {
        let mut bad = Vec::new();
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            bad.push("delta0 must be positive");
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            bad.push("eta0 must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            bad.push("alpha must lie in (0, 1]");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            bad.push("beta must lie in (0, 1]");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            bad.push("rho must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.w0) {
            bad.push("w0 must lie in [0, 1]");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(bad.join("; "))
        }
    }
}

/// Perturbation radius `δ0 / (1+k)^α`.
pub fn delta_at(cfg: &ScheduleConfig, k: u64) -> f64 {
    cfg.delta0 / (1.0 + k as f64).powf(cfg.alpha)
}

/// Stepsize `η0 / (1+k)^β`.
pub fn eta_at(cfg: &ScheduleConfig, k: u64) -> f64 {
    cfg.eta0 / (1.0 + k as f64).powf(cfg.beta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub checks: Vec<ScheduleCheck>,
}

impl ScheduleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ScheduleCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ScheduleCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub const TIMESCALE_ORDER: &str = "alpha < beta";
pub const SUM_ETA_DELTA_FINITE: &str = "sum eta_k delta_k < inf";
pub const SUM_ETA2_OVER_DELTA2_FINITE: &str = "sum eta_k^2 / delta_k^2 < inf";
pub const SUM_ETA_INFINITE: &str = "sum eta_k = inf";

/// Checks the summability conditions for the polynomial family. Failures are
/// warnings: callers may still run with a schedule that fails them.
pub fn validate_schedule(cfg: &ScheduleConfig) -> ScheduleReport {
    let (a, b) = (cfg.alpha, cfg.beta);
    let checks = vec![
        ScheduleCheck {
            name: TIMESCALE_ORDER,
            passed: a < b,
            detail: format!("alpha = {a}, beta = {b}"),
        },
        ScheduleCheck {
            name: SUM_ETA_DELTA_FINITE,
            passed: a + b > 1.0,
            detail: format!("alpha + beta = {}", a + b),
        },
        ScheduleCheck {
            name: SUM_ETA2_OVER_DELTA2_FINITE,
            passed: 2.0 * (b - a) > 1.0,
            detail: format!("2 (beta - alpha) = {}", 2.0 * (b - a)),
        },
        ScheduleCheck {
            name: SUM_ETA_INFINITE,
            passed: b <= 1.0,
            detail: format!("beta = {b}"),
        },
    ];
    for c in checks.iter().filter(|c| !c.passed) {
        log::warn!("schedule condition `{}` fails ({})", c.name, c.detail);
    }
    ScheduleReport { checks }
}
