//! Closed-form optimal design for the all-pay contest with entry fee,
//! reserve and shared prize, under a liability cap `K` and i.i.d. uniform
//! abilities.
//!
//! With `F` the ability CDF on `[a, b]`, `f` its density and
//! `J(t) = t - (1 - F(t)) / f(t)` the virtual ability:
//!
//! ```text
//! t*(K) = max{ J⁻¹(t0), F⁻¹( (NK / (V + NK))^{1/(N-1)} ) }
//! E = K,  ê = t* [ (V + NK) F^{N-1}(t*) - K ],  S = K / F^{N-1}(t*)
//! R* = N ∫_{t*}^{b} (J(t) - t0) [ (V + NK) F^{N-1}(t) - K ] f(t) dt + t0 V
//! ```

use serde::Serialize;

use super::{ContestError, ContestParams};
use crate::quad::integrate;

const QUAD_TOL: f64 = 1e-9;

impl ContestParams {
    fn width(&self) -> f64 {
        self.ability_high - self.ability_low
    }

    pub fn cdf(&self, t: f64) -> f64 {
        ((t - self.ability_low) / self.width()).clamp(0.0, 1.0)
    }

    pub fn density(&self) -> f64 {
        1.0 / self.width()
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.ability_low + p.clamp(0.0, 1.0) * self.width()
    }

    fn check_ability(&self, t: f64) -> Result<(), ContestError> {
        if (self.ability_low..=self.ability_high).contains(&t) {
            Ok(())
        } else {
            Err(ContestError::AbilityOutOfSupport {
                t,
                low: self.ability_low,
                high: self.ability_high,
            })
        }
    }

    /// `(V + NK) F^{N-1}(t) - K`, the net prize schedule at ability `t`.
    fn prize_schedule(&self, t: f64, k: f64) -> f64 {
        let n = self.contestants as f64;
        (self.prize + n * k) * self.cdf(t).powi(self.contestants as i32 - 1) - k
    }
}

/// `J(t) = t - (1 - F(t)) / f(t)`; for `U[a, b]` this is `2t - b`.
pub fn virtual_ability(t: f64, params: &ContestParams) -> Result<f64, ContestError> {
    params.check_ability(t)?;
    Ok(t - (1.0 - params.cdf(t)) / params.density())
}

/// `J⁻¹(t0)`, kept inside the support.
fn inverse_virtual_ability(t0: f64, params: &ContestParams) -> f64 {
    (0.5 * (t0 + params.ability_high)).clamp(params.ability_low, params.ability_high)
}

pub fn cutoff(k: f64, params: &ContestParams) -> f64 {
    let n = params.contestants as f64;
    let share = n * k / (params.prize + n * k);
    let by_liability = params.quantile(share.powf(1.0 / (n - 1.0)));
    inverse_virtual_ability(params.designer_cost, params).max(by_liability)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalDesign {
    pub liability: f64,
    pub cutoff: f64,
    pub entry_fee: f64,
    pub reserve: f64,
    /// `None` when `F^{N-1}(t*) = 0` and the shared prize is undefined.
    pub shared_prize: Option<f64>,
}

pub fn optimal_design(k: f64, params: &ContestParams) -> OptimalDesign {
    let t_star = cutoff(k, params);
    let mass = params.cdf(t_star).powi(params.contestants as i32 - 1);
    OptimalDesign {
        liability: k,
        cutoff: t_star,
        entry_fee: k,
        reserve: t_star * params.prize_schedule(t_star, k),
        shared_prize: (mass > 0.0).then(|| k / mass),
    }
}

/// Maximal expected total effort `R*(K)`.
pub fn max_total_effort(k: f64, params: &ContestParams) -> f64 {
    let t_star = cutoff(k, params);
    let n = params.contestants as f64;
    let t0 = params.designer_cost;
    let integrand = |t: f64| {
        let j = t - (1.0 - params.cdf(t)) / params.density();
        (j - t0) * params.prize_schedule(t, k) * params.density()
    };
    n * integrate(integrand, t_star, params.ability_high, QUAD_TOL) + t0 * params.prize
}

/// Equilibrium effort of a contestant with ability `t` under the optimal
/// design for liability `K`: zero up to the cutoff, then
/// `t P(t) - ∫_{t*}^{t} P(s) ds` with `P` the net prize schedule.
pub fn equilibrium_effort(t: f64, k: f64, params: &ContestParams) -> Result<f64, ContestError> {
    params.check_ability(t)?;
    let t_star = cutoff(k, params);
    if t <= t_star {
        return Ok(0.0);
    }
    let area = integrate(|s| params.prize_schedule(s, k), t_star, t, QUAD_TOL);
    Ok((t * params.prize_schedule(t, k) - area).max(0.0))
}
