//! A bounded-rational contestant used when no language model is attached.
//!
//! Each contestant compares two plans. Competing means bidding above the
//! reserve, at least as hard as the risk-neutral all-pay effort for its
//! ability. Playing safe means entering with a small token effort and
//! hoping nobody clears the reserve, in which case the shared prize is
//! paid. The better plan's expected value, penalized by fee exposure for
//! risk-averse personas, drives a logistic entry probability.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{analytic, ContestDesign, ContestParams, Persona};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContestantDecision {
    pub enter: bool,
    pub effort: f64,
}

/// All behavioral coefficients in one place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehavioralStub {
    /// Believed share of rivals who enter, used to value the fee pot.
    pub rival_entry_belief: f64,
    /// Payoff units per logit unit.
    pub temperature: f64,
    /// Extra rationality per CRT point; divides the temperature.
    pub crt_sharpening: f64,
    /// Fee-exposure penalty at the most risk-averse persona.
    pub risk_penalty: f64,
    /// Logit shift per competitiveness point above the scale midpoint.
    pub competitiveness_shift: f64,
    /// Relative margin by which a competing bid clears the reserve.
    pub reserve_margin: f64,
    /// Safe-plan effort as a fraction of the reserve at full competitiveness.
    pub token_effort: f64,
    /// Log-scale standard deviation of the multiplicative effort noise.
    pub effort_noise: f64,
}

impl Default for BehavioralStub {
    fn default() -> Self {
        Self {
            rival_entry_belief: 0.75,
            temperature: 12.0,
            crt_sharpening: 0.25,
            risk_penalty: 0.25,
            competitiveness_shift: 0.35,
            reserve_margin: 0.05,
            token_effort: 0.25,
            effort_noise: 0.1,
        }
    }
}

impl BehavioralStub {
    pub fn decide(
        &self,
        design: &ContestDesign,
        params: &ContestParams,
        ability: f64,
        persona: &Persona,
        rng: &mut StreamRng,
    ) -> ContestantDecision {
        // Fixed draw count per contestant keeps streams aligned across designs.
        let u: f64 = rng.random();
        let z: f64 = StandardNormal.sample(rng);

        let fee = design.entry_fee;
        let budget = params.endowment;
        if fee > budget {
            return ContestantDecision {
                enter: false,
                effort: 0.0,
            };
        }
        let (plan_value, plan_effort) = self.best_plan(design, params, ability, persona);

        let risk_aversion = (7.0 - f64::from(persona.risk_tolerance)) / 6.0;
        let exposure = fee + plan_effort / ability;
        let utility = plan_value - self.risk_penalty * risk_aversion * exposure;
        let temperature = self.temperature / (1.0 + self.crt_sharpening * f64::from(persona.crt));
        let logit = utility / temperature + self.competitiveness_shift * (f64::from(persona.competitiveness) - 4.0);
        let p_enter = 1.0 / (1.0 + (-logit).exp());

        let enter = u < p_enter;
        let effort = if enter {
            (plan_effort * (self.effort_noise * z).exp()).clamp(0.0, budget)
        } else {
            0.0
        };
        ContestantDecision { enter, effort }
    }

    /// Expected value and effort of the better of the two plans.
    fn best_plan(&self, design: &ContestDesign, params: &ContestParams, ability: f64, persona: &Persona) -> (f64, f64) {
        let n = params.contestants as f64;
        let budget = params.endowment;
        let fee = design.entry_fee;
        let reserve = design.reserve.max(0.0);
        let strength = params.cdf(ability);
        let competitiveness = f64::from(persona.competitiveness);

        let pot = params.prize + (n - 1.0) * self.rival_entry_belief * fee;
        let all_pay = analytic::equilibrium_effort(ability, 0.0, params).unwrap_or(0.0) * pot / params.prize.max(1e-12);

        let compete = if reserve * (1.0 + self.reserve_margin) < budget {
            let effort = (reserve * (1.0 + self.reserve_margin)).max(all_pay).min(budget);
            let p_win = (strength.powf(n - 1.0) * (1.0 + 0.1 * (competitiveness - 4.0))).clamp(0.0, 1.0);
            Some((p_win * pot - effort / ability - fee, effort))
        } else {
            None
        };

        let rival_clears = if reserve >= budget { 0.0 } else { pot / (pot + reserve) };
        let nobody_clears = (1.0 - self.rival_entry_belief * rival_clears).powf(n - 1.0);
        let token = self.token_effort * (competitiveness / 7.0) * (0.5 + 0.5 * strength) * reserve.min(budget);
        let safe = (nobody_clears * design.shared_prize - token / ability - fee, token);

        match compete {
            Some(c) if c.0 >= safe.0 => c,
            _ => safe,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn persona(risk: u8, comp: u8, crt: u8) -> Persona {
        Persona {
            gender: "female".into(),
            risk_tolerance: risk,
            competitiveness: comp,
            crt,
        }
    }

    fn entry_rate(stub: &BehavioralStub, design: &ContestDesign, t: f64, p: &Persona) -> f64 {
        let params = ContestParams::default();
        let mut rng = StreamRng::seed_from_u64(5);
        let n = 4000;
        let entered = (0..n).filter(|_| stub.decide(design, &params, t, p, &mut rng).enter).count();
        entered as f64 / n as f64
    }

    #[test]
    fn fee_above_endowment_blocks_entry() {
        let stub = BehavioralStub::default();
        let params = ContestParams {
            endowment: 100.0,
            ..ContestParams::default()
        };
        let mut rng = StreamRng::seed_from_u64(1);
        let d = ContestDesign::new(150.0, 0.0, 0.0);
        for _ in 0..100 {
            let dec = stub.decide(&d, &params, 2.0, &persona(7, 7, 3), &mut rng);
            assert!(!dec.enter && dec.effort == 0.0);
        }
    }

    #[test]
    fn entry_is_smooth_at_mid_ability() {
        let stub = BehavioralStub::default();
        let d = ContestDesign::new(10.5, 30.5, 50.5);
        let rate = entry_rate(&stub, &d, 1.5, &persona(4, 4, 1));
        assert!(rate > 0.05 && rate < 0.95, "rate {rate}");
    }

    #[test]
    fn competitive_personas_enter_more() {
        let stub = BehavioralStub::default();
        let d = ContestDesign::new(10.5, 30.5, 50.5);
        let low = entry_rate(&stub, &d, 1.6, &persona(4, 2, 1));
        let high = entry_rate(&stub, &d, 1.6, &persona(4, 6, 1));
        assert!(high > low);
    }

    #[test]
    fn efforts_are_bounded() {
        let stub = BehavioralStub::default();
        let params = ContestParams::default();
        let mut rng = StreamRng::seed_from_u64(2);
        for i in 0..500 {
            let d = ContestDesign::new((i % 7) as f64 * 40.0, (i % 11) as f64 * 90.0, (i % 5) as f64 * 60.0);
            let t = 1.0 + (i % 13) as f64 / 12.0;
            let dec = stub.decide(&d, &params, t, &persona(1 + (i % 7) as u8, 1 + (i % 5) as u8, (i % 4) as u8), &mut rng);
            assert!(dec.effort >= 0.0 && dec.effort <= params.endowment);
            if !dec.enter {
                assert_eq!(dec.effort, 0.0);
            }
        }
    }
}
