//! Welfare accounting and emission dynamics of the three-echelon chain.

use serde::{Deserialize, Serialize};

use super::SupplyChainState;

/// Cost of each advertisement quality level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdCosts {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

impl Default for AdCosts {
    fn default() -> Self {
        Self {
            low: 15.0,
            medium: 20.0,
            high: 25.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconParams {
    pub c_prod: f64,
    pub c_tech: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub c_tag: f64,
    pub c_env1: f64,
    pub c_env2: f64,
    pub e_init: f64,
    pub e_red: f64,
    pub e_base: f64,
    pub sigma_z: f64,
    pub ad_costs: AdCosts,
}

impl Default for EconParams {
    /// Unit costs sit at the centers of their sampling ranges.
    fn default() -> Self {
        Self {
            c_prod: 1.5,
            c_tech: 0.75,
            c_plus: 1.2,
            c_minus: 0.8,
            c_tag: 0.0,
            c_env1: 0.05,
            c_env2: 1.2,
            e_init: 8.0,
            e_red: 0.05,
            e_base: 3.0,
            sigma_z: 0.5,
            ad_costs: AdCosts::default(),
        }
    }
}

pub fn manufacturer_profit(theta: &[f64], s: &SupplyChainState, p: &EconParams) -> f64 {
    (s.ws - p.c_prod) * s.qut - 0.5 * p.c_tech * s.tech * s.tech - theta[0] * s.ems * s.qut
}

pub fn retailer_profit(s: &SupplyChainState) -> f64 {
    (s.rt - s.ws) * s.qut - s.mkt
}

pub fn consumer_surplus(theta: &[f64], s: &SupplyChainState) -> f64 {
    (s.wtp - s.rt + theta[1]) * s.qut
}

/// Net public spending: subsidy paid minus tax collected.
pub fn public_expenditure(theta: &[f64], s: &SupplyChainState) -> f64 {
    -theta[0] * s.ems * s.qut + theta[1] * s.qut
}

pub fn fiscal_cost(theta: &[f64], s: &SupplyChainState, p: &EconParams) -> f64 {
    let gap = public_expenditure(theta, s) - p.c_tag;
    gap.max(0.0).powf(p.c_plus) + (-gap).max(0.0).powf(p.c_minus)
}

/// `dFISC/dEXP`, zero at the kink.
fn fiscal_slope(theta: &[f64], s: &SupplyChainState, p: &EconParams) -> f64 {
    let gap = public_expenditure(theta, s) - p.c_tag;
    if gap > 0.0 {
        p.c_plus * gap.powf(p.c_plus - 1.0)
    } else if gap < 0.0 {
        -p.c_minus * (-gap).powf(p.c_minus - 1.0)
    } else {
        0.0
    }
}

pub fn externality(s: &SupplyChainState, p: &EconParams) -> f64 {
    p.c_env1 * (s.ems * s.qut).max(0.0).powf(p.c_env2)
}

pub fn welfare(theta: &[f64], s: &SupplyChainState, p: &EconParams) -> f64 {
    manufacturer_profit(theta, s, p) + retailer_profit(s) + consumer_surplus(theta, s)
}

/// Designer cost: negated welfare net of fiscal and environmental costs.
pub fn objective(theta: &[f64], s: &SupplyChainState, p: &EconParams) -> f64 {
    -(welfare(theta, s, p) - fiscal_cost(theta, s, p) - externality(s, p))
}

/// `∂F/∂θ` at a fixed state.
pub fn objective_gradient(theta: &[f64], s: &SupplyChainState, p: &EconParams) -> [f64; 2] {
    let slope = fiscal_slope(theta, s, p);
    [
        s.ems * s.qut - slope * s.ems * s.qut,
        -s.qut + slope * s.qut,
    ]
}

/// Next-round emissions after investing `tech` under shock `zeta`.
pub fn emission_step(ems: f64, tech: f64, zeta: f64, p: &EconParams) -> f64 {
    let delta = p.e_red * (ems * (1.0 + zeta) - p.e_base) * (1.0 + tech).ln();
    (ems - delta).max(0.0)
}

/// Fractional reduction relative to the initial emission level.
pub fn footprint(ems: f64, p: &EconParams) -> f64 {
    (p.e_init - ems) / p.e_init
}
