//! Linear-response stand-ins for the three model-backed agents. Every
//! coefficient lives in [`RuleCoefficients`].

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AdQuality, Awareness, Collaboration, ACTION_RANGES};
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleCoefficients {
    pub tech_base: f64,
    /// TECH per unit of per-product tax burden `θ1 · EMS`.
    pub tech_per_tax: f64,
    pub ws_base: f64,
    pub ws_pass_through: f64,
    /// WS per unit of last-round demand above `qut_base`.
    pub ws_per_demand: f64,
    pub mkt_base: f64,
    /// MKT uplift for high, moderate, low willingness to collaborate.
    pub mkt_collaboration: [f64; 3],
    pub mkt_per_footprint: f64,
    pub rt_markup: f64,
    pub rt_collaboration_discount: [f64; 3],
    pub wtp_base: f64,
    /// WTP shift for eco-aware, eco-neutral, eco-skeptical consumers.
    pub wtp_awareness: [f64; 3],
    pub wtp_per_ad_level: f64,
    pub qut_base: f64,
    pub qut_reference_price: f64,
    pub qut_per_price: f64,
    pub qut_per_subsidy: f64,
    pub qut_subsidy_awareness: [f64; 3],
    /// QUT uplift for low, medium, high ad quality.
    pub qut_ad: [f64; 3],
    pub qut_per_footprint: f64,
    pub qut_footprint_awareness: [f64; 3],
    pub jitter_sd: f64,
}

impl Default for RuleCoefficients {
    fn default() -> Self {
        Self {
            tech_base: 2.5,
            tech_per_tax: 0.25,
            ws_base: 6.6,
            ws_pass_through: 0.15,
            ws_per_demand: 0.05,
            mkt_base: 22.0,
            mkt_collaboration: [6.0, 3.0, 0.0],
            mkt_per_footprint: 5.0,
            rt_markup: 5.5,
            rt_collaboration_discount: [0.5, 0.25, 0.0],
            wtp_base: 16.0,
            wtp_awareness: [1.0, 0.0, -0.75],
            wtp_per_ad_level: 0.4,
            qut_base: 10.0,
            qut_reference_price: 13.5,
            qut_per_price: 1.5,
            qut_per_subsidy: 2.5,
            qut_subsidy_awareness: [1.3, 1.0, 0.7],
            qut_ad: [0.0, 0.75, 1.5],
            qut_per_footprint: 4.0,
            qut_footprint_awareness: [1.0, 0.5, 0.0],
            jitter_sd: 0.1,
        }
    }
}

fn clamp(name: &str, v: f64) -> f64 {
    let (_, lo, hi) = ACTION_RANGES.iter().find(|r| r.0 == name).expect("known action");
    v.clamp(*lo, *hi)
}

impl RuleCoefficients {
    fn noise(&self, rng: &mut StreamRng) -> f64 {
        Normal::new(0.0, self.jitter_sd).expect("nonnegative jitter").sample(rng)
    }

    /// `(WS, TECH)` from the tax and last round's emissions and demand.
    pub fn manufacturer(&self, carbon_tax: f64, last_ems: f64, last_qut: f64, rng: &mut StreamRng) -> (f64, f64) {
        let (n_ws, n_tech) = (self.noise(rng), self.noise(rng));
        let burden = carbon_tax * last_ems;
        let tech = self.tech_base + self.tech_per_tax * burden + n_tech;
        let ws = self.ws_base + self.ws_pass_through * burden + self.ws_per_demand * (last_qut - self.qut_base) + n_ws;
        (clamp("WS", ws), clamp("TECH", tech))
    }

    /// `(MKT, RT)` from the wholesale price and disclosed footprint.
    pub fn retailer(&self, ws: f64, fp: f64, collaboration: Collaboration, rng: &mut StreamRng) -> (f64, f64) {
        let (n_mkt, n_rt) = (self.noise(rng), self.noise(rng));
        let c = collaboration.index();
        let mkt = self.mkt_base + self.mkt_collaboration[c] + self.mkt_per_footprint * fp + n_mkt;
        let rt = ws + self.rt_markup - self.rt_collaboration_discount[c] + n_rt;
        (clamp("MKT", mkt), clamp("RT", rt))
    }

    /// `(WTP, QUT)` from price, ad, subsidy and footprint.
    pub fn consumer(
        &self,
        rt: f64,
        ad: AdQuality,
        subsidy: f64,
        fp: f64,
        awareness: Awareness,
        rng: &mut StreamRng,
    ) -> (f64, f64) {
        let (n_wtp, n_qut) = (self.noise(rng), self.noise(rng));
        let a = awareness.index();
        let wtp = self.wtp_base + self.wtp_awareness[a] + self.wtp_per_ad_level * ad.level() as f64 + n_wtp;
        let qut = self.qut_base - self.qut_per_price * (rt - self.qut_reference_price)
            + self.qut_per_subsidy * self.qut_subsidy_awareness[a] * subsidy
            + self.qut_ad[ad.level()]
            + self.qut_per_footprint * self.qut_footprint_awareness[a] * fp
            + n_qut;
        (clamp("WTP", wtp), clamp("QUT", qut))
    }
}
