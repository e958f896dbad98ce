//! Manufacturer, retailer and consumer under a carbon tax and a purchase
//! subsidy. Each round runs manufacturer, emissions update, retailer,
//! advertisement, consumer, in that order.

pub mod econ;
mod llm;
mod rules;

pub use econ::{
    consumer_surplus, emission_step, externality, fiscal_cost, footprint, manufacturer_profit, objective,
    objective_gradient, public_expenditure, retailer_profit, welfare, AdCosts, EconParams,
};
pub use llm::{prompts, AgentPrompts};
pub use rules::RuleCoefficients;

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::agents::{Binding, LlmBackend};
use crate::design::{BoxDomain, DesignVector};
use crate::env::{EnvError, Environment, StateValue, StateView};
use crate::rng::StreamRng;

pub type ActionRange = (&'static str, f64, f64);

pub const ACTION_RANGES: [ActionRange; 6] = [
    ("TECH", 2.0, 5.0),
    ("WS", 6.0, 8.0),
    ("MKT", 20.0, 30.0),
    ("RT", 12.0, 15.0),
    ("WTP", 15.0, 18.0),
    ("QUT", 5.0, 15.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdQuality {
    Low,
    Medium,
    High,
}

impl AdQuality {
    /// Quality tier by which third of the marketing range the budget is in.
    pub fn from_budget(mkt: f64) -> Self {
        let (lo, hi) = (20.0, 30.0);
        let x = (mkt - lo) / (hi - lo);
        if x < 1.0 / 3.0 {
            AdQuality::Low
        } else if x < 2.0 / 3.0 {
            AdQuality::Medium
        } else {
            AdQuality::High
        }
    }

    pub fn level(self) -> usize {
        self as usize
    }

    pub fn cost(self, costs: &AdCosts) -> f64 {
        match self {
            AdQuality::Low => costs.low,
            AdQuality::Medium => costs.medium,
            AdQuality::High => costs.high,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AdQuality::Low => "low",
            AdQuality::Medium => "medium",
            AdQuality::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Collaboration {
    High,
    Moderate,
    Low,
}

impl Collaboration {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Awareness {
    EcoAware,
    EcoNeutral,
    EcoSkeptical,
}

impl Awareness {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupplyChainState {
    pub tech: f64,
    pub ws: f64,
    pub fp: f64,
    pub mkt: f64,
    pub rt: f64,
    pub ad: AdQuality,
    pub ad_text: String,
    pub wtp: f64,
    pub qut: f64,
    pub ems: f64,
    pub c_prod: f64,
    pub c_tech: f64,
    pub collaboration: Collaboration,
    pub awareness: Awareness,
    pub round: u64,
}

impl StateView for SupplyChainState {
    fn components(&self) -> Vec<(String, StateValue)> {
        let n = |k: &str, v: f64| (k.to_string(), StateValue::Number(v));
        vec![
            n("TECH", self.tech),
            n("WS", self.ws),
            n("FP", self.fp),
            n("MKT", self.mkt),
            n("RT", self.rt),
            ("AD".to_string(), StateValue::Text(self.ad.as_str().to_string())),
            n("WTP", self.wtp),
            n("QUT", self.qut),
            n("EMS", self.ems),
        ]
    }
}

#[derive(Debug, Clone)]
pub enum SupplyChainBackend {
    Rules(RuleCoefficients),
    Llm(LlmBackend),
}

/// Run-level settings. Unset costs and attributes are drawn when the
/// initial state is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupplyChainConfig {
    pub econ: EconParams,
    /// Draw `c_prod ~ 1 + U[0,1]` and `c_tech ~ U[0.5,1]` per run instead of
    /// using the values in `econ`.
    pub sample_costs: bool,
    pub collaboration: Option<Collaboration>,
    pub awareness: Option<Awareness>,
}

impl Default for SupplyChainConfig {
    fn default() -> Self {
        Self {
            econ: EconParams::default(),
            sample_costs: true,
            collaboration: None,
            awareness: None,
        }
    }
}

pub fn default_design_box() -> BoxDomain {
    BoxDomain::new(vec![0.0, 0.0], vec![1.0, 2.0]).expect("static box")
}

#[derive(Debug, Clone)]
pub struct SupplyChainEnv {
    config: SupplyChainConfig,
    domain: BoxDomain,
    backend: SupplyChainBackend,
}

impl SupplyChainEnv {
    pub fn new(config: SupplyChainConfig, domain: BoxDomain, backend: SupplyChainBackend) -> Result<Self, EnvError> {
        if domain.dim() != 2 {
            return Err(EnvError::Dimension {
                expected: 2,
                got: domain.dim(),
            });
        }
        if !(config.econ.sigma_z >= 0.0) {
            return Err(EnvError::InvalidState("sigma_z must be nonnegative".into()));
        }
        Ok(Self { config, domain, backend })
    }

    pub fn with_rules() -> Self {
        Self::new(
            SupplyChainConfig::default(),
            default_design_box(),
            SupplyChainBackend::Rules(RuleCoefficients::default()),
        )
        .expect("default supply chain is valid")
    }

    pub fn config(&self) -> &SupplyChainConfig {
        &self.config
    }

    /// Econ parameters with the state's realized unit costs.
    pub fn econ_for(&self, state: &SupplyChainState) -> EconParams {
        EconParams {
            c_prod: state.c_prod,
            c_tech: state.c_tech,
            ..self.config.econ
        }
    }
}

/// One round of the chain.
pub fn supplychain_step(
    state: &SupplyChainState,
    theta: &[f64],
    econ: &EconParams,
    backend: &SupplyChainBackend,
    rng: &mut StreamRng,
) -> Result<SupplyChainState, EnvError> {
    let (carbon_tax, subsidy) = (theta[0], theta[1]);
    let mut zeta_rng = StreamRng::seed_from_u64(rng.next_u64());
    let mut m_rng = StreamRng::seed_from_u64(rng.next_u64());
    let mut r_rng = StreamRng::seed_from_u64(rng.next_u64());
    let mut c_rng = StreamRng::seed_from_u64(rng.next_u64());
    let zeta = Normal::new(0.0, econ.sigma_z)
        .map_err(|e| EnvError::InvalidState(e.to_string()))?
        .sample(&mut zeta_rng);

    let mut next = state.clone();
    next.round += 1;

    match backend {
        SupplyChainBackend::Rules(rules) => {
            (next.ws, next.tech) = rules.manufacturer(carbon_tax, state.ems, state.qut, &mut m_rng);
            next.ems = emission_step(state.ems, next.tech, zeta, econ);
            next.fp = footprint(next.ems, econ);
            (next.mkt, next.rt) = rules.retailer(next.ws, next.fp, state.collaboration, &mut r_rng);
            next.ad = AdQuality::from_budget(next.mkt);
            next.ad_text = format!(
                "{} quality ad: price {:.2}, carbon footprint down {:.1}%",
                next.ad.as_str(),
                next.rt,
                100.0 * next.fp
            );
            (next.wtp, next.qut) =
                rules.consumer(next.rt, next.ad, subsidy, next.fp, state.awareness, &mut c_rng);
        }
        SupplyChainBackend::Llm(llm) => {
            let p = prompts();
            let m = llm.act(
                &p.manufacturer,
                &Binding::new()
                    .with("C_PROD", econ.c_prod)
                    .with("C_TECH", econ.c_tech)
                    .with("CARBON_TAX", carbon_tax)
                    .with("LAST_WS", state.ws)
                    .with("LAST_TECH", state.tech)
                    .with("LAST_EMS", state.ems)
                    .with("LAST_QUT", state.qut),
                &p.manufacturer_schema,
            )?;
            next.ws = m.get("WS");
            next.tech = m.get("TECH");
            next.ems = emission_step(state.ems, next.tech, zeta, econ);
            next.fp = footprint(next.ems, econ);

            let r = llm.act(
                &p.retailer,
                &Binding::new()
                    .with("COLLABORATION", llm::collaboration_text(state.collaboration))
                    .with("WS", next.ws)
                    .with("FP", next.fp)
                    .with("LAST_MKT", state.mkt)
                    .with("LAST_RT", state.rt)
                    .with("LAST_QUT", state.qut),
                &p.retailer_schema,
            )?;
            next.mkt = r.get("MKT");
            next.rt = r.get("RT");
            next.ad = AdQuality::from_budget(next.mkt);
            let ad_prompt = p
                .ad_tool
                .render(
                    &Binding::new()
                        .with("AD_QUALITY", next.ad.as_str())
                        .with("MKT", next.mkt)
                        .with("RT", next.rt)
                        .with("FP", next.fp),
                )
                .map_err(|e| EnvError::Agent(e.into()))?;
            next.ad_text = llm.chat(&ad_prompt).map_err(|e| EnvError::Agent(e.into()))?.trim().to_string();

            let c = llm.act(
                &p.consumer,
                &Binding::new()
                    .with("AWARENESS", llm::awareness_text(state.awareness))
                    .with("SUBSIDY", subsidy)
                    .with("RT", next.rt)
                    .with("AD", next.ad_text.as_str())
                    .with("LAST_WTP", state.wtp)
                    .with("LAST_QUT", state.qut),
                &p.consumer_schema,
            )?;
            next.wtp = c.get("WTP");
            next.qut = c.get("QUT");
        }
    }
    Ok(next)
}

impl Environment for SupplyChainEnv {
    type State = SupplyChainState;

    fn name(&self) -> &str {
        "supply_chain"
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn design_labels(&self) -> Vec<String> {
        vec!["carbon_tax".into(), "subsidy".into()]
    }

    fn initial_state(&self, rng: &mut StreamRng) -> Result<SupplyChainState, EnvError> {
        let econ = &self.config.econ;
        let (c_prod, c_tech) = if self.config.sample_costs {
            (1.0 + rng.random::<f64>(), rng.random_range(0.5..1.0))
        } else {
            (econ.c_prod, econ.c_tech)
        };
        let pick = rng.random_range(0..3usize);
        let collaboration = self
            .config
            .collaboration
            .unwrap_or([Collaboration::High, Collaboration::Moderate, Collaboration::Low][pick]);
        let pick = rng.random_range(0..3usize);
        let awareness = self
            .config
            .awareness
            .unwrap_or([Awareness::EcoAware, Awareness::EcoNeutral, Awareness::EcoSkeptical][pick]);
        Ok(SupplyChainState {
            tech: 2.0,
            ws: 7.0,
            fp: 0.0,
            mkt: 25.0,
            rt: 13.5,
            ad: AdQuality::Medium,
            ad_text: String::new(),
            wtp: 16.5,
            qut: 10.0,
            ems: econ.e_init,
            c_prod,
            c_tech,
            collaboration,
            awareness,
            round: 0,
        })
    }

    fn step(&self, state: &SupplyChainState, theta: &DesignVector, rng: &mut StreamRng) -> Result<SupplyChainState, EnvError> {
        self.check_design(theta)?;
        supplychain_step(state, theta.as_slice(), &self.econ_for(state), &self.backend, rng)
    }

    fn evaluate(&self, theta: &DesignVector, state: &SupplyChainState) -> f64 {
        objective(theta.as_slice(), state, &self.econ_for(state))
    }

    fn explicit_gradient(&self, theta: &DesignVector, state: &SupplyChainState) -> Option<Vec<f64>> {
        Some(objective_gradient(theta.as_slice(), state, &self.econ_for(state)).to_vec())
    }

    fn has_explicit_gradient(&self) -> bool {
        true
    }

    fn queries_per_step(&self) -> u64 {
        3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_state() -> SupplyChainState {
        SupplyChainState {
            tech: 3.0,
            ws: 7.0,
            fp: 0.0,
            mkt: 25.0,
            rt: 13.0,
            ad: AdQuality::High,
            ad_text: String::new(),
            wtp: 16.0,
            qut: 10.0,
            ems: 8.0,
            c_prod: 1.5,
            c_tech: 0.75,
            collaboration: Collaboration::Moderate,
            awareness: Awareness::EcoNeutral,
            round: 0,
        }
    }

    fn p() -> EconParams {
        EconParams::default()
    }

    const TH: [f64; 2] = [0.1, 0.5];

    #[test]
    fn component_examples() {
        let s = worked_state();
        assert!((manufacturer_profit(&TH, &s, &p()) - 43.625).abs() < 1e-12);
        assert!((retailer_profit(&s) - 35.0).abs() < 1e-12);
        assert!((consumer_surplus(&TH, &s) - 35.0).abs() < 1e-12);
        assert!((public_expenditure(&TH, &s) + 3.0).abs() < 1e-12);
        assert!((fiscal_cost(&TH, &s, &p()) - 3f64.powf(0.8)).abs() < 1e-12);
        assert!((externality(&s, &p()) - 0.05 * 80f64.powf(1.2)).abs() < 1e-12);
    }

    #[test]
    fn overspend_branch() {
        // EXP = -0.1·8·10 + 1.1·10 = 3
        let s = worked_state();
        let th = [0.1, 1.1];
        assert!((public_expenditure(&th, &s) - 3.0).abs() < 1e-12);
        assert!((fiscal_cost(&th, &s, &p()) - 3f64.powf(1.2)).abs() < 1e-12);
    }

    #[test]
    fn objective_composes_parts() {
        let s = worked_state();
        let parts = manufacturer_profit(&TH, &s, &p()) + retailer_profit(&s) + consumer_surplus(&TH, &s)
            - fiscal_cost(&TH, &s, &p())
            - externality(&s, &p());
        assert_eq!(objective(&TH, &s, &p()), -parts);
    }

    #[test]
    fn trivial_zero_cases() {
        let mut s = worked_state();
        s.ws = 1.5;
        s.tech = 0.0;
        assert_eq!(manufacturer_profit(&[0.0, 0.0], &s, &p()), 8.0 * 0.0 + 0.0);
        s.qut = 0.0;
        assert_eq!(externality(&s, &p()), 0.0);
        assert_eq!(retailer_profit(&s), -25.0);
    }

    #[test]
    fn emissions() {
        assert_eq!(emission_step(8.0, 0.0, 0.3, &p()), 8.0);
        let next = emission_step(8.0, 3.0, 0.0, &p());
        assert!((next - (8.0 - 0.25 * 4f64.ln())).abs() < 1e-12);
        let huge = EconParams { e_red: 5.0, ..p() };
        assert_eq!(emission_step(8.0, 5.0, 0.0, &huge), 0.0);
    }

    #[test]
    fn ad_terciles() {
        assert_eq!(AdQuality::from_budget(20.0), AdQuality::Low);
        assert_eq!(AdQuality::from_budget(25.0), AdQuality::Medium);
        assert_eq!(AdQuality::from_budget(30.0), AdQuality::High);
        assert_eq!(AdQuality::High.cost(&AdCosts::default()), 25.0);
    }

    #[test]
    fn rule_round_is_in_range_and_replayable() {
        let env = SupplyChainEnv::with_rules();
        let theta = DesignVector::new(vec![0.3, 1.0]).unwrap();
        let run = || {
            let mut rng = StreamRng::seed_from_u64(8);
            let mut s = env.initial_state(&mut rng).unwrap();
            let mut all = Vec::new();
            for _ in 0..30 {
                s = env.step(&s, &theta, &mut rng).unwrap();
                all.push(s.clone());
            }
            all
        };
        let a = run();
        assert_eq!(a, run());
        for s in &a {
            for (name, lo, hi) in ACTION_RANGES {
                let v = s.numeric(name).unwrap();
                assert!(v >= lo && v <= hi, "{name} = {v}");
            }
            assert!(s.ems >= 0.0);
        }
    }
}
