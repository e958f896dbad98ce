use std::sync::OnceLock;

use super::{ActionRange, Awareness, Collaboration, ACTION_RANGES};
use crate::agents::{ActionSchema, PromptTemplate};

fn schema_for(names: [&str; 2]) -> ActionSchema {
    let pick = |n: &str| -> ActionRange { *ACTION_RANGES.iter().find(|r| r.0 == n).expect("known action") };
    ActionSchema::clamped(&[pick(names[0]), pick(names[1])])
}

pub struct AgentPrompts {
    pub manufacturer: PromptTemplate,
    pub manufacturer_schema: ActionSchema,
    pub retailer: PromptTemplate,
    pub retailer_schema: ActionSchema,
    pub consumer: PromptTemplate,
    pub consumer_schema: ActionSchema,
    pub ad_tool: PromptTemplate,
}

pub fn prompts() -> &'static AgentPrompts {
    static CELL: OnceLock<AgentPrompts> = OnceLock::new();
    CELL.get_or_init(build)
}

fn build() -> AgentPrompts {
    let manufacturer_schema = schema_for(["WS", "TECH"]);
    let retailer_schema = schema_for(["MKT", "RT"]);
    let consumer_schema = schema_for(["WTP", "QUT"]);

    let manufacturer = PromptTemplate::new(
        "You are the manufacturer in a supply chain. You sell a product to a retailer at a wholesale price (WS) \
and decide how much to invest in low-carbon technology (TECH). Technology investment lowers emissions per unit \
but its cost grows quadratically.",
        "Your unit production cost is {{C_PROD}} and your technology cost coefficient is {{C_TECH}}.",
        "Government policy: a carbon tax of {{CARBON_TAX}} per unit of emissions per product unit sold.",
        "Last round: you set WS = {{LAST_WS}} and TECH = {{LAST_TECH}}; emissions per unit were {{LAST_EMS}}; \
the consumer bought {{LAST_QUT}} units.",
        &manufacturer_schema.instructions(),
    )
    .expect("static manufacturer template");

    let retailer = PromptTemplate::new(
        "You are the retailer in a supply chain. You buy from the manufacturer at the wholesale price and sell to \
consumers. You choose the marketing budget (MKT) that funds an advertisement and the retail price (RT).",
        "Your willingness to collaborate with the manufacturer on promoting low-carbon technology is {{COLLABORATION}}.",
        "The manufacturer's wholesale price this round is {{WS}}.",
        "The manufacturer disclosed a carbon footprint reduction of {{FP}} relative to baseline. Last round you set \
MKT = {{LAST_MKT}} and RT = {{LAST_RT}}; the consumer bought {{LAST_QUT}} units.",
        &retailer_schema.instructions(),
    )
    .expect("static retailer template");

    let ad_tool = PromptTemplate::new(
        "Write a short product advertisement (at most four sentences) for a retailer.",
        "Ad quality tier: {{AD_QUALITY}} (budget {{MKT}}).",
        "Retail price: {{RT}}.",
        "Carbon footprint reduction versus baseline: {{FP}}.",
        "Reply with the advertisement text only.",
    )
    .expect("static ad template");

    let consumer = PromptTemplate::new(
        "You are a consumer deciding how much you would pay for a product (WTP) and how many units to buy (QUT).",
        "Your sustainability awareness: {{AWARENESS}}.",
        "The government pays a subsidy of {{SUBSIDY}} per unit you buy.",
        "The retail price is {{RT}}. The retailer's advertisement reads:\n{{AD}}\nLast round you were willing to pay \
{{LAST_WTP}} and bought {{LAST_QUT}} units.",
        &consumer_schema.instructions(),
    )
    .expect("static consumer template");

    AgentPrompts {
        manufacturer,
        manufacturer_schema,
        retailer,
        retailer_schema,
        consumer,
        consumer_schema,
        ad_tool,
    }
}

pub(super) fn collaboration_text(c: Collaboration) -> &'static str {
    match c {
        Collaboration::High => "high",
        Collaboration::Moderate => "moderate",
        Collaboration::Low => "low",
    }
}

pub(super) fn awareness_text(a: Awareness) -> &'static str {
    match a {
        Awareness::EcoAware => "eco-aware",
        Awareness::EcoNeutral => "eco-neutral",
        Awareness::EcoSkeptical => "eco-skeptical",
    }
}
