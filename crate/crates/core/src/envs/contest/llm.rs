use super::{ContestDesign, ContestParams, Persona};
use crate::agents::{ActionSchema, Binding, PromptTemplate};

const ROLE: &str = "You are a participant in a one-round innovation contest against other participants. \
Each participant privately knows their own ability. Higher ability means each unit of effort costs you less.";

const ATTRIBUTES: &str = "About you: gender {{GENDER}}; risk tolerance {{RISK}} on a 1 to 7 scale \
(7 = very willing to take risks); competitiveness {{COMPETITIVENESS}} on a 1 to 7 scale; \
you answered {{CRT}} of 3 reasoning puzzles correctly.";

const DESIGN: &str = "Contest rules: there are {{N}} participants. Entering costs an entry fee of {{ENTRY_FEE}} points. \
Entrants then choose an effort level between 0 and {{ENDOWMENT}} points. If the highest effort among entrants \
is strictly greater than the reserve of {{RESERVE}}, that entrant wins the prize of {{PRIZE}} plus all entry fees \
paid. If no entrant exceeds the reserve, every entrant receives the shared prize of {{SHARED_PRIZE}}. \
Effort is never refunded. If you do not enter, you pay nothing and receive nothing.";

const CONTEXT: &str = "Your ability is {{ABILITY}} on a scale from {{ABILITY_LOW}} to {{ABILITY_HIGH}}. \
Decide whether to enter (Enter = 1) or not (Enter = 0), and if you enter, how much effort to exert.";

pub fn contestant_schema(endowment: f64) -> ActionSchema {
    ActionSchema::clamped(&[("Enter", 0.0, 1.0), ("Effort", 0.0, endowment)])
}

pub fn contestant_template() -> PromptTemplate {
    let output = contestant_schema(1.0).instructions().replace("between 0 and 1", "0 or 1").replace(
        "\"Effort\": <number between 0 and 1>",
        "\"Effort\": <number between 0 and your endowment>",
    );
    PromptTemplate::new(ROLE, ATTRIBUTES, DESIGN, CONTEXT, &output).expect("static contestant template")
}

pub(super) fn binding(design: &ContestDesign, params: &ContestParams, ability: f64, persona: &Persona) -> Binding {
    Binding::new()
        .with("GENDER", persona.gender.as_str())
        .with("RISK", f64::from(persona.risk_tolerance))
        .with("COMPETITIVENESS", f64::from(persona.competitiveness))
        .with("CRT", f64::from(persona.crt))
        .with("N", params.contestants as f64)
        .with("ENTRY_FEE", design.entry_fee)
        .with("ENDOWMENT", params.endowment)
        .with("RESERVE", design.reserve)
        .with("PRIZE", params.prize)
        .with("SHARED_PRIZE", design.shared_prize)
        .with("ABILITY", ability)
        .with("ABILITY_LOW", params.ability_low)
        .with("ABILITY_HIGH", params.ability_high)
}
