use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangePolicy {
    Clamp,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub policy: RangePolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSchema {
    fields: Vec<FieldSpec>,
}

impl ActionSchema {
    /// Panics on an empty schema or an empty range; schemas are static.
    pub fn new(fields: Vec<FieldSpec>) -> Self {
        assert!(!fields.is_empty(), "action schema needs at least one field");
        for f in &fields {
            assert!(f.min <= f.max, "empty range for field {}", f.name);
        }
        Self { fields }
    }

    pub fn clamped(fields: &[(&str, f64, f64)]) -> Self {
        Self::new(
            fields
                .iter()
                .map(|&(name, min, max)| FieldSpec {
                    name: name.to_string(),
                    min,
                    max,
                    policy: RangePolicy::Clamp,
                })
                .collect(),
        )
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    /// The output-requirements block asking for this schema.
    pub fn instructions(&self) -> String {
        let body: Vec<String> = self
            .fields
            .iter()
            .map(|f| format!("\"{}\": <number between {} and {}>", f.name, f.min, f.max))
            .chain(std::iter::once("\"Reason\": <one or two sentences>".to_string()))
            .collect();
        format!(
            "Reply with your decision as a JSON object inside a fenced code block, exactly in this format:\n```json\n{{{}}}\n```",
            body.join(", ")
        )
    }

    pub fn reminder(&self) -> String {
        let names: Vec<&str> = self.fields.iter().map(|f| f.name.as_str()).collect();
        format!(
            "Reminder: your previous answer could not be read. Respond with exactly one ```json fenced block containing the fields {} and \"Reason\".",
            names.join(", ")
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedAction {
    pub values: BTreeMap<String, f64>,
    pub reason: String,
}

impl ExtractedAction {
    pub fn get(&self, name: &str) -> f64 {
        self.values[name]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExtractFailure {
    NoFencedBlock,
    Unparseable(String),
    MissingField(String),
    NotNumeric(String),
    OutOfRange { field: String, value: f64, min: f64, max: f64 },
}

impl fmt::Display for ExtractFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtractFailure::NoFencedBlock => f.write_str("no fenced block in response"),
            ExtractFailure::Unparseable(e) => write!(f, "fenced block is not a JSON object: {e}"),
            ExtractFailure::MissingField(n) => write!(f, "missing field `{n}`"),
            ExtractFailure::NotNumeric(n) => write!(f, "field `{n}` is not a finite number"),
            ExtractFailure::OutOfRange { field, value, min, max } => {
                write!(f, "field `{field}` = {value} outside [{min}, {max}]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{failure}")]
pub struct ExtractError {
    pub failure: ExtractFailure,
    pub raw: String,
}

/// Content of the last complete ``` fenced block, without its info string.
fn last_fenced_block(raw: &str) -> Option<&str> {
    let mut fences = Vec::new();
    let mut from = 0;
    while let Some(i) = raw[from..].find("```") {
        fences.push(from + i);
        from += i + 3;
    }
    let mut last = None;
    for pair in fences.chunks_exact(2) {
        let inner = &raw[pair[0] + 3..pair[1]];
        // Drop an info string such as `json` on the opening line.
        let body = match inner.find('\n') {
            Some(nl) if !inner[..nl].trim_start().starts_with('{') => &inner[nl + 1..],
            _ => inner,
        };
        last = Some(body);
    }
    last
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
        _ => None,
    }
    .filter(|x: &f64| x.is_finite())
}

pub fn extract(raw: &str, schema: &ActionSchema) -> Result<ExtractedAction, ExtractError> {
    let fail = |failure| ExtractError { failure, raw: raw.to_string() };
    let block = last_fenced_block(raw).ok_or_else(|| fail(ExtractFailure::NoFencedBlock))?;
    let object: serde_json::Map<String, Value> = serde_json::from_str(block.trim())
        .map_err(|e| fail(ExtractFailure::Unparseable(e.to_string())))?;

    let mut values = BTreeMap::new();
    for spec in schema.fields() {
        let v = object
            .get(&spec.name)
            .ok_or_else(|| fail(ExtractFailure::MissingField(spec.name.clone())))?;
        let x = as_number(v).ok_or_else(|| fail(ExtractFailure::NotNumeric(spec.name.clone())))?;
        let x = if (spec.min..=spec.max).contains(&x) {
            x
        } else {
            match spec.policy {
                RangePolicy::Clamp => x.clamp(spec.min, spec.max),
                RangePolicy::Reject => {
                    return Err(fail(ExtractFailure::OutOfRange {
                        field: spec.name.clone(),
                        value: x,
                        min: spec.min,
                        max: spec.max,
                    }))
                }
            }
        };
        values.insert(spec.name.clone(), x);
    }
    let reason = match object.get("Reason") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
        None => String::new(),
    };
    Ok(ExtractedAction { values, reason })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consumer() -> ActionSchema {
        ActionSchema::clamped(&[("WTP", 15.0, 18.0), ("QUT", 5.0, 15.0)])
    }

    #[test]
    fn happy_path() {
        let raw = "Thinking...\n```json\n{\"WTP\": 16, \"QUT\": 10, \"Reason\": \"fair price\"}\n```\n";
        let a = extract(raw, &consumer()).unwrap();
        assert_eq!(a.get("WTP"), 16.0);
        assert_eq!(a.get("QUT"), 10.0);
        assert_eq!(a.reason, "fair price");
    }

    #[test]
    fn clamps_under_clamp_policy() {
        let raw = "```json\n{\"WTP\": 16, \"QUT\": 99, \"Reason\": \"\"}\n```";
        assert_eq!(extract(raw, &consumer()).unwrap().get("QUT"), 15.0);
    }

    #[test]
    fn rejects_under_reject_policy() {
        let schema = ActionSchema::new(vec![FieldSpec {
            name: "QUT".into(),
            min: 5.0,
            max: 15.0,
            policy: RangePolicy::Reject,
        }]);
        let err = extract("```{\"QUT\": 99}```", &schema).unwrap_err();
        assert!(matches!(err.failure, ExtractFailure::OutOfRange { .. }));
        assert!(err.to_string().contains("QUT"));
    }

    #[test]
    fn failures_carry_raw_text() {
        let err = extract("I would buy ten units.", &consumer()).unwrap_err();
        assert_eq!(err.failure, ExtractFailure::NoFencedBlock);
        assert_eq!(err.raw, "I would buy ten units.");

        let err = extract("```json\n{\"WTP\": 16,\n```", &consumer()).unwrap_err();
        assert!(matches!(err.failure, ExtractFailure::Unparseable(_)));

        let err = extract("```json\n{\"WTP\": 16}\n```", &consumer()).unwrap_err();
        assert_eq!(err.failure, ExtractFailure::MissingField("QUT".into()));

        let err = extract("```json\n{\"WTP\": \"lots\", \"QUT\": 5}\n```", &consumer()).unwrap_err();
        assert_eq!(err.failure, ExtractFailure::NotNumeric("WTP".into()));
    }

    #[test]
    fn uses_the_last_block_and_accepts_numeric_strings() {
        let raw = "```json\n{\"WTP\": 15, \"QUT\": 5}\n```\nOn reflection:\n```\n{\"WTP\": \"17.5\", \"QUT\": 12}\n```";
        let a = extract(raw, &consumer()).unwrap();
        assert_eq!((a.get("WTP"), a.get("QUT")), (17.5, 12.0));
        assert_eq!(a.reason, "");
    }

    #[test]
    fn single_line_block() {
        let a = extract("```{\"WTP\": 15, \"QUT\": 6, \"Reason\": \"ok\"}```", &consumer()).unwrap();
        assert_eq!(a.get("QUT"), 6.0);
    }
}
