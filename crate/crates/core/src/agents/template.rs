use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("placeholder `{0}` has no binding")]
    MissingPlaceholder(String),
    #[error("binding `{0}` is not finite or is empty")]
    InvalidValue(String),
    #[error("placeholder `{0}` appears more than once in the template")]
    DuplicatePlaceholder(String),
    #[error("unterminated placeholder in {0} block")]
    Unterminated(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BindingValue {
    Number(f64),
    Text(String),
}

impl From<f64> for BindingValue {
    fn from(v: f64) -> Self {
        BindingValue::Number(v)
    }
}

impl From<&str> for BindingValue {
    fn from(v: &str) -> Self {
        BindingValue::Text(v.to_string())
    }
}

impl From<String> for BindingValue {
    fn from(v: String) -> Self {
        BindingValue::Text(v)
    }
}

/// Numbers are embedded as fixed-point with four decimals.
pub fn format_number(v: f64) -> String {
    format!("{v:.4}")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Binding(BTreeMap<String, BindingValue>);

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: impl Into<BindingValue>) -> Self {
        self.insert(name, value);
        self
    }

    pub fn insert(&mut self, name: &str, value: impl Into<BindingValue>) {
        self.0.insert(name.to_string(), value.into());
    }

    pub fn get(&self, name: &str) -> Option<&BindingValue> {
        self.0.get(name)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

const OPEN: &str = "{{";
const CLOSE: &str = "}}";

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Literal(String),
    Slot(String),
}

/// A fixed prompt in five blocks: role, attributes, design, context, and
/// output requirements. Only the `{{NAME}}` slots vary between calls.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    blocks: Vec<(&'static str, Vec<Piece>)>,
    placeholders: Vec<String>,
}

impl PromptTemplate {
    pub fn new(
        role: &str,
        attributes: &str,
        design: &str,
        context: &str,
        output: &str,
    ) -> Result<Self, RenderError> {
        let mut blocks = Vec::new();
        let mut seen = BTreeSet::new();
        let mut placeholders = Vec::new();
        for (name, text) in [
            ("role", role),
            ("attributes", attributes),
            ("design", design),
            ("context", context),
            ("output", output),
        ] {
            let pieces = parse(name, text)?;
            for p in &pieces {
                if let Piece::Slot(s) = p {
                    if !seen.insert(s.clone()) {
                        return Err(RenderError::DuplicatePlaceholder(s.clone()));
                    }
                    placeholders.push(s.clone());
                }
            }
            blocks.push((name, pieces));
        }
        Ok(Self { blocks, placeholders })
    }

    pub fn placeholders(&self) -> &[String] {
        &self.placeholders
    }

    pub fn render(&self, binding: &Binding) -> Result<String, RenderError> {
        render(self, binding)
    }
}

fn parse(block: &'static str, text: &str) -> Result<Vec<Piece>, RenderError> {
    let mut pieces = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find(OPEN) {
        if start > 0 {
            pieces.push(Piece::Literal(rest[..start].to_string()));
        }
        let after = &rest[start + OPEN.len()..];
        let end = after.find(CLOSE).ok_or(RenderError::Unterminated(block))?;
        pieces.push(Piece::Slot(after[..end].trim().to_string()));
        rest = &after[end + CLOSE.len()..];
    }
    if !rest.is_empty() {
        pieces.push(Piece::Literal(rest.to_string()));
    }
    Ok(pieces)
}

pub fn render(template: &PromptTemplate, binding: &Binding) -> Result<String, RenderError> {
    let mut blocks = Vec::with_capacity(template.blocks.len());
    for (_, pieces) in &template.blocks {
        let mut text = String::new();
        for piece in pieces {
            match piece {
                Piece::Literal(s) => text.push_str(s),
                Piece::Slot(name) => match binding.get(name) {
                    None => return Err(RenderError::MissingPlaceholder(name.clone())),
                    Some(BindingValue::Number(v)) if v.is_finite() => text.push_str(&format_number(*v)),
                    Some(BindingValue::Text(s)) if !s.is_empty() => text.push_str(s),
                    Some(_) => return Err(RenderError::InvalidValue(name.clone())),
                },
            }
        }
        if !text.trim().is_empty() {
            blocks.push(text.trim_end().to_string());
        }
    }
    for extra in binding.keys().filter(|k| !template.placeholders.iter().any(|p| p == k)) {
        log::warn!("binding `{extra}` matches no placeholder");
    }
    Ok(blocks.join("\n\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consumer() -> PromptTemplate {
        PromptTemplate::new(
            "You are a consumer.",
            "You are {{AWARENESS}}.",
            "The government pays a subsidy of {{SUBSIDY}} per unit.",
            "The retail price is {{RT}}.",
            "Answer in JSON.",
        )
        .unwrap()
    }

    #[test]
    fn substitutes_with_four_decimals() {
        let b = Binding::new().with("SUBSIDY", 0.5).with("RT", 13.0).with("AWARENESS", "eco-aware");
        let text = consumer().render(&b).unwrap();
        assert!(text.contains("subsidy of 0.5000 per unit"));
        assert!(text.contains("retail price is 13.0000"));
        assert!(!text.contains("{{"));
        assert_eq!(text, consumer().render(&b).unwrap());
    }

    #[test]
    fn missing_binding_names_the_placeholder() {
        let b = Binding::new().with("RT", 13.0).with("AWARENESS", "eco-aware");
        assert_eq!(
            consumer().render(&b).unwrap_err(),
            RenderError::MissingPlaceholder("SUBSIDY".into())
        );
    }

    #[test]
    fn rejects_non_finite_and_duplicates() {
        let b = Binding::new().with("SUBSIDY", f64::NAN).with("RT", 1.0).with("AWARENESS", "x");
        assert_eq!(consumer().render(&b).unwrap_err(), RenderError::InvalidValue("SUBSIDY".into()));
        let dup = PromptTemplate::new("{{A}}", "", "{{A}}", "", "");
        assert_eq!(dup.unwrap_err(), RenderError::DuplicatePlaceholder("A".into()));
        assert!(PromptTemplate::new("{{A", "", "", "", "").is_err());
    }

    #[test]
    fn extra_keys_are_tolerated() {
        let b = Binding::new()
            .with("SUBSIDY", 1.0)
            .with("RT", 1.0)
            .with("AWARENESS", "x")
            .with("UNUSED", 3.0);
        assert!(consumer().render(&b).is_ok());
    }
}
