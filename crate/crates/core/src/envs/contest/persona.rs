use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ContestError;
use crate::rng::StreamRng;

const BUILTIN: &str = include_str!("../../../fixtures/personas.csv");

/// A contestant profile: self-reported risk tolerance and competitiveness on
/// 1 to 7 scales, and a cognitive-reflection score from 0 to 3.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub gender: String,
    pub risk_tolerance: u8,
    pub competitiveness: u8,
    pub crt: u8,
}

impl Persona {
    pub fn validate(&self) -> Result<(), ContestError> {
        let bad = |what: &str, v: u8| Err(ContestError::Persona(format!("{what} = {v} out of range")));
        if !(1..=7).contains(&self.risk_tolerance) {
            return bad("risk_tolerance", self.risk_tolerance);
        }
        if !(1..=7).contains(&self.competitiveness) {
            return bad("competitiveness", self.competitiveness);
        }
        if self.crt > 3 {
            return bad("crt", self.crt);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonaPool {
    personas: Vec<Persona>,
}

impl PersonaPool {
    pub fn new(personas: Vec<Persona>) -> Result<Self, ContestError> {
        if personas.is_empty() {
            return Err(ContestError::Persona("empty persona pool".into()));
        }
        for p in &personas {
            p.validate()?;
        }
        Ok(Self { personas })
    }

    /// The pool shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_reader(BUILTIN.as_bytes()).expect("built-in persona fixture is valid")
    }

    /// CSV with header `gender,risk_tolerance,competitiveness,crt`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, ContestError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let personas = rdr.deserialize().collect::<Result<Vec<Persona>, _>>()?;
        Self::new(personas)
    }

    pub fn from_path(path: &Path) -> Result<Self, ContestError> {
        let file = std::fs::File::open(path).map_err(|e| ContestError::Persona(format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn len(&self) -> usize {
        self.personas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.personas.is_empty()
    }

    pub fn personas(&self) -> &[Persona] {
        &self.personas
    }

    pub fn draw(&self, rng: &mut StreamRng) -> &Persona {
        &self.personas[rng.random_range(0..self.personas.len())]
    }
}
