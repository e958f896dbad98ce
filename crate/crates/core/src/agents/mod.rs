//! Semantic interface between numeric designs/states and text-native agents:
//! fixed prompt templates with numeric slots, structured extraction of the
//! reply, and the chat transport underneath.

mod extract;
mod template;
mod transport;

pub use extract::{extract, ActionSchema, ExtractError, ExtractFailure, ExtractedAction, FieldSpec, RangePolicy};
pub use template::{format_number, render, Binding, BindingValue, PromptTemplate, RenderError};
pub use transport::{
    chat, parse_completion, prompt_hash, ChatMessage, ChatRequest, ChatTransport, FixtureTransport, FnTransport,
    HttpTransport, ScriptedTransport, TransportConfig, TransportError,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("no parseable action after {attempts} attempts: {last}")]
    ParseExhausted { attempts: u32, last: ExtractError },
}

impl AgentError {
    pub fn is_extraction(&self) -> bool {
        matches!(self, AgentError::ParseExhausted { .. })
    }

    /// Raw model output behind a parse failure.
    pub fn raw_response(&self) -> Option<&str> {
        match self {
            AgentError::ParseExhausted { last, .. } => Some(&last.raw),
            _ => None,
        }
    }
}

/// Render, query, and extract. Unparseable replies are re-queried with a
/// format reminder appended, up to `cfg.parse_retries` extra times.
pub fn act(
    template: &PromptTemplate,
    binding: &Binding,
    schema: &ActionSchema,
    cfg: &TransportConfig,
    transport: &dyn ChatTransport,
) -> Result<ExtractedAction, AgentError> {
    let prompt = template.render(binding)?;
    let mut attempt = 0;
    loop {
        let text = if attempt == 0 {
            chat(cfg, transport, &prompt)?
        } else {
            chat(cfg, transport, &format!("{prompt}\n\n{}", schema.reminder()))?
        };
        match extract(&text, schema) {
            Ok(action) => return Ok(action),
            Err(e) if attempt >= cfg.parse_retries => {
                return Err(AgentError::ParseExhausted {
                    attempts: attempt + 1,
                    last: e,
                })
            }
            Err(e) => log::warn!("unparseable agent reply ({}); re-asking", e.failure),
        }
        attempt += 1;
    }
}

/// Transport plus its settings, shared by every model-backed agent.
#[derive(Clone)]
pub struct LlmBackend {
    pub config: TransportConfig,
    pub transport: std::sync::Arc<dyn ChatTransport>,
}

impl LlmBackend {
    pub fn new(config: TransportConfig, transport: std::sync::Arc<dyn ChatTransport>) -> Self {
        Self { config, transport }
    }

    pub fn http(config: TransportConfig) -> Self {
        let transport = std::sync::Arc::new(HttpTransport::new(&config));
        Self { config, transport }
    }

    pub fn act(
        &self,
        template: &PromptTemplate,
        binding: &Binding,
        schema: &ActionSchema,
    ) -> Result<ExtractedAction, AgentError> {
        act(template, binding, schema, &self.config, self.transport.as_ref())
    }

    pub fn chat(&self, prompt: &str) -> Result<String, TransportError> {
        chat(&self.config, self.transport.as_ref(), prompt)
    }
}

impl std::fmt::Debug for LlmBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmBackend").field("config", &self.config).finish_non_exhaustive()
    }
}
