//! Model access for every agent module.
//!
//! Requests are built from prompt templates ([`render_prompt`]) and sent to a
//! [`ChatBackend`]: either a scripted rule list, used for deterministic runs
//! and fault injection, or an OpenAI-style chat-completion endpoint.

mod http;
mod prompt;
pub mod raster;
mod request;
mod scripted;

use thiserror::Error;

pub use http::{wire_body, GatewayConfig, HttpBackend};
pub use prompt::{render_prompt, PromptContext, Template, Templates, DEFAULT_MAX_TOKENS};
pub use request::{ChatRequest, Message, Part, RoleTag, Speaker};
pub use scripted::{RuleMatch, ScriptedBackend, ScriptedRule, ScriptedSession};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("no scripted rule matches the {role} request")]
    NoScriptedMatch { role: RoleTag },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("{role} prompt is missing context field `{field}`")]
    MissingContextField { role: RoleTag, field: String },
    #[error("template {name}: {message}")]
    Template { name: String, message: String },
    #[error("gateway configuration: {0}")]
    Config(String),
}

/// One request in, one reply out.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<String, GatewayError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for Box<T> {
    fn complete(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(req)
    }
}
