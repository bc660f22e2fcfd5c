use std::path::Path;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use super::raster::encode_png;
use super::request::{ChatRequest, Part, Speaker};
use super::{ChatBackend, GatewayError};

const EXCERPT_CHARS: usize = 300;

/// Endpoint settings. Read from TOML, then overridden by `GATEWAY_ENDPOINT`,
/// `GATEWAY_MODEL` and `GATEWAY_KEY`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    /// Base URL; `/chat/completions` is appended.
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    60
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig { endpoint: String::new(), model: String::new(), api_key: None, timeout_secs: default_timeout() }
    }
}

impl GatewayConfig {
    pub fn from_toml(text: &str) -> Result<Self, GatewayError> {
        toml::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))
    }

    /// Loads the optional file, applies overrides from `env`, and checks
    /// that an endpoint and model are set.
    pub fn load(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, GatewayError> {
        let mut cfg = match path {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|e| GatewayError::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        if let Some(v) = env("GATEWAY_ENDPOINT") {
            cfg.endpoint = v;
        }
        if let Some(v) = env("GATEWAY_MODEL") {
            cfg.model = v;
        }
        if let Some(v) = env("GATEWAY_KEY") {
            cfg.api_key = Some(v);
        }
        if cfg.endpoint.is_empty() || cfg.model.is_empty() {
            return Err(GatewayError::Config("endpoint and model must be set".into()));
        }
        Ok(cfg)
    }

    pub fn from_env(path: Option<&Path>) -> Result<Self, GatewayError> {
        Self::load(path, |k| std::env::var(k).ok())
    }

    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.endpoint.trim_end_matches('/'))
    }
}

/// Chat-completion body: text parts as `text`, screenshots as base64 PNG
/// `image_url` parts.
pub fn wire_body(req: &ChatRequest, model: &str) -> Json {
    let messages: Vec<Json> = req
        .messages
        .iter()
        .map(|m| {
            let role = match m.speaker {
                Speaker::System => "system",
                Speaker::User => "user",
            };
            let content: Vec<Json> = m
                .parts
                .iter()
                .map(|p| match p {
                    Part::Text(t) => json!({"type": "text", "text": t}),
                    Part::Image(img) => {
                        let b64 = base64::engine::general_purpose::STANDARD.encode(encode_png(img));
                        json!({"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{b64}")}})
                    }
                })
                .collect();
            json!({"role": role, "content": content})
        })
        .collect();
    json!({
        "model": model,
        "messages": messages,
        "max_tokens": req.max_tokens,
        "temperature": req.temperature,
    })
}

fn first_choice_text(body: &Json) -> Option<String> {
    let content = body.get("choices")?.get(0)?.get("message")?.get("content")?;
    match content {
        Json::String(s) => Some(s.clone()),
        Json::Array(parts) => Some(parts.iter().filter_map(|p| p.get("text")?.as_str()).collect::<Vec<_>>().join("")),
        _ => None,
    }
}

fn excerpt(s: &str) -> String {
    s.chars().take(EXCERPT_CHARS).collect()
}

#[derive(Debug, Clone)]
pub struct HttpBackend {
    config: GatewayConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: GatewayConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend { config, agent }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        let body = wire_body(req, &self.config.model);
        let mut call = self.agent.post(&self.config.url()).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = call.send_json(&body).map_err(transport_error)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(transport_error)?;
        if !(200..300).contains(&status) {
            return Err(GatewayError::Http { status, body: excerpt(&text) });
        }
        let json: Json = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Protocol(format!("response is not JSON ({e}): {}", excerpt(&text))))?;
        first_choice_text(&json).ok_or_else(|| GatewayError::Protocol(format!("no choice text in {}", excerpt(&text))))
    }
}

fn transport_error(e: ureq::Error) -> GatewayError {
    match e {
        ureq::Error::Timeout(_) => GatewayError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => GatewayError::Timeout,
        other => GatewayError::Transport(other.to_string()),
    }
}
