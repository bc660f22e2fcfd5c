use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::request::{ChatRequest, RoleTag};
use super::{ChatBackend, GatewayError};

/// Substring predicates. `contains`/`excludes` look at the text parts of the
/// request; `image_contains` looks at the canonical text of its last image.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleMatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<RoleTag>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excludes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub image_contains: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedRule {
    #[serde(rename = "match")]
    pub when: RuleMatch,
    pub response: String,
    #[serde(default)]
    pub consume_once: bool,
}

impl RuleMatch {
    fn accepts(&self, req: &ChatRequest, text: &str, image: Option<&str>) -> bool {
        self.role.is_none_or(|r| r == req.role_tag)
            && self.contains.iter().all(|s| text.contains(s.as_str()))
            && !self.excludes.iter().any(|s| text.contains(s.as_str()))
            && (self.image_contains.is_empty()
                || image.is_some_and(|img| self.image_contains.iter().all(|s| img.contains(s.as_str()))))
    }
}

/// An ordered rule list. Rule state lives in sessions, so one backend can
/// serve many episodes at once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScriptedBackend {
    rules: Arc<Vec<ScriptedRule>>,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptedRule>) -> Self {
        ScriptedBackend { rules: Arc::new(rules) }
    }

    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let rules: Vec<ScriptedRule> = serde_path_to_error::deserialize(de)
            .map_err(|e| GatewayError::Config(format!("scripted rules at `{}`: {}", e.path(), e.inner())))?;
        Ok(Self::new(rules))
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            GatewayError::Config(m) => GatewayError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Rules of `self` followed by those of `other`; earlier rules win.
    pub fn then(&self, other: &ScriptedBackend) -> Self {
        Self::new(self.rules.iter().chain(other.rules.iter()).cloned().collect())
    }

    pub fn rules(&self) -> &[ScriptedRule] {
        &self.rules
    }

    /// Fresh per-episode view with no rules consumed.
    pub fn session(&self) -> ScriptedSession {
        ScriptedSession { rules: Arc::clone(&self.rules), consumed: Mutex::new(vec![false; self.rules.len()]) }
    }
}

#[derive(Debug)]
pub struct ScriptedSession {
    rules: Arc<Vec<ScriptedRule>>,
    consumed: Mutex<Vec<bool>>,
}

impl ChatBackend for ScriptedSession {
    fn complete(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        let text = req.text();
        let image = req.images().last().map(|i| i.canonical_text());
        let mut consumed = self.consumed.lock().unwrap_or_else(|p| p.into_inner());
        for (i, rule) in self.rules.iter().enumerate() {
            if consumed[i] || !rule.when.accepts(req, &text, image.as_deref()) {
                continue;
            }
            if rule.consume_once {
                consumed[i] = true;
            }
            return Ok(rule.response.clone());
        }
        Err(GatewayError::NoScriptedMatch { role: req.role_tag })
    }
}
