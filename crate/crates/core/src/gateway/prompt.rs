use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::request::{ChatRequest, Message, Part, RoleTag, Speaker};
use super::GatewayError;
use crate::sim::RenderArtifact;

pub const DEFAULT_MAX_TOKENS: u32 = 1024;

/// Prompt template. The actor has two: first attempt and correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Planner,
    PlannerCritic,
    StepCheck,
    Actor,
    ActorCorrection,
    ActorCritic,
    RegionChooser,
}

impl Template {
    pub const ALL: [Template; 7] = [
        Template::Planner,
        Template::PlannerCritic,
        Template::StepCheck,
        Template::Actor,
        Template::ActorCorrection,
        Template::ActorCritic,
        Template::RegionChooser,
    ];

    pub fn role_tag(self) -> RoleTag {
        match self {
            Template::Planner => RoleTag::Planner,
            Template::PlannerCritic => RoleTag::PlannerCritic,
            Template::StepCheck => RoleTag::StepCheck,
            Template::Actor | Template::ActorCorrection => RoleTag::Actor,
            Template::ActorCritic => RoleTag::ActorCritic,
            Template::RegionChooser => RoleTag::RegionChooser,
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Template::Planner => "planner.txt",
            Template::PlannerCritic => "planner_critic.txt",
            Template::StepCheck => "step_check.txt",
            Template::Actor => "actor.txt",
            Template::ActorCorrection => "actor_correction.txt",
            Template::ActorCritic => "actor_critic.txt",
            Template::RegionChooser => "region_chooser.txt",
        }
    }

    /// Screenshots attached, in order.
    pub fn image_count(self) -> usize {
        match self {
            Template::ActorCritic => 2,
            Template::RegionChooser => 0,
            _ => 1,
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            Template::Planner => include_str!("../../prompts/planner.txt"),
            Template::PlannerCritic => include_str!("../../prompts/planner_critic.txt"),
            Template::StepCheck => include_str!("../../prompts/step_check.txt"),
            Template::Actor => include_str!("../../prompts/actor.txt"),
            Template::ActorCorrection => include_str!("../../prompts/actor_correction.txt"),
            Template::ActorCritic => include_str!("../../prompts/actor_critic.txt"),
            Template::RegionChooser => include_str!("../../prompts/region_chooser.txt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Parsed {
    system: String,
    user: String,
}

fn split_sections(template: Template, text: &str) -> Result<Parsed, GatewayError> {
    let bad = |m: &str| GatewayError::Template { name: template.file_name().to_string(), message: m.to_string() };
    let body = text.strip_prefix("[system]\n").ok_or_else(|| bad("must start with a [system] line"))?;
    let (system, user) = body.split_once("\n[user]\n").ok_or_else(|| bad("missing [user] section"))?;
    Ok(Parsed { system: system.trim_end().to_string(), user: user.trim_end().to_string() })
}

/// The template set. Built-ins are compiled in; a directory may override
/// any subset by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct Templates {
    parsed: BTreeMap<Template, Parsed>,
}

impl Templates {
    pub fn builtin() -> Self {
        let parsed = Template::ALL
            .iter()
            .map(|&t| (t, split_sections(t, t.builtin()).expect("built-in templates are well formed")))
            .collect();
        Templates { parsed }
    }

    pub fn with_overrides(dir: &Path) -> Result<Self, GatewayError> {
        let mut out = Self::builtin();
        for t in Template::ALL {
            let path = dir.join(t.file_name());
            if path.is_file() {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
                out.parsed.insert(t, split_sections(t, &text.replace("\r\n", "\n"))?);
            }
        }
        Ok(out)
    }
}

impl Default for Templates {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Module-specific fields plus the screenshots to attach.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PromptContext {
    pub fields: BTreeMap<String, String>,
    pub images: Vec<RenderArtifact>,
}

impl PromptContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(mut self, name: &str, value: impl Into<String>) -> Self {
        self.fields.insert(name.to_string(), value.into());
        self
    }

    pub fn image(mut self, img: RenderArtifact) -> Self {
        self.images.push(img);
        self
    }
}

fn expand(role: RoleTag, text: &str, ctx: &PromptContext) -> Result<String, GatewayError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| GatewayError::Template {
            name: role.to_string(),
            message: "unterminated placeholder".to_string(),
        })?;
        let name = after[..end].trim();
        let value = ctx
            .fields
            .get(name)
            .ok_or_else(|| GatewayError::MissingContextField { role, field: name.to_string() })?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Expands a template into a request: one system message, then one user
/// message holding the text followed by the screenshots.
pub fn render_prompt(templates: &Templates, template: Template, ctx: &PromptContext) -> Result<ChatRequest, GatewayError> {
    let role = template.role_tag();
    let parsed = &templates.parsed[&template];
    let need = template.image_count();
    if ctx.images.len() < need {
        return Err(GatewayError::MissingContextField { role, field: format!("screenshot {}", ctx.images.len() + 1) });
    }
    let system = expand(role, &parsed.system, ctx)?;
    let user = expand(role, &parsed.user, ctx)?;
    let mut parts = vec![Part::Text(user)];
    parts.extend(ctx.images.iter().take(need).cloned().map(Part::Image));
    Ok(ChatRequest {
        role_tag: role,
        messages: vec![
            Message { speaker: Speaker::System, parts: vec![Part::Text(system)] },
            Message { speaker: Speaker::User, parts },
        ],
        max_tokens: DEFAULT_MAX_TOKENS,
        temperature: 0.0,
    })
}
