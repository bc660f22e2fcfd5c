use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sim::RenderArtifact;

/// Which agent module a request serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleTag {
    Planner,
    PlannerCritic,
    StepCheck,
    Actor,
    ActorCritic,
    RegionChooser,
}

impl RoleTag {
    pub const ALL: [RoleTag; 6] = [
        RoleTag::Planner,
        RoleTag::PlannerCritic,
        RoleTag::StepCheck,
        RoleTag::Actor,
        RoleTag::ActorCritic,
        RoleTag::RegionChooser,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoleTag::Planner => "planner",
            RoleTag::PlannerCritic => "planner_critic",
            RoleTag::StepCheck => "step_check",
            RoleTag::Actor => "actor",
            RoleTag::ActorCritic => "actor_critic",
            RoleTag::RegionChooser => "region_chooser",
        }
    }

    /// Whether this module looks at screenshots.
    pub fn consumes_images(self) -> bool {
        self != RoleTag::RegionChooser
    }
}

impl fmt::Display for RoleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Text(String),
    Image(RenderArtifact),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub speaker: Speaker,
    pub parts: Vec<Part>,
}

impl Message {
    pub fn user_text(text: impl Into<String>) -> Self {
        Message { speaker: Speaker::User, parts: vec![Part::Text(text.into())] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub role_tag: RoleTag,
    pub messages: Vec<Message>,
    pub max_tokens: u32,
    pub temperature: f32,
}

impl ChatRequest {
    /// All text parts, in order, joined by newlines.
    pub fn text(&self) -> String {
        self.messages
            .iter()
            .flat_map(|m| &m.parts)
            .filter_map(|p| match p {
                Part::Text(t) => Some(t.as_str()),
                Part::Image(_) => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn images(&self) -> impl Iterator<Item = &RenderArtifact> {
        self.messages.iter().flat_map(|m| &m.parts).filter_map(|p| match p {
            Part::Image(img) => Some(img),
            Part::Text(_) => None,
        })
    }
}
