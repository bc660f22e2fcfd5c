//! Element extraction and spatial reasoning over observations.
//!
//! [`parse_elements`] turns observation metadata into positioned elements,
//! [`locate_element`] ranks them against free text from a model, and
//! [`region_search_crop`] / [`crop_observation`] produce the half-size crop
//! used when a step check cannot decide from the full screenshot.

mod locate;
mod region;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Rect;
use crate::sim::{Observation, Role};

pub use locate::{locate_element, normalize_label, Match, MatchTier, DEFAULT_MATCH_THRESHOLD};
pub use region::{crop_observation, region_search_crop, CropRegion};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuiError {
    #[error("no element matches `{query}` (best score {best:.2})")]
    NoMatch { query: String, best: f64 },
    #[error("anchor {0:?} does not intersect the screen")]
    AnchorOutOfScreen(Rect),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    pub cx: i32,
    pub cy: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuiElement {
    pub id: String,
    pub label: String,
    pub role: Role,
    pub bbox: Rect,
    pub center: Point,
}

impl GuiElement {
    pub fn new(id: impl Into<String>, label: impl Into<String>, role: Role, bbox: Rect) -> Self {
        let (cx, cy) = bbox.center();
        GuiElement { id: id.into(), label: label.into(), role, bbox, center: Point { cx, cy } }
    }

    /// Prompt line: `[button] "Merge & Center" center=(412, 187)`.
    pub fn describe(&self) -> String {
        format!("[{}] {:?} center=({}, {})", self.role.as_str(), self.label, self.center.cx, self.center.cy)
    }
}

/// Source of positioned elements for an observation. Real screenshots would
/// need OCR and icon detection; the simulator exposes metadata directly.
pub trait ElementParser {
    fn parse(&self, obs: &Observation) -> Vec<GuiElement>;
}

/// Reads elements straight from observation metadata.
#[derive(Debug, Clone, Copy, Default)]
pub struct MetadataParser;

impl ElementParser for MetadataParser {
    fn parse(&self, obs: &Observation) -> Vec<GuiElement> {
        parse_elements(obs)
    }
}

/// One element per metadata entry, in document order.
pub fn parse_elements(obs: &Observation) -> Vec<GuiElement> {
    obs.metadata.iter().map(|m| GuiElement::new(&m.id, &m.label, m.role, m.bbox)).collect()
}

/// Element list as shown to the model, one per line.
pub fn describe_elements(elements: &[GuiElement]) -> String {
    if elements.is_empty() {
        return "(none)".to_string();
    }
    elements.iter().map(|e| format!("- {}", e.describe())).collect::<Vec<_>>().join("\n")
}
