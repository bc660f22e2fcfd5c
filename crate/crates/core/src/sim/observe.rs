use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::scenario::{stable_hash, Role, Value};
use super::state::EnvState;
use crate::geom::Rect;

/// How one shown widget appears on screen.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementRender {
    pub role: Role,
    pub label: String,
    pub bbox: Rect,
    pub selected: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub disabled: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub focused: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

/// Structured stand-in for a screenshot. Two renders are "the same
/// screenshot" exactly when their digests are equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderArtifact {
    pub width: u32,
    pub height: u32,
    pub elements: Vec<ElementRender>,
    pub digest: u64,
}

impl RenderArtifact {
    pub fn new(width: u32, height: u32, elements: Vec<ElementRender>) -> Self {
        #[derive(Serialize)]
        struct Canon<'a> {
            width: u32,
            height: u32,
            elements: &'a [ElementRender],
        }
        let bytes = serde_json::to_vec(&Canon { width, height, elements: &elements }).expect("render serializes");
        RenderArtifact { width, height, digest: stable_hash(&bytes), elements }
    }

    /// Canonical text form, one element per line:
    /// `[role] "label" selected disabled focused value=V @(x,y,w,h)`.
    pub fn canonical_text(&self) -> String {
        let mut out = format!("<screenshot w={} h={} digest={:016x}>\n", self.width, self.height, self.digest);
        for e in &self.elements {
            let _ = write!(out, "[{}] {:?}", e.role.as_str(), e.label);
            if e.selected {
                out.push_str(" selected");
            }
            if e.disabled {
                out.push_str(" disabled");
            }
            if e.focused {
                out.push_str(" focused");
            }
            if let Some(v) = &e.value {
                let _ = write!(out, " value={v}");
            }
            let b = e.bbox;
            let _ = writeln!(out, " @({},{},{},{})", b.x, b.y, b.w, b.h);
        }
        out.push_str("</screenshot>");
        out
    }
}

/// Accessibility-style metadata for one interactable widget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementMeta {
    pub id: String,
    pub role: Role,
    pub label: String,
    pub bbox: Rect,
    pub selected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub screenshot: RenderArtifact,
    pub metadata: Vec<ElementMeta>,
}

impl Observation {
    pub fn digest(&self) -> u64 {
        self.screenshot.digest
    }

    pub fn element(&self, id: &str) -> Option<&ElementMeta> {
        self.metadata.iter().find(|m| m.id == id)
    }
}

/// Projects the state onto what an agent can see. The render holds every
/// shown widget; metadata holds the shown, enabled ones that are not covered
/// by an open dialog.
pub fn observe(state: &EnvState) -> Observation {
    let sc = state.scenario();
    let dialog = state.top_dialog();
    let focus = state.focus();
    let mut elements = Vec::new();
    let mut metadata = Vec::new();
    for (i, node) in sc.nodes.iter().enumerate() {
        if !state.is_shown(i) {
            continue;
        }
        let w = &state.widgets[i];
        elements.push(ElementRender {
            role: node.role,
            label: node.label.clone(),
            bbox: node.bbox,
            selected: w.selected,
            disabled: !state.is_active(i),
            focused: focus == Some(node.id.as_str()),
            value: w.value.clone(),
        });
        let reachable = dialog.map_or(true, |d| sc.is_descendant(i, d));
        if state.is_active(i) && reachable {
            metadata.push(ElementMeta {
                id: node.id.clone(),
                role: node.role,
                label: node.label.clone(),
                bbox: node.bbox,
                selected: w.selected,
                value: w.value.clone(),
            });
        }
    }
    Observation { screenshot: RenderArtifact::new(sc.screen.w, sc.screen.h, elements), metadata }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{parse_script, ScriptMode};
    use crate::sim::{load_scenario, run_script};

    const DOC: &str = r#"{
      "name": "observe",
      "screen": {"w": 300, "h": 200},
      "widgets": [{"id": "win", "role": "window", "bbox": {"x":0,"y":0,"w":300,"h":200}, "children": [
        {"id": "go", "role": "button", "label": "Go", "bbox": {"x":10,"y":10,"w":40,"h":20}},
        {"id": "off", "role": "button", "label": "Off", "enabled": false, "bbox": {"x":60,"y":10,"w":40,"h":20}},
        {"id": "gone", "role": "button", "label": "Gone", "visible": false, "bbox": {"x":110,"y":10,"w":40,"h":20}},
        {"id": "dlg", "role": "dialog", "label": "Note", "bbox": {"x":100,"y":100,"w":150,"h":80},
         "children": [{"id": "ok", "role": "button", "label": "OK", "bbox": {"x":110,"y":150,"w":40,"h":20}}]}
      ]}],
      "rules": [
        {"trigger": {"click": {"target": "ok"}}, "effects": [{"close_dialog": "dlg"}]},
        {"trigger": {"click": {"target": "go"}}, "effects": [{"set_selected": {"id": "go", "selected": true}}]}
      ],
      "goal_flags": []
    }"#;

    #[test]
    fn open_dialog_limits_metadata_but_not_the_render() {
        let st = load_scenario(DOC).unwrap();
        let obs = observe(&st);
        let rendered: Vec<_> = obs.screenshot.elements.iter().map(|e| e.label.as_str()).collect();
        assert_eq!(rendered, ["", "Go", "Off", "Note", "OK"]);
        let ids: Vec<_> = obs.metadata.iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids, ["dlg", "ok"]);

        let closed = run_script(&st, &parse_script("click(120, 160)", ScriptMode::Strict).unwrap());
        let ids: Vec<_> = observe(&closed).metadata.iter().map(|m| m.id.clone()).collect();
        assert_eq!(ids, ["win", "go"]);
    }

    #[test]
    fn digest_tracks_render_changes_only() {
        let st = load_scenario(DOC).unwrap();
        let closed = run_script(&st, &parse_script("click(120, 160)", ScriptMode::Strict).unwrap());
        assert_ne!(observe(&st).digest(), observe(&closed).digest());
        // Moving the pointer changes no widget.
        let moved = run_script(&closed, &parse_script("moveTo(290, 190)", ScriptMode::Strict).unwrap());
        assert_eq!(observe(&closed).digest(), observe(&moved).digest());
        let selected = run_script(&closed, &parse_script("click(20, 20)", ScriptMode::Strict).unwrap());
        assert_ne!(observe(&closed).digest(), observe(&selected).digest());
        assert_eq!(observe(&selected).screenshot, RenderArtifact::new(300, 200, observe(&selected).screenshot.elements));
    }

    #[test]
    fn canonical_text_lines() {
        let st = load_scenario(DOC).unwrap();
        let text = observe(&st).screenshot.canonical_text();
        assert!(text.starts_with("<screenshot w=300 h=200 digest="));
        assert!(text.contains("[button] \"Off\" disabled @(60,10,40,20)\n"));
        assert!(text.ends_with("</screenshot>"));
    }
}
