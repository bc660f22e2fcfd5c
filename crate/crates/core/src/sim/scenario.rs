//! Scenario documents: widget layout, transition rules, initial filesystem.
//!
//! A document is JSON with top-level keys `screen`, `widgets`, `rules`, `fs`
//! and `goal_flags` (plus an optional `name`). See `docs/scenario-schema.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SimError;
use crate::action::{MouseButton, ScreenSize};
use crate::geom::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Window,
    Tab,
    Button,
    Menu,
    Menuitem,
    Textbox,
    Checkbox,
    Slider,
    Cell,
    Pane,
    Dialog,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Window => "window",
            Role::Tab => "tab",
            Role::Button => "button",
            Role::Menu => "menu",
            Role::Menuitem => "menuitem",
            Role::Textbox => "textbox",
            Role::Checkbox => "checkbox",
            Role::Slider => "slider",
            Role::Cell => "cell",
            Role::Pane => "pane",
            Role::Dialog => "dialog",
        }
    }
}

/// Widget value: text or an integer (sliders use 0..=100).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(i64),
    Text(String),
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Number(n) => write!(f, "{n}"),
            Value::Text(s) => write!(f, "{s:?}"),
        }
    }
}

fn yes() -> bool {
    true
}

/// Widget as written in a scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Widget {
    pub id: String,
    pub role: Role,
    #[serde(default)]
    pub label: String,
    pub bbox: Rect,
    #[serde(default = "yes")]
    pub visible: bool,
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub selected: bool,
    #[serde(default)]
    pub value: Option<Value>,
    #[serde(default)]
    pub children: Vec<Widget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Trigger {
    Click {
        target: String,
        #[serde(default)]
        button: MouseButton,
        #[serde(default = "one")]
        clicks: u32,
    },
    /// Text written while `target` (or any textbox, when absent) has focus.
    Write {
        #[serde(default)]
        target: Option<String>,
    },
    Press {
        key: String,
        #[serde(default)]
        focus: Option<String>,
    },
    Hotkey {
        keys: Vec<String>,
        #[serde(default)]
        focus: Option<String>,
    },
    Scroll {
        target: String,
        #[serde(default)]
        direction: Option<ScrollDirection>,
    },
    Drag {
        from: String,
        #[serde(default)]
        to: Option<String>,
    },
    /// Fires once while building the initial state.
    Load {},
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScrollDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Condition {
    Selected(String),
    NotSelected(String),
    Visible(String),
    Hidden(String),
    Enabled(String),
    Focused(String),
    ValueEq { id: String, value: Option<Value> },
    ValueNe { id: String, value: Option<Value> },
    Flag(String),
    NoFlag(String),
    PrefEq { key: String, value: String },
    FileExists(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FsOp {
    Create { path: String, #[serde(default)] size: u64 },
    Delete { path: String },
    Move { from: String, to_dir: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Effect {
    SetVisible { id: String, visible: bool },
    SetSelected { id: String, selected: bool },
    /// Selects `ids` and deselects every other sibling of each.
    SelectExclusive(Vec<String>),
    SetValue { id: String, value: Option<Value> },
    SetEnabled { id: String, enabled: bool },
    Focus(String),
    Blur,
    OpenDialog(String),
    CloseDialog(String),
    FsOp(FsOp),
    MarkGoalFlag(String),
    ClearGoalFlag(String),
    SetPref { key: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRule {
    pub trigger: Trigger,
    #[serde(default)]
    pub when: Vec<Condition>,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FsEntry {
    #[serde(default)]
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub name: String,
    pub screen: ScreenSize,
    pub widgets: Vec<Widget>,
    #[serde(default)]
    pub rules: Vec<TransitionRule>,
    #[serde(default)]
    pub fs: BTreeMap<String, FsEntry>,
    #[serde(default)]
    pub goal_flags: BTreeSet<String>,
}

/// Static part of a widget after flattening.
#[derive(Debug, Clone)]
pub struct Node {
    pub id: String,
    pub role: Role,
    pub label: String,
    pub bbox: Rect,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Mutable part of a widget.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct WidgetState {
    pub visible: bool,
    pub enabled: bool,
    pub selected: bool,
    pub value: Option<Value>,
}

/// A validated scenario. Widgets are flattened in document (pre-)order.
#[derive(Debug)]
pub struct Scenario {
    pub name: String,
    pub screen: ScreenSize,
    pub nodes: Vec<Node>,
    pub roots: Vec<usize>,
    pub index: BTreeMap<String, usize>,
    pub initial: Vec<WidgetState>,
    pub rules: Vec<TransitionRule>,
    pub fs: BTreeMap<String, FsEntry>,
    pub goal_flags: BTreeSet<String>,
    /// Hash of the canonical document, used to pin traces to a scenario.
    pub doc_digest: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Arc<Scenario>, SimError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|e| SimError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        Scenario::from_doc(doc)
    }

    pub fn from_doc(doc: ScenarioDoc) -> Result<Arc<Scenario>, SimError> {
        if doc.screen.w == 0 || doc.screen.h == 0 {
            return Err(schema("screen", "dimensions must be positive"));
        }
        let doc_digest = digest_of(&doc);
        let mut sc = Scenario {
            name: doc.name,
            screen: doc.screen,
            nodes: Vec::new(),
            roots: Vec::new(),
            index: BTreeMap::new(),
            initial: Vec::new(),
            rules: doc.rules,
            fs: doc.fs,
            goal_flags: doc.goal_flags,
            doc_digest,
        };
        for (i, w) in doc.widgets.iter().enumerate() {
            let idx = sc.flatten(w, None, &format!("widgets[{i}]"))?;
            sc.roots.push(idx);
        }
        sc.check_geometry()?;
        sc.check_rules()?;
        for path in sc.fs.keys() {
            if !valid_path(path) {
                return Err(schema(&format!("fs.{path}"), "paths must be absolute"));
            }
        }
        Ok(Arc::new(sc))
    }

    fn flatten(&mut self, w: &Widget, parent: Option<usize>, path: &str) -> Result<usize, SimError> {
        if w.id.is_empty() {
            return Err(schema(&format!("{path}.id"), "widget id must be non-empty"));
        }
        if self.index.contains_key(&w.id) {
            return Err(schema(&format!("{path}.id"), &format!("duplicate widget id `{}`", w.id)));
        }
        let idx = self.nodes.len();
        self.index.insert(w.id.clone(), idx);
        self.nodes.push(Node {
            id: w.id.clone(),
            role: w.role,
            label: w.label.clone(),
            bbox: w.bbox,
            parent,
            children: Vec::new(),
        });
        self.initial.push(WidgetState {
            visible: w.visible,
            enabled: w.enabled,
            selected: w.selected,
            value: w.value.clone(),
        });
        for (i, c) in w.children.iter().enumerate() {
            let child = self.flatten(c, Some(idx), &format!("{path}.children[{i}]"))?;
            self.nodes[idx].children.push(child);
        }
        Ok(idx)
    }

    fn check_geometry(&self) -> Result<(), SimError> {
        for n in &self.nodes {
            if !n.bbox.within(self.screen.w, self.screen.h) {
                return Err(schema(
                    &format!("widget `{}`.bbox", n.id),
                    "bounding box must lie within the screen",
                ));
            }
        }
        Ok(())
    }

    fn check_rules(&self) -> Result<(), SimError> {
        for (i, rule) in self.rules.iter().enumerate() {
            let mut refs: Vec<&str> = Vec::new();
            match &rule.trigger {
                Trigger::Click { target, clicks, .. } => {
                    if *clicks == 0 {
                        return Err(schema(&format!("rules[{i}].trigger"), "clicks must be >= 1"));
                    }
                    refs.push(target);
                }
                Trigger::Write { target } => refs.extend(target.as_deref()),
                Trigger::Press { focus, .. } | Trigger::Hotkey { focus, .. } => refs.extend(focus.as_deref()),
                Trigger::Scroll { target, .. } => refs.push(target),
                Trigger::Drag { from, to } => {
                    refs.push(from);
                    refs.extend(to.as_deref());
                }
                Trigger::Load {} => {}
            }
            for c in &rule.when {
                match c {
                    Condition::Selected(id)
                    | Condition::NotSelected(id)
                    | Condition::Visible(id)
                    | Condition::Hidden(id)
                    | Condition::Enabled(id)
                    | Condition::Focused(id)
                    | Condition::ValueEq { id, .. }
                    | Condition::ValueNe { id, .. } => refs.push(id),
                    Condition::Flag(f) | Condition::NoFlag(f) => self.check_flag(i, f)?,
                    Condition::PrefEq { .. } | Condition::FileExists(_) => {}
                }
            }
            for e in &rule.effects {
                match e {
                    Effect::SetVisible { id, .. }
                    | Effect::SetSelected { id, .. }
                    | Effect::SetValue { id, .. }
                    | Effect::SetEnabled { id, .. }
                    | Effect::Focus(id) => refs.push(id),
                    Effect::OpenDialog(id) | Effect::CloseDialog(id) => {
                        refs.push(id);
                        if let Some(&n) = self.index.get(id) {
                            if self.nodes[n].role != Role::Dialog {
                                return Err(schema(
                                    &format!("rules[{i}].effects"),
                                    &format!("`{id}` is not a dialog"),
                                ));
                            }
                        }
                    }
                    Effect::SelectExclusive(ids) => refs.extend(ids.iter().map(String::as_str)),
                    Effect::MarkGoalFlag(f) | Effect::ClearGoalFlag(f) => self.check_flag(i, f)?,
                    Effect::FsOp(op) => {
                        let paths: Vec<&str> = match op {
                            FsOp::Create { path, .. } | FsOp::Delete { path } => vec![path],
                            FsOp::Move { from, to_dir } => vec![from, to_dir],
                        };
                        if let Some(p) = paths.into_iter().find(|p| !valid_path(p)) {
                            return Err(schema(&format!("rules[{i}].effects"), &format!("invalid path `{p}`")));
                        }
                    }
                    Effect::Blur | Effect::SetPref { .. } => {}
                }
            }
            if let Some(missing) = refs.into_iter().find(|id| !self.index.contains_key(*id)) {
                return Err(SimError::DanglingWidgetRef { rule: i, id: missing.to_string() });
            }
        }
        Ok(())
    }

    fn check_flag(&self, rule: usize, flag: &str) -> Result<(), SimError> {
        if self.goal_flags.contains(flag) {
            Ok(())
        } else {
            Err(schema(&format!("rules[{rule}]"), &format!("flag `{flag}` is not declared in goal_flags")))
        }
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.nodes[idx].id
    }

    pub fn lookup(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// `idx` followed by its ancestors, innermost first.
    pub fn ancestry(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(Some(idx), move |&i| self.nodes[i].parent)
    }

    pub fn is_descendant(&self, idx: usize, ancestor: usize) -> bool {
        self.ancestry(idx).any(|i| i == ancestor)
    }
}

fn schema(path: &str, message: &str) -> SimError {
    SimError::Schema { path: path.to_string(), message: message.to_string() }
}

pub(crate) fn valid_path(p: &str) -> bool {
    p.starts_with('/') && !p[1..].split('/').any(str::is_empty) || p == "/"
}

fn digest_of<T: Serialize>(v: &T) -> u64 {
    let bytes = serde_json::to_vec(v).expect("scenario documents serialize");
    stable_hash(&bytes)
}

/// First eight bytes of SHA-256, big-endian.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_be_bytes(d[..8].try_into().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(rules: &str) -> String {
        format!(
            r#"{{
              "screen": {{"w": 100, "h": 100}},
              "widgets": [{{"id": "win", "role": "window", "bbox": {{"x":0,"y":0,"w":100,"h":100}},
                "children": [{{"id": "b", "role": "button", "label": "B", "bbox": {{"x":10,"y":10,"w":10,"h":10}}}},
                             {{"id": "d", "role": "dialog", "visible": false, "bbox": {{"x":20,"y":20,"w":50,"h":50}}}}]}}],
              "rules": {rules},
              "goal_flags": ["done"]
            }}"#
        )
    }

    #[test]
    fn loads_minimal_document() {
        let sc = Scenario::from_json(&doc("[]")).unwrap();
        assert_eq!(sc.nodes.len(), 3);
        assert_eq!(sc.nodes[1].parent, Some(0));
        assert_eq!(sc.lookup("d"), Some(2));
    }

    #[test]
    fn dangling_reference_is_reported() {
        let rules = r#"[{"trigger": {"click": {"target": "nope"}}, "effects": []}]"#;
        match Scenario::from_json(&doc(rules)).unwrap_err() {
            SimError::DanglingWidgetRef { rule, id } => {
                assert_eq!(rule, 0);
                assert_eq!(id, "nope");
            }
            e => panic!("unexpected {e:?}"),
        }
        let rules = r#"[{"trigger": {"click": {"target": "b"}}, "effects": [{"set_visible": {"id": "ghost", "visible": true}}]}]"#;
        assert!(matches!(Scenario::from_json(&doc(rules)), Err(SimError::DanglingWidgetRef { .. })));
    }

    #[test]
    fn schema_error_carries_path() {
        let rules = r#"[{"trigger": {"click": {"target": "b"}}, "effects": [{"set_visible": {"id": "b"}}]}]"#;
        match Scenario::from_json(&doc(rules)).unwrap_err() {
            SimError::Schema { path, .. } => assert!(path.starts_with("rules[0].effects[0]"), "{path}"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn undeclared_flag_and_non_dialog_open_are_rejected() {
        let rules = r#"[{"trigger": {"click": {"target": "b"}}, "effects": [{"mark_goal_flag": "other"}]}]"#;
        assert!(matches!(Scenario::from_json(&doc(rules)), Err(SimError::Schema { .. })));
        let rules = r#"[{"trigger": {"click": {"target": "b"}}, "effects": [{"open_dialog": "b"}]}]"#;
        assert!(matches!(Scenario::from_json(&doc(rules)), Err(SimError::Schema { .. })));
    }

    #[test]
    fn duplicate_ids_and_offscreen_boxes_are_rejected() {
        let dup = doc("[]").replace("\"id\": \"d\"", "\"id\": \"b\"");
        assert!(matches!(Scenario::from_json(&dup), Err(SimError::Schema { .. })));
        let off = doc("[]").replace("\"x\":20,\"y\":20,\"w\":50", "\"x\":60,\"y\":20,\"w\":50");
        assert!(matches!(Scenario::from_json(&off), Err(SimError::Schema { .. })));
    }

    #[test]
    fn path_syntax() {
        assert!(valid_path("/archive/a.mp4"));
        assert!(valid_path("/"));
        assert!(!valid_path("archive/a.mp4"));
        assert!(!valid_path("/archive//a.mp4"));
    }
}
