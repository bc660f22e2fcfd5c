//! Mouse/keyboard action language.
//!
//! Actions use the call syntax `action_type(arguments)`, e.g. `click(200, 300)`
//! or `hotkey('ctrl', 'a')`. Scripts are sequences of calls separated by
//! newlines or semicolons. See `docs/action-grammar.md` for the grammar.

mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_action, parse_script, ParseError, ParseErrorKind, ScriptMode};

/// Key names accepted by `press`, `keyDown`, `keyUp` and `hotkey`.
pub const KEY_NAMES: &[&str] = &[
    "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l", "m", "n", "o", "p", "q", "r",
    "s", "t", "u", "v", "w", "x", "y", "z", "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
    "f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9", "f10", "f11", "f12", "ctrl", "shift",
    "alt", "win", "enter", "esc", "tab", "delete", "backspace", "up", "down", "left", "right",
    "space",
];

pub fn is_key_name(name: &str) -> bool {
    KEY_NAMES.contains(&name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MouseButton {
    Left,
    Right,
    Middle,
}

impl MouseButton {
    pub fn as_str(self) -> &'static str {
        match self {
            MouseButton::Left => "left",
            MouseButton::Right => "right",
            MouseButton::Middle => "middle",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "left" => Some(MouseButton::Left),
            "right" => Some(MouseButton::Right),
            "middle" => Some(MouseButton::Middle),
            _ => None,
        }
    }
}

impl Default for MouseButton {
    fn default() -> Self {
        MouseButton::Left
    }
}

/// One atomic mouse or keyboard action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    MoveTo { x: u32, y: u32 },
    Click { x: u32, y: u32, button: MouseButton, clicks: u32 },
    Write { text: String },
    /// Two or more distinct keys pressed together.
    Hotkey { keys: Vec<String> },
    Scroll { amount: i64 },
    /// Drag from the current pointer position. `duration` is in seconds.
    DragTo { x: u32, y: u32, duration: f64 },
    MouseDown { button: MouseButton },
    MouseUp { button: MouseButton },
    Press { key: String },
    KeyDown { key: String },
    KeyUp { key: String },
}

impl Action {
    /// Pointer target, for actions that carry screen coordinates.
    pub fn point(&self) -> Option<(u32, u32)> {
        match *self {
            Action::MoveTo { x, y } | Action::Click { x, y, .. } | Action::DragTo { x, y, .. } => {
                Some((x, y))
            }
            _ => None,
        }
    }

    pub fn click(x: u32, y: u32) -> Self {
        Action::Click { x, y, button: MouseButton::Left, clicks: 1 }
    }
}

impl fmt::Display for Action {
    /// Canonical single-line call text. Parsing the output yields an equal action.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::MoveTo { x, y } => write!(f, "moveTo({x}, {y})"),
            Action::Click { x, y, button, clicks } => match (button, clicks) {
                (MouseButton::Left, 1) => write!(f, "click({x}, {y})"),
                (MouseButton::Right, 1) => write!(f, "rightClick({x}, {y})"),
                (MouseButton::Left, 2) => write!(f, "doubleClick({x}, {y})"),
                (MouseButton::Left, n) => write!(f, "click({x}, {y}, clicks={n})"),
                (b, 1) => write!(f, "click({x}, {y}, button='{}')", b.as_str()),
                (b, n) => write!(f, "click({x}, {y}, button='{}', clicks={n})", b.as_str()),
            },
            Action::Write { text } => write!(f, "write({})", quote(text)),
            Action::Hotkey { keys } => {
                f.write_str("hotkey(")?;
                for (i, k) in keys.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(&quote(k))?;
                }
                f.write_str(")")
            }
            Action::Scroll { amount } => write!(f, "scroll({amount})"),
            Action::DragTo { x, y, duration } => write!(f, "dragTo({x}, {y}, {duration})"),
            Action::MouseDown { button: MouseButton::Left } => f.write_str("mouseDown()"),
            Action::MouseDown { button } => write!(f, "mouseDown(button='{}')", button.as_str()),
            Action::MouseUp { button: MouseButton::Left } => f.write_str("mouseUp()"),
            Action::MouseUp { button } => write!(f, "mouseUp(button='{}')", button.as_str()),
            Action::Press { key } => write!(f, "press({})", quote(key)),
            Action::KeyDown { key } => write!(f, "keyDown({})", quote(key)),
            Action::KeyUp { key } => write!(f, "keyUp({})", quote(key)),
        }
    }
}

pub fn serialize_action(action: &Action) -> String {
    action.to_string()
}

/// Single-quoted string literal with `\\`, `\'`, `\n`, `\r`, `\t` escapes.
fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

/// An ordered list of actions together with the text it was parsed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionScript {
    pub actions: Vec<Action>,
    pub source: String,
}

impl ActionScript {
    pub fn new(actions: Vec<Action>) -> Self {
        let source = actions.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("\n");
        ActionScript { actions, source }
    }

    pub fn empty() -> Self {
        ActionScript { actions: Vec::new(), source: String::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Canonical text: one action per line.
    pub fn to_canonical(&self) -> String {
        self.actions.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenSize {
    pub w: u32,
    pub h: u32,
}

/// A coordinate-bearing action whose target lies outside the screen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundsViolation {
    pub index: usize,
    pub x: u32,
    pub y: u32,
}

impl fmt::Display for BoundsViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "action {} targets ({}, {}) outside the screen", self.index, self.x, self.y)
    }
}

/// Every action whose point falls outside `[0, w) x [0, h)`.
pub fn validate_bounds(script: &ActionScript, screen: ScreenSize) -> Vec<BoundsViolation> {
    script
        .actions
        .iter()
        .enumerate()
        .filter_map(|(index, a)| {
            let (x, y) = a.point()?;
            (x >= screen.w || y >= screen.h).then_some(BoundsViolation { index, x, y })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FHD: ScreenSize = ScreenSize { w: 1920, h: 1080 };

    #[test]
    fn serializes_table_examples() {
        assert_eq!(Action::click(200, 300).to_string(), "click(200, 300)");
        let hk = Action::Hotkey { keys: vec!["ctrl".into(), "a".into()] };
        assert_eq!(serialize_action(&hk), "hotkey('ctrl', 'a')");
        assert_eq!(Action::Scroll { amount: -100 }.to_string(), "scroll(-100)");
        let drag = Action::DragTo { x: 120, y: 220, duration: 2.0 };
        assert_eq!(drag.to_string(), "dragTo(120, 220, 2)");
        assert_eq!(Action::Write { text: "it's".into() }.to_string(), r"write('it\'s')");
    }

    #[test]
    fn bounds_are_half_open() {
        let ok = ActionScript::new(vec![Action::click(200, 300)]);
        assert!(validate_bounds(&ok, FHD).is_empty());

        let edge = ActionScript::new(vec![Action::MoveTo { x: 1920, y: 0 }]);
        assert_eq!(validate_bounds(&edge, FHD), vec![BoundsViolation { index: 0, x: 1920, y: 0 }]);

        let corner = ActionScript::new(vec![Action::click(1919, 1079)]);
        assert!(validate_bounds(&corner, FHD).is_empty());

        let text = ActionScript::new(vec![Action::Write { text: "abc".into() }]);
        assert!(validate_bounds(&text, ScreenSize { w: 1, h: 1 }).is_empty());
    }

    #[test]
    fn reports_every_violation_with_its_index() {
        let s = ActionScript::new(vec![
            Action::click(5, 5),
            Action::DragTo { x: 10, y: 2000, duration: 0.0 },
            Action::Press { key: "enter".into() },
            Action::MoveTo { x: 4000, y: 1 },
        ]);
        let v = validate_bounds(&s, FHD);
        assert_eq!(v.iter().map(|v| v.index).collect::<Vec<_>>(), vec![1, 3]);
    }
}
