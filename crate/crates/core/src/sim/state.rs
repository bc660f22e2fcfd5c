use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;

use super::scenario::{
    stable_hash, valid_path, Condition, Effect, FsEntry, FsOp, Role, Scenario, ScrollDirection, Trigger, Value,
    WidgetState,
};
use super::SimError;
use crate::action::{validate_bounds, Action, ActionScript, MouseButton, ScreenSize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Press {
    button: MouseButton,
    x: u32,
    y: u32,
}

/// Input-device state. Not part of the digest: it is not visible on screen.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Pointer {
    x: u32,
    y: u32,
    pressed: Option<Press>,
    held_keys: Vec<String>,
}

/// Environment state: an immutable value, `step` returns a new one.
#[derive(Debug, Clone)]
pub struct EnvState {
    scenario: Arc<Scenario>,
    pub(crate) widgets: Vec<WidgetState>,
    pub(crate) focus: Option<usize>,
    pub fs: BTreeMap<String, FsEntry>,
    /// Remembered preferences; carried between episodes when persistence is on.
    pub prefs: BTreeMap<String, String>,
    pub goal_flags: BTreeSet<String>,
    pointer: Pointer,
}

#[derive(Serialize)]
struct CanonicalState<'a> {
    scenario: &'a str,
    screen: ScreenSize,
    widgets: BTreeMap<&'a str, &'a WidgetState>,
    focus: Option<&'a str>,
    fs: &'a BTreeMap<String, FsEntry>,
    prefs: &'a BTreeMap<String, String>,
    goal_flags: &'a BTreeSet<String>,
}

impl EnvState {
    /// Default initial state: document values, then any `load` rules.
    pub fn initial(scenario: &Arc<Scenario>, prefs: &BTreeMap<String, String>) -> EnvState {
        let mut st = EnvState {
            scenario: Arc::clone(scenario),
            widgets: scenario.initial.clone(),
            focus: None,
            fs: scenario.fs.clone(),
            prefs: prefs.clone(),
            goal_flags: BTreeSet::new(),
            pointer: Pointer::default(),
        };
        let loads: Vec<_> = scenario
            .rules
            .iter()
            .filter(|r| matches!(r.trigger, Trigger::Load {}))
            .filter(|r| r.when.iter().all(|c| st.holds(c)))
            .cloned()
            .collect();
        for rule in loads {
            for e in &rule.effects {
                st.apply(e);
            }
        }
        st.settle_focus();
        st
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn screen(&self) -> ScreenSize {
        self.scenario.screen
    }

    pub fn focus(&self) -> Option<&str> {
        self.focus.map(|i| self.scenario.id(i))
    }

    pub fn widget(&self, id: &str) -> Option<&WidgetState> {
        self.scenario.lookup(id).map(|i| &self.widgets[i])
    }

    /// Stable 64-bit digest of everything observable about the state.
    pub fn digest(&self) -> u64 {
        let sc = &self.scenario;
        let canon = CanonicalState {
            scenario: &sc.name,
            screen: sc.screen,
            widgets: sc.nodes.iter().zip(&self.widgets).map(|(n, w)| (n.id.as_str(), w)).collect(),
            focus: self.focus(),
            fs: &self.fs,
            prefs: &self.prefs,
            goal_flags: &self.goal_flags,
        };
        stable_hash(&serde_json::to_vec(&canon).expect("state serializes"))
    }

    /// Visible flag of the widget and all of its ancestors.
    pub fn is_shown(&self, idx: usize) -> bool {
        self.scenario.ancestry(idx).all(|i| self.widgets[i].visible)
    }

    pub fn is_active(&self, idx: usize) -> bool {
        self.scenario.ancestry(idx).all(|i| self.widgets[i].enabled && self.widgets[i].visible)
    }

    /// The last shown dialog in document order, which sits above everything else.
    pub fn top_dialog(&self) -> Option<usize> {
        (0..self.widgets.len()).rev().find(|&i| self.scenario.nodes[i].role == Role::Dialog && self.is_shown(i))
    }

    /// Deepest shown widget under the point. Later siblings are on top; an open
    /// dialog captures every hit, and points outside it hit nothing.
    pub fn hit_test(&self, x: u32, y: u32) -> Option<usize> {
        let (px, py) = (x as i64, y as i64);
        if let Some(d) = self.top_dialog() {
            return self.hit_within(d, px, py);
        }
        self.scenario.roots.iter().rev().find_map(|&r| self.hit_within(r, px, py))
    }

    fn hit_within(&self, idx: usize, px: i64, py: i64) -> Option<usize> {
        let node = &self.scenario.nodes[idx];
        if !self.widgets[idx].visible || !node.bbox.contains(px, py) {
            return None;
        }
        node.children.iter().rev().find_map(|&c| self.hit_within(c, px, py)).or(Some(idx))
    }

    fn holds(&self, c: &Condition) -> bool {
        let sc = &self.scenario;
        let w = |id: &str| sc.lookup(id).map(|i| (i, &self.widgets[i]));
        match c {
            Condition::Selected(id) => w(id).is_some_and(|(_, s)| s.selected),
            Condition::NotSelected(id) => w(id).is_some_and(|(_, s)| !s.selected),
            Condition::Visible(id) => w(id).is_some_and(|(i, _)| self.is_shown(i)),
            Condition::Hidden(id) => w(id).is_some_and(|(i, _)| !self.is_shown(i)),
            Condition::Enabled(id) => w(id).is_some_and(|(_, s)| s.enabled),
            Condition::Focused(id) => self.focus() == Some(id.as_str()),
            Condition::ValueEq { id, value } => w(id).is_some_and(|(_, s)| &s.value == value),
            Condition::ValueNe { id, value } => w(id).is_some_and(|(_, s)| &s.value != value),
            Condition::Flag(f) => self.goal_flags.contains(f),
            Condition::NoFlag(f) => !self.goal_flags.contains(f),
            Condition::PrefEq { key, value } => self.prefs.get(key) == Some(value),
            Condition::FileExists(p) => self.fs.contains_key(p),
        }
    }

    fn apply(&mut self, e: &Effect) {
        let sc = Arc::clone(&self.scenario);
        let idx = |id: &str| sc.lookup(id).expect("widget references are validated on load");
        match e {
            Effect::SetVisible { id, visible } => self.widgets[idx(id)].visible = *visible,
            Effect::SetSelected { id, selected } => self.widgets[idx(id)].selected = *selected,
            Effect::SelectExclusive(ids) => {
                let chosen: Vec<usize> = ids.iter().map(|id| idx(id)).collect();
                for &c in &chosen {
                    let siblings = match sc.nodes[c].parent {
                        Some(p) => sc.nodes[p].children.clone(),
                        None => sc.roots.clone(),
                    };
                    for s in siblings {
                        self.widgets[s].selected = chosen.contains(&s);
                    }
                }
            }
            Effect::SetValue { id, value } => self.widgets[idx(id)].value = value.clone(),
            Effect::SetEnabled { id, enabled } => self.widgets[idx(id)].enabled = *enabled,
            Effect::Focus(id) => self.focus = Some(idx(id)),
            Effect::Blur => self.focus = None,
            Effect::OpenDialog(id) => self.widgets[idx(id)].visible = true,
            Effect::CloseDialog(id) => self.widgets[idx(id)].visible = false,
            Effect::FsOp(op) => self.fs_apply(op),
            Effect::MarkGoalFlag(f) => {
                self.goal_flags.insert(f.clone());
            }
            Effect::ClearGoalFlag(f) => {
                self.goal_flags.remove(f);
            }
            Effect::SetPref { key, value } => {
                self.prefs.insert(key.clone(), value.clone());
            }
        }
    }

    fn fs_apply(&mut self, op: &FsOp) {
        match op {
            FsOp::Create { path, size } => {
                self.fs.insert(path.clone(), FsEntry { size: *size });
            }
            FsOp::Delete { path } => {
                self.fs.remove(path);
            }
            FsOp::Move { from, to_dir } => {
                if let Some(entry) = self.fs.remove(from) {
                    let name = from.rsplit('/').next().unwrap_or(from);
                    let dest = format!("{}/{}", to_dir.trim_end_matches('/'), name);
                    self.fs.insert(dest, entry);
                }
            }
        }
    }

    /// Focus may only rest on a shown, enabled textbox.
    fn settle_focus(&mut self) {
        if let Some(f) = self.focus {
            if self.scenario.nodes[f].role != Role::Textbox || !self.is_active(f) {
                self.focus = None;
            }
        }
    }

    /// First rule whose trigger matches and whose guards hold, looking at the
    /// innermost widget first. Guards are evaluated against the pre-state.
    fn find_rule(&self, target: Option<usize>, matches: impl Fn(&Trigger, Option<usize>) -> bool) -> Option<usize> {
        let sc = &self.scenario;
        let candidates: Vec<Option<usize>> = match target {
            Some(t) => sc.ancestry(t).map(Some).collect(),
            None => vec![None],
        };
        candidates.into_iter().find_map(|cand| {
            sc.rules
                .iter()
                .position(|r| matches(&r.trigger, cand) && r.when.iter().all(|c| self.holds(c)))
        })
    }

    fn fire(&mut self, rule: Option<usize>) {
        let Some(r) = rule else { return };
        let sc = Arc::clone(&self.scenario);
        for e in &sc.rules[r].effects {
            self.apply(e);
        }
        self.settle_focus();
    }

    fn target_matches(&self, name: &str, cand: Option<usize>) -> bool {
        cand.is_some_and(|c| self.scenario.id(c) == name)
    }

    fn click(&mut self, x: u32, y: u32, button: MouseButton, clicks: u32) {
        let Some(hit) = self.hit_test(x, y) else { return };
        if !self.is_active(hit) {
            return;
        }
        if button == MouseButton::Left && self.scenario.nodes[hit].role == Role::Textbox {
            self.focus = Some(hit);
        }
        let rule = self.find_rule(Some(hit), |t, cand| match t {
            Trigger::Click { target, button: b, clicks: n } => {
                *b == button && *n == clicks && self.target_matches(target, cand)
            }
            _ => false,
        });
        self.fire(rule);
    }

    fn drag(&mut self, from: (u32, u32), to: (u32, u32)) {
        let Some(src) = self.hit_test(from.0, from.1) else { return };
        if !self.is_active(src) {
            return;
        }
        let dst = self.hit_test(to.0, to.1);
        let node = &self.scenario.nodes[src];
        if node.role == Role::Slider && node.bbox.w > 0 {
            let rel = (to.0 as i64 - node.bbox.x as i64).clamp(0, node.bbox.w as i64);
            self.widgets[src].value = Some(Value::Number(rel * 100 / node.bbox.w as i64));
        }
        let dst_chain: Vec<usize> = dst.map(|d| self.scenario.ancestry(d).collect()).unwrap_or_default();
        let rule = self.find_rule(Some(src), |t, cand| match t {
            Trigger::Drag { from, to } => {
                self.target_matches(from, cand)
                    && match to {
                        None => true,
                        Some(to) => dst_chain.iter().any(|&d| self.scenario.id(d) == to),
                    }
            }
            _ => false,
        });
        self.fire(rule);
    }

    fn key_combo(&mut self, keys: &[String]) {
        let focus = self.focus;
        let sorted = |ks: &[String]| {
            let mut v = ks.to_vec();
            v.sort();
            v
        };
        let want = sorted(keys);
        let rule = self.find_rule(None, |t, _| match t {
            Trigger::Hotkey { keys: k, focus: f } => sorted(k) == want && self.focus_ok(f, focus),
            _ => false,
        });
        self.fire(rule);
    }

    fn focus_ok(&self, required: &Option<String>, focus: Option<usize>) -> bool {
        match required {
            None => true,
            Some(id) => focus.is_some_and(|f| self.scenario.id(f) == id),
        }
    }

    fn press(&mut self, key: &str) {
        if !self.pointer.held_keys.is_empty() && !self.pointer.held_keys.iter().any(|k| k == key) {
            let mut keys = self.pointer.held_keys.clone();
            keys.push(key.to_string());
            self.key_combo(&keys);
            return;
        }
        let focus = self.focus;
        if key == "backspace" {
            if let Some(f) = focus {
                if let Some(Value::Text(t)) = &mut self.widgets[f].value {
                    t.pop();
                }
            }
        }
        let rule = self.find_rule(None, |t, _| match t {
            Trigger::Press { key: k, focus: req } => k == key && self.focus_ok(req, focus),
            _ => false,
        });
        self.fire(rule);
    }

    fn write(&mut self, text: &str) {
        let Some(f) = self.focus else { return };
        let w = &mut self.widgets[f];
        match &mut w.value {
            Some(Value::Text(t)) => t.push_str(text),
            _ => w.value = Some(Value::Text(text.to_string())),
        }
        let rule = self.find_rule(Some(f), |t, cand| match t {
            Trigger::Write { target } => match target {
                None => true,
                Some(id) => self.target_matches(id, cand),
            },
            _ => false,
        });
        self.fire(rule);
    }

    fn scroll(&mut self, amount: i64) {
        let Some(hit) = self.hit_test(self.pointer.x, self.pointer.y) else { return };
        if amount == 0 || !self.is_active(hit) {
            return;
        }
        let dir = if amount > 0 { ScrollDirection::Up } else { ScrollDirection::Down };
        let rule = self.find_rule(Some(hit), |t, cand| match t {
            Trigger::Scroll { target, direction } => {
                self.target_matches(target, cand) && direction.map_or(true, |d| d == dir)
            }
            _ => false,
        });
        self.fire(rule);
    }
}

/// Transition function. Actions that hit no rule leave the digest unchanged.
pub fn step(state: &EnvState, action: &Action) -> EnvState {
    let mut next = state.clone();
    match action {
        Action::MoveTo { x, y } => {
            next.pointer.x = *x;
            next.pointer.y = *y;
        }
        Action::Click { x, y, button, clicks } => {
            next.pointer.x = *x;
            next.pointer.y = *y;
            next.click(*x, *y, *button, *clicks);
        }
        Action::Write { text } => next.write(text),
        Action::Hotkey { keys } => next.key_combo(keys),
        Action::Scroll { amount } => next.scroll(*amount),
        Action::DragTo { x, y, .. } => {
            let from = (next.pointer.x, next.pointer.y);
            next.pointer.x = *x;
            next.pointer.y = *y;
            next.drag(from, (*x, *y));
        }
        Action::MouseDown { button } => {
            next.pointer.pressed = Some(Press { button: *button, x: next.pointer.x, y: next.pointer.y });
        }
        Action::MouseUp { button } => {
            if let Some(p) = next.pointer.pressed.take() {
                if p.button == *button {
                    let (x, y) = (next.pointer.x, next.pointer.y);
                    if (p.x, p.y) == (x, y) {
                        next.click(x, y, *button, 1);
                    } else if *button == MouseButton::Left {
                        next.drag((p.x, p.y), (x, y));
                    }
                }
            }
        }
        Action::Press { key } => next.press(key),
        Action::KeyDown { key } => {
            if !next.pointer.held_keys.contains(key) {
                next.pointer.held_keys.push(key.clone());
            }
        }
        Action::KeyUp { key } => next.pointer.held_keys.retain(|k| k != key),
    }
    next
}

/// Folds `step` over a script.
pub fn run_script(state: &EnvState, script: &ActionScript) -> EnvState {
    script.actions.iter().fold(state.clone(), |s, a| step(&s, a))
}

/// Applies a pre-action script to build an augmented initial state.
pub fn apply_preactions(state: &EnvState, script: &ActionScript) -> Result<EnvState, SimError> {
    let violations = validate_bounds(script, state.screen());
    if !violations.is_empty() {
        return Err(SimError::PreactionOutOfBounds(violations));
    }
    Ok(run_script(state, script))
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FsPredicate {
    Exists { path: String },
    Absent { path: String },
    InDir { dir: String, path: String },
}

pub fn fs_status(state: &EnvState, predicate: &FsPredicate) -> bool {
    match predicate {
        FsPredicate::Exists { path } => valid_path(path) && state.fs.contains_key(path),
        FsPredicate::Absent { path } => valid_path(path) && !state.fs.contains_key(path),
        FsPredicate::InDir { dir, path } => {
            let parent = match path.rsplit_once('/') {
                Some(("", _)) => "/",
                Some((p, _)) => p,
                None => return false,
            };
            valid_path(path) && state.fs.contains_key(path) && parent == normalize_dir(dir)
        }
    }
}

fn normalize_dir(dir: &str) -> &str {
    let d = dir.trim_end_matches('/');
    if d.is_empty() {
        "/"
    } else {
        d
    }
}
