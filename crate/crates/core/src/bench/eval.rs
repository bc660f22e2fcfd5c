use serde::{Deserialize, Serialize};

use crate::agent::digest_hex;
use crate::sim::{fs_status, EnvState, FsPredicate, Value};

/// Expected properties of one widget. Unset fields are not checked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidgetPredicate {
    pub id: String,
    /// Shown on screen, which includes every ancestor being visible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visible: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

impl WidgetPredicate {
    pub fn holds(&self, st: &EnvState) -> bool {
        let Some(idx) = st.scenario().lookup(&self.id) else { return false };
        let Some(w) = st.widget(&self.id) else { return false };
        self.visible.is_none_or(|v| st.is_shown(idx) == v)
            && self.selected.is_none_or(|v| w.selected == v)
            && self.enabled.is_none_or(|v| w.enabled == v)
            && self.value.as_ref().is_none_or(|v| w.value.as_ref() == Some(v))
    }
}

/// Success check on the final state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EvalSpec {
    ExactStateMatch {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        goal_flags: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        widgets: Vec<WidgetPredicate>,
        /// Hex state digest, as printed by `validate`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        digest: Option<String>,
    },
    FileStatus {
        predicates: Vec<FsPredicate>,
    },
}

impl EvalSpec {
    pub fn check(&self) -> Result<(), String> {
        let empty = match self {
            EvalSpec::ExactStateMatch { goal_flags, widgets, digest } => {
                goal_flags.is_empty() && widgets.is_empty() && digest.is_none()
            }
            EvalSpec::FileStatus { predicates } => predicates.is_empty(),
        };
        if empty {
            Err("evaluation needs at least one check".into())
        } else {
            Ok(())
        }
    }
}

/// 1 when every check passes, else 0.
pub fn evaluate(st: &EnvState, spec: &EvalSpec) -> u8 {
    let ok = match spec {
        EvalSpec::ExactStateMatch { goal_flags, widgets, digest } => {
            goal_flags.iter().all(|f| st.goal_flags.contains(f))
                && widgets.iter().all(|w| w.holds(st))
                && digest.as_ref().is_none_or(|d| d.eq_ignore_ascii_case(&digest_hex(st.digest())))
        }
        EvalSpec::FileStatus { predicates } => predicates.iter().all(|p| fs_status(st, p)),
    };
    u8::from(ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{parse_script, ScriptMode};
    use crate::sim::{load_scenario, run_script};

    const DOC: &str = r#"{
      "name": "eval",
      "screen": {"w": 200, "h": 100},
      "widgets": [{"id": "win", "role": "window", "bbox": {"x":0,"y":0,"w":200,"h":100}, "children": [
        {"id": "go", "role": "button", "label": "Go", "bbox": {"x":10,"y":10,"w":40,"h":20}},
        {"id": "pane", "role": "pane", "label": "P", "visible": false, "bbox": {"x":60,"y":10,"w":100,"h":60},
         "children": [{"id": "inner", "role": "button", "label": "In", "bbox": {"x":70,"y":20,"w":20,"h":20}}]},
        {"id": "name", "role": "textbox", "label": "Name", "bbox": {"x":10,"y":50,"w":40,"h":20}, "value": "bob"}
      ]}],
      "rules": [{"trigger": {"click": {"target": "go"}}, "effects": [{"mark_goal_flag": "went"}]}],
      "fs": {"/docs/a.txt": {"size": 1}},
      "goal_flags": ["went"]
    }"#;

    fn spec(json: &str) -> EvalSpec {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn goal_flags_and_widgets() {
        let st = load_scenario(DOC).unwrap();
        let done = run_script(&st, &parse_script("click(20, 20)", ScriptMode::Strict).unwrap());
        let s = spec(r#"{"type": "exact_state_match", "goal_flags": ["went"], "widgets": [{"id": "name", "value": "bob"}]}"#);
        assert_eq!((evaluate(&st, &s), evaluate(&done, &s)), (0, 1));
        // A visible child of a hidden pane is not shown.
        let hidden = spec(r#"{"type": "exact_state_match", "widgets": [{"id": "inner", "visible": false}]}"#);
        assert_eq!(evaluate(&st, &hidden), 1);
        let unknown = spec(r#"{"type": "exact_state_match", "widgets": [{"id": "ghost"}]}"#);
        assert_eq!(evaluate(&st, &unknown), 0);
    }

    #[test]
    fn digest_compare_ignores_case() {
        let st = load_scenario(DOC).unwrap();
        let hex = digest_hex(st.digest()).to_uppercase();
        let s = EvalSpec::ExactStateMatch { goal_flags: vec![], widgets: vec![], digest: Some(hex) };
        assert_eq!(evaluate(&st, &s), 1);
        let wrong = EvalSpec::ExactStateMatch { goal_flags: vec![], widgets: vec![], digest: Some(digest_hex(0)) };
        assert_eq!(evaluate(&st, &wrong), 0);
    }

    #[test]
    fn file_status() {
        let st = load_scenario(DOC).unwrap();
        let s = spec(r#"{"type": "file_status", "predicates": [{"exists": {"path": "/docs/a.txt"}}, {"absent": {"path": "/docs/b.txt"}}]}"#);
        assert_eq!(evaluate(&st, &s), 1);
        let s = spec(r#"{"type": "file_status", "predicates": [{"in_dir": {"dir": "/bin", "path": "/docs/a.txt"}}]}"#);
        assert_eq!(evaluate(&st, &s), 0);
    }

    #[test]
    fn empty_specs_are_rejected() {
        assert!(spec(r#"{"type": "exact_state_match"}"#).check().is_err());
        assert!(spec(r#"{"type": "file_status", "predicates": []}"#).check().is_err());
        assert!(spec(r#"{"type": "exact_state_match", "goal_flags": ["x"]}"#).check().is_ok());
        assert!(serde_json::from_str::<EvalSpec>(r#"{"type": "exact_state_match", "widgets": [{"id": "a", "colour": 1}]}"#).is_err());
    }
}
