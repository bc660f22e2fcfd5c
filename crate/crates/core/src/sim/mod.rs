//! Deterministic simulated desktop.
//!
//! A [`Scenario`] fixes the widget layout and the transition rules; an
//! [`EnvState`] is an immutable snapshot that [`step`] maps to its successor.
//! Hit-testing is depth-first with later siblings on top, and an open dialog
//! captures every pointer event. Actions that match no rule are no-ops.

mod observe;
mod scenario;
mod state;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::action::BoundsViolation;

pub use observe::{observe, ElementMeta, ElementRender, Observation, RenderArtifact};
pub use scenario::{
    stable_hash, Condition, Effect, FsEntry, FsOp, Node, Role, Scenario, ScenarioDoc, ScrollDirection,
    TransitionRule, Trigger, Value, Widget, WidgetState,
};
pub use state::{apply_preactions, fs_status, run_script, step, EnvState, FsPredicate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("scenario schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("rule {rule} references unknown widget `{id}`")]
    DanglingWidgetRef { rule: usize, id: String },
    #[error("pre-action out of bounds: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    PreactionOutOfBounds(Vec<BoundsViolation>),
}

/// Parses a scenario document and returns its default initial state.
pub fn load_scenario(doc: &str) -> Result<EnvState, SimError> {
    let scenario = Scenario::from_json(doc)?;
    Ok(EnvState::initial(&scenario, &BTreeMap::new()))
}

/// Initial state with remembered preferences applied through `load` rules.
pub fn initial_state_with_prefs(scenario: &Arc<Scenario>, prefs: &BTreeMap<String, String>) -> EnvState {
    EnvState::initial(scenario, prefs)
}
