use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::modules::RegionSearch;
use super::output::{ActorCriticVerdict, PlannerCriticOutput, StepCheckDecision};
use super::plan::{Plan, Subtask};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopState {
    Continue,
    Next,
    Critic,
    Done,
    Failed { reason: String },
}

impl LoopState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, LoopState::Done | LoopState::Failed { .. })
    }
}

/// One record of the reasoning loop. Which optional fields are set depends
/// on the event; see `docs/trace-format.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Loop iteration; 0 for planning records.
    pub t: u32,
    pub loop_state: LoopState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtask_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Plan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critique: Option<PlannerCriticOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<StepCheckDecision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_search: Option<RegionSearch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub located: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest_before: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest_after: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<ActorCriticVerdict>,
    /// Critic trials used on this subtask so far.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub z: u32,
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

impl TraceEntry {
    pub fn new(t: u32, loop_state: LoopState) -> Self {
        TraceEntry {
            t,
            loop_state,
            subtask_id: None,
            subtask: None,
            plan: None,
            critique: None,
            decision: None,
            region_search: None,
            located: None,
            action: None,
            digest_before: None,
            digest_after: None,
            verdict: None,
            z: 0,
        }
    }

    pub fn for_subtask(t: u32, loop_state: LoopState, s: &Subtask) -> Self {
        TraceEntry { subtask_id: Some(s.id.clone()), subtask: Some(s.text.clone()), ..Self::new(t, loop_state) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    /// Flattened subtask count of the plan the loop started with.
    pub n: u32,
    pub max_iterations: u32,
    pub iterations: u32,
    pub critic_trials: BTreeMap<String, u32>,
    pub total_critic_trials: u32,
    pub model_calls: u32,
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub entries: Vec<TraceEntry>,
    pub budgets: Budgets,
    /// Working plan at the end, with statuses.
    pub subtasks: Vec<Subtask>,
}

impl EpisodeTrace {
    /// Ids of subtasks resolved without acting (Finished or Pass).
    pub fn skipped_ids(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| matches!(e.decision, Some(StepCheckDecision::Finished | StepCheckDecision::Pass)))
            .filter_map(|e| e.subtask_id.as_deref())
            .collect()
    }

    pub fn actions_for(&self, id: &str) -> usize {
        self.entries.iter().filter(|e| e.subtask_id.as_deref() == Some(id) && e.action.is_some()).count()
    }

    pub fn final_state(&self) -> Option<&LoopState> {
        self.entries.last().map(|e| &e.loop_state)
    }
}

pub fn digest_hex(d: u64) -> String {
    format!("{d:016x}")
}
