//! The agent: planner, planner critic, step check, actor and actor critic,
//! driven by a bounded reasoning loop.
//!
//! Each module renders a prompt, asks the backend, and parses a structured
//! reply, re-asking up to `parse_retries` times on malformed output. The
//! loop in [`run_episode`] verifies every action before moving on and
//! corrects failed ones at most `max_critic_trials` times.

mod episode;
mod modules;
mod output;
mod plan;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::GatewayError;
use crate::gui::DEFAULT_MATCH_THRESHOLD;

pub use episode::{run_episode, EpisodeOutcome, TaskContext};
pub use modules::{history_text, plan_overview, Modules, RegionSearch, StepCheckOutcome};
pub use output::{
    parse_actor_script, parse_critique, parse_decision, parse_element_choice, parse_verdict, strip_code_fences,
    tag_content, ActorCriticVerdict, CritiqueFeedback, PlannerCriticOutput, ScriptProblem, StepCheckDecision,
};
pub use plan::{numbered_lines, Milestone, Plan, Subtask, SubtaskStatus};
pub use trace::{digest_hex, Budgets, EpisodeTrace, LoopState, TraceEntry, TRACE_SCHEMA_VERSION};

/// What to do when a subtask runs out of critic trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExhaustionPolicy {
    /// Mark the subtask failed and move on.
    #[default]
    Advance,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub planner_critic: bool,
    pub step_check: bool,
    pub actor_critic: bool,
    pub region_search: bool,
    /// Record the first verification as a Critic entry, as the pseudocode
    /// does, instead of only entering Critic after a failed verdict.
    pub literal_algorithm: bool,
    pub exhaustion: ExhaustionPolicy,
    pub max_critic_trials: u32,
    pub parse_retries: u32,
    pub match_threshold: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            planner_critic: true,
            step_check: true,
            actor_critic: true,
            region_search: true,
            literal_algorithm: false,
            exhaustion: ExhaustionPolicy::Advance,
            max_critic_trials: 3,
            parse_retries: 2,
            match_threshold: DEFAULT_MATCH_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("query is empty")]
    EmptyQuery,
    #[error("plan unreadable after {attempts} attempts: {detail}")]
    PlanParse { attempts: u32, detail: String },
    #[error("plan critique unreadable after {attempts} attempts: {detail}")]
    CritiqueParse { attempts: u32, detail: String },
    #[error("step-check decision unreadable after {attempts} attempts: {detail}")]
    DecisionParse { attempts: u32, detail: String },
    #[error("action code unreadable after {attempts} attempts: {detail}")]
    ActionParse { attempts: u32, detail: String },
    #[error("action outside the screen: {detail}")]
    OutOfBoundsAction { detail: String },
    #[error("critic verdict unreadable after {attempts} attempts: {detail}")]
    VerdictParse { attempts: u32, detail: String },
    #[error("correction failed: {detail}")]
    CorrectionFailed { detail: String },
}
