use std::path::Path;

use super::suite::{load_scenario_file, TraceFile};
use super::HarnessError;
use crate::action::{parse_script, ScriptMode};
use crate::agent::digest_hex;
use crate::sim::{apply_preactions, observe, run_script, EnvState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplaySummary {
    pub task_id: String,
    /// Entries with an action that were re-executed.
    pub actions: usize,
    pub final_digest: String,
}

fn check(entry: usize, field: &'static str, expected: Option<&String>, actual: String) -> Result<(), HarnessError> {
    match expected {
        Some(e) if *e != actual => {
            Err(HarnessError::ReplayMismatch { entry, field, expected: e.clone(), actual })
        }
        _ => Ok(()),
    }
}

/// Rebuilds the initial state from the trace header, re-executes every
/// recorded action and checks the observation digests on both sides.
/// A relative scenario path resolves against `base`.
pub fn replay_trace(trace: &TraceFile, base: &Path) -> Result<ReplaySummary, HarnessError> {
    let h = &trace.header;
    let path = if h.scenario.is_absolute() { h.scenario.clone() } else { base.join(&h.scenario) };
    let scenario = load_scenario_file(&path)?;
    check(0, "scenario digest", Some(&h.scenario_digest), digest_hex(scenario.doc_digest))?;
    let mut env = EnvState::initial(&scenario, &h.prefs);
    if !h.pre_actions.trim().is_empty() {
        env = apply_preactions(&env, &parse_script(&h.pre_actions, ScriptMode::Preaction)?)?;
    }
    check(0, "initial digest", Some(&h.initial_digest), digest_hex(env.digest()))?;
    let mut actions = 0;
    for (i, e) in trace.entries.iter().enumerate() {
        let Some(code) = &e.action else { continue };
        check(i, "digest_before", e.digest_before.as_ref(), digest_hex(observe(&env).digest()))?;
        env = run_script(&env, &parse_script(code, ScriptMode::Strict)?);
        check(i, "digest_after", e.digest_after.as_ref(), digest_hex(observe(&env).digest()))?;
        actions += 1;
    }
    Ok(ReplaySummary { task_id: h.task_id.clone(), actions, final_digest: digest_hex(env.digest()) })
}
