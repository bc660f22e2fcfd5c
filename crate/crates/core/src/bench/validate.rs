use super::eval::evaluate;
use super::suite::materialize;
use super::task::TaskSpec;
use super::HarnessError;
use crate::action::{parse_script, ScriptMode};
use crate::agent::digest_hex;
use crate::sim::run_script;

/// Outcome of replaying a task's GT plan from its materialized state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validation {
    pub id: String,
    pub reward: u8,
    pub initial_digest: String,
    pub final_digest: String,
}

pub fn validate_task(task: &TaskSpec) -> Result<Validation, HarnessError> {
    let start = materialize(task)?;
    let script = parse_script(&task.gt_plan.script(), ScriptMode::Strict)?;
    let end = run_script(&start, &script);
    Ok(Validation {
        id: task.id.clone(),
        reward: evaluate(&end, &task.eval),
        initial_digest: digest_hex(start.digest()),
        final_digest: digest_hex(end.digest()),
    })
}

/// Scenario self-test for every task. A task that cannot be materialized
/// is reported as an error for that task.
pub fn validate_tasks(tasks: &[TaskSpec]) -> Vec<Result<Validation, HarnessError>> {
    tasks.iter().map(validate_task).collect()
}
