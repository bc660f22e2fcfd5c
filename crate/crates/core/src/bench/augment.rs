use std::path::Path;

use super::task::{FamilyDoc, GtPlan, TaskDoc, TaskKind};
use super::validate::validate_task;
use super::HarnessError;

/// A new variant of an existing meta task.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentRequest {
    pub parent: String,
    pub kind: TaskKind,
    pub pre_actions: String,
    /// Defaults to `<parent>_<kind>_<n>`.
    pub id: Option<String>,
    /// Plan for the perturbed start; the parent's plan when unset.
    pub gt_plan: Option<GtPlan>,
}

fn kind_slug(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::Meta => "meta",
        TaskKind::AddStep => "add",
        TaskKind::TrimStep => "trim",
        TaskKind::AdjustStep => "adjust",
    }
}

/// Appends a variant to the family manifest at `file` after checking that
/// its pre-actions apply and its GT plan still reaches the goal from the
/// perturbed state. Returns the new task id.
pub fn augment_task(file: &Path, req: &AugmentRequest) -> Result<String, HarnessError> {
    if req.kind.is_meta() {
        return Err(HarnessError::Config("augmented tasks need kind add, trim or adjust".into()));
    }
    let mut doc = FamilyDoc::read(file)?;
    let parent = doc
        .tasks
        .iter()
        .find(|t| t.id == req.parent && t.kind.is_meta())
        .ok_or_else(|| HarnessError::Config(format!("no meta task `{}` in {}", req.parent, file.display())))?
        .clone();
    let id = req.id.clone().unwrap_or_else(|| {
        (1..)
            .map(|n| format!("{}_{}_{n}", req.parent, kind_slug(req.kind)))
            .find(|c| doc.tasks.iter().all(|t| &t.id != c))
            .expect("unbounded candidates")
    });
    if doc.tasks.iter().any(|t| t.id == id) {
        return Err(HarnessError::Config(format!("task `{id}` already exists")));
    }
    let entry = TaskDoc {
        id: id.clone(),
        kind: req.kind,
        parent: Some(req.parent.clone()),
        pre_actions: req.pre_actions.clone(),
        gt_plan: req.gt_plan.clone().unwrap_or_else(|| parent.gt_plan.clone()),
        difficulty: None,
        eval: None,
        prefs: parent.prefs.clone(),
    };
    doc.tasks.push(entry);

    let tasks = doc.resolve(file)?;
    let task = tasks.iter().find(|t| t.id == id).expect("new task is resolved");
    if validate_task(task)?.reward != 1 {
        return Err(HarnessError::Task {
            id,
            message: "GT plan does not reach the goal from the perturbed state; supply an adjusted plan".into(),
        });
    }
    doc.write(file)?;
    Ok(id)
}
