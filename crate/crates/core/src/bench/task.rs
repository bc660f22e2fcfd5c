use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::eval::EvalSpec;
use super::HarnessError;
use crate::action::{parse_script, ScriptMode};
use crate::sim::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Office,
    WinUsage,
    Web,
    Coding,
    Media,
}

impl Category {
    pub const ALL: [Category; 5] = [Category::Office, Category::WinUsage, Category::Web, Category::Coding, Category::Media];

    pub fn title(self) -> &'static str {
        match self {
            Category::Office => "Office",
            Category::WinUsage => "Win. Usage",
            Category::Web => "Web",
            Category::Coding => "Coding",
            Category::Media => "Media",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Meta,
    AddStep,
    TrimStep,
    AdjustStep,
}

impl TaskKind {
    pub fn is_meta(self) -> bool {
        self == TaskKind::Meta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    #[default]
    Simple,
    Medium,
    Hard,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtSubtask {
    pub text: String,
    /// Action code that performs the subtask from the state the previous
    /// subtasks leave behind.
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtMilestone {
    pub title: String,
    pub subtasks: Vec<GtSubtask>,
}

/// Annotated plan with the action code for every subtask.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GtPlan(pub Vec<GtMilestone>);

impl GtPlan {
    pub fn subtasks(&self) -> impl Iterator<Item = &GtSubtask> {
        self.0.iter().flat_map(|m| &m.subtasks)
    }

    /// Concatenated action code of every subtask.
    pub fn script(&self) -> String {
        self.subtasks().map(|s| s.action.as_str()).collect::<Vec<_>>().join("\n")
    }

    /// Plan text in the planner's output format.
    pub fn plan_text(&self) -> String {
        let mut lines = Vec::new();
        let mut n = 1;
        for (i, m) in self.0.iter().enumerate() {
            lines.push(format!("Milestone {}: {}", i + 1, m.title));
            for s in &m.subtasks {
                lines.push(format!("{n}. {}", s.text));
                n += 1;
            }
        }
        lines.join("\n")
    }
}

/// One task, resolved from its family manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub id: String,
    pub family: String,
    pub category: Category,
    pub kind: TaskKind,
    pub parent: Option<String>,
    pub query: String,
    pub instruction_text: String,
    pub scenario_ref: PathBuf,
    pub pre_actions: String,
    pub gt_plan: GtPlan,
    pub eval: EvalSpec,
    pub difficulty: Difficulty,
    /// Remembered application preferences present before the episode.
    pub prefs: BTreeMap<String, String>,
}

/// A task entry as written in a family manifest. Unset fields inherit from
/// the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDoc {
    pub id: String,
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub pre_actions: String,
    pub gt_plan: GtPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<Difficulty>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub prefs: BTreeMap<String, String>,
}

/// One JSON document per task family: a meta task and its variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDoc {
    pub family: String,
    pub category: Category,
    /// Scenario path relative to this file.
    pub scenario: String,
    pub query: String,
    pub instruction_text: String,
    #[serde(default)]
    pub difficulty: Difficulty,
    pub eval: EvalSpec,
    #[serde(default)]
    pub tasks: Vec<TaskDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestError {
    pub file: PathBuf,
    pub task: Option<String>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ManifestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file.display())?;
        if let Some(t) = &self.task {
            write!(f, " task `{t}`")?;
        }
        write!(f, " field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ManifestError {}

impl FamilyDoc {
    pub fn read(path: &Path) -> Result<FamilyDoc, ManifestError> {
        let err = |field: &str, message: String| ManifestError {
            file: path.to_path_buf(),
            task: None,
            field: field.to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err("", e.to_string()))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| err(&e.path().to_string(), e.inner().to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
    }

    pub(super) fn resolve(&self, file: &Path) -> Result<Vec<TaskSpec>, ManifestError> {
        let base = file.parent().unwrap_or(Path::new("."));
        let scenario_ref = base.join(&self.scenario);
        let err = |task: Option<&str>, field: &str, message: String| ManifestError {
            file: file.to_path_buf(),
            task: task.map(str::to_string),
            field: field.to_string(),
            message,
        };
        if !self.tasks.is_empty() {
            let text = std::fs::read_to_string(&scenario_ref)
                .map_err(|e| err(None, "scenario", format!("{}: {e}", scenario_ref.display())))?;
            Scenario::from_json(&text).map_err(|e| err(None, "scenario", e.to_string()))?;
        }
        self.eval.check().map_err(|m| err(None, "eval", m))?;
        let mut out = Vec::new();
        for t in &self.tasks {
            let id = Some(t.id.as_str());
            if t.id.is_empty() {
                return Err(err(None, "id", "empty task id".into()));
            }
            match (t.kind.is_meta(), &t.parent) {
                (true, Some(_)) => return Err(err(id, "parent", "meta tasks have no parent".into())),
                (true, None) if !t.pre_actions.trim().is_empty() => {
                    return Err(err(id, "pre_actions", "meta tasks start from the default state".into()))
                }
                (false, None) => return Err(err(id, "parent", "augmented tasks must name their meta task".into())),
                _ => {}
            }
            parse_script(&t.pre_actions, ScriptMode::Preaction).map_err(|e| err(id, "pre_actions", e.to_string()))?;
            if t.gt_plan.subtasks().next().is_none() {
                return Err(err(id, "gt_plan", "plan has no subtasks".into()));
            }
            for (mi, m) in t.gt_plan.0.iter().enumerate() {
                for (si, s) in m.subtasks.iter().enumerate() {
                    parse_script(&s.action, ScriptMode::Strict)
                        .map_err(|e| err(id, &format!("gt_plan[{mi}].subtasks[{si}].action"), e.to_string()))?;
                }
            }
            let eval = t.eval.clone().unwrap_or_else(|| self.eval.clone());
            eval.check().map_err(|m| err(id, "eval", m))?;
            out.push(TaskSpec {
                id: t.id.clone(),
                family: self.family.clone(),
                category: self.category,
                kind: t.kind,
                parent: t.parent.clone(),
                query: self.query.clone(),
                instruction_text: self.instruction_text.clone(),
                scenario_ref: scenario_ref.clone(),
                pre_actions: t.pre_actions.clone(),
                gt_plan: t.gt_plan.clone(),
                eval,
                difficulty: t.difficulty.unwrap_or(self.difficulty),
                prefs: t.prefs.clone(),
            });
        }
        Ok(out)
    }
}

/// Family manifest files under `path`: the file itself, or every `*.json`
/// in the directory, sorted by name.
pub fn manifest_files(path: &Path) -> Result<Vec<PathBuf>, ManifestError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let err = |message: String| ManifestError { file: path.to_path_buf(), task: None, field: String::new(), message };
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| err(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads and checks every task: scenarios load, scripts parse, ids are
/// unique and augmented tasks point at a meta task.
pub fn load_tasks(path: &Path) -> Result<Vec<TaskSpec>, ManifestError> {
    let mut tasks = Vec::new();
    let mut origin = BTreeMap::new();
    for file in manifest_files(path)? {
        for t in FamilyDoc::read(&file)?.resolve(&file)? {
            origin.insert(t.id.clone(), file.clone());
            tasks.push(t);
        }
    }
    let mut seen = BTreeSet::new();
    for t in &tasks {
        if !seen.insert(t.id.as_str()) {
            return Err(ManifestError {
                file: origin[&t.id].clone(),
                task: Some(t.id.clone()),
                field: "id".into(),
                message: "duplicate task id".into(),
            });
        }
    }
    let metas: BTreeSet<&str> = tasks.iter().filter(|t| t.kind.is_meta()).map(|t| t.id.as_str()).collect();
    for t in &tasks {
        if let Some(p) = &t.parent {
            if !metas.contains(p.as_str()) {
                return Err(ManifestError {
                    file: origin[&t.id].clone(),
                    task: Some(t.id.clone()),
                    field: "parent".into(),
                    message: format!("`{p}` is not a meta task"),
                });
            }
        }
    }
    Ok(tasks)
}
