//! Benchmark harness: task manifests, pre-action augmentation, final-state
//! evaluation, suite running, replay and success-rate reports.

mod augment;
mod eval;
mod replay;
mod report;
mod suite;
mod task;
mod validate;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::action::ParseError;
use crate::gateway::GatewayError;
use crate::sim::SimError;

pub use augment::{augment_task, AugmentRequest};
pub use eval::{evaluate, EvalSpec, WidgetPredicate};
pub use replay::{replay_trace, ReplaySummary};
pub use report::{report_table, CellStats, RunReport, TaskRow};
pub use suite::{
    load_scenario_file, materialize, run_suite, run_task, write_outputs, BackendProvider, HttpProvider,
    ScriptedProvider, SuiteOptions, TaskRun, TraceFile, TraceHeader, TraceRecord, TraceSummary,
};
pub use task::{
    load_tasks, manifest_files, Category, Difficulty, FamilyDoc, GtMilestone, GtPlan, GtSubtask, ManifestError,
    TaskDoc, TaskKind, TaskSpec,
};
pub use validate::{validate_task, validate_tasks, Validation};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("trace: {0}")]
    Trace(String),
    #[error("replay diverged at entry {entry}: expected {field} {expected}, got {actual}")]
    ReplayMismatch { entry: usize, field: &'static str, expected: String, actual: String },
    #[error("{0}")]
    Config(String),
    #[error("task `{id}`: {message}")]
    Task { id: String, message: String },
}

impl HarnessError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), message: e.to_string() }
    }
}
