use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::eval::evaluate;
use super::report::{RunReport, TaskRow};
use super::task::TaskSpec;
use super::HarnessError;
use crate::action::{parse_script, ScriptMode};
use crate::agent::{digest_hex, run_episode, AgentConfig, Budgets, EpisodeTrace, TaskContext, TraceEntry, TRACE_SCHEMA_VERSION};
use crate::gateway::{ChatBackend, HttpBackend, ScriptedBackend, Templates};
use crate::sim::{apply_preactions, EnvState, Scenario};

pub fn load_scenario_file(path: &Path) -> Result<Arc<Scenario>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(Scenario::from_json(&text)?)
}

/// Initial state for a task: the scenario default (with remembered
/// preferences), then the pre-actions for augmented tasks.
pub fn materialize(task: &TaskSpec) -> Result<EnvState, HarnessError> {
    let scenario = load_scenario_file(&task.scenario_ref)?;
    let st = EnvState::initial(&scenario, &task.prefs);
    if task.kind.is_meta() {
        return Ok(st);
    }
    let pre = parse_script(&task.pre_actions, ScriptMode::Preaction)?;
    Ok(apply_preactions(&st, &pre)?)
}

/// Hands each episode its own backend, so per-episode state never leaks.
pub trait BackendProvider: Sync {
    fn backend_for(&self, task: &TaskSpec) -> Result<Box<dyn ChatBackend>, HarnessError>;
}

/// Scripted rules layered from several sources; earlier sources win. A file
/// applies to every task; a directory contributes `<task id>.json` if
/// present, else `<family>.json`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedProvider {
    pub sources: Vec<PathBuf>,
}

impl ScriptedProvider {
    pub fn new(sources: Vec<PathBuf>) -> Self {
        ScriptedProvider { sources }
    }

    /// Parses the part after `scripted:`, a comma-separated path list.
    pub fn from_spec(list: &str) -> Self {
        Self::new(list.split(',').filter(|s| !s.is_empty()).map(PathBuf::from).collect())
    }

    pub fn rules_for(&self, task: &TaskSpec) -> Result<ScriptedBackend, HarnessError> {
        let mut rules = ScriptedBackend::default();
        let mut found = false;
        for src in &self.sources {
            let file = if src.is_dir() {
                [format!("{}.json", task.id), format!("{}.json", task.family)]
                    .into_iter()
                    .map(|n| src.join(n))
                    .find(|p| p.is_file())
            } else {
                Some(src.clone())
            };
            if let Some(f) = file {
                rules = rules.then(&ScriptedBackend::load(&f)?);
                found = true;
            }
        }
        if !found {
            return Err(HarnessError::Config(format!("no scripted rules apply to task `{}`", task.id)));
        }
        Ok(rules)
    }
}

impl BackendProvider for ScriptedProvider {
    fn backend_for(&self, task: &TaskSpec) -> Result<Box<dyn ChatBackend>, HarnessError> {
        Ok(Box::new(self.rules_for(task)?.session()))
    }
}

#[derive(Debug, Clone)]
pub struct HttpProvider(pub HttpBackend);

impl BackendProvider for HttpProvider {
    fn backend_for(&self, _task: &TaskSpec) -> Result<Box<dyn ChatBackend>, HarnessError> {
        Ok(Box::new(self.0.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub task_id: String,
    pub scenario: PathBuf,
    pub scenario_digest: String,
    #[serde(default)]
    pub prefs: BTreeMap<String, String>,
    pub pre_actions: String,
    /// Digest of the materialized state.
    pub initial_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub reward: u8,
    pub budgets: Budgets,
    pub subtasks: Vec<crate::agent::Subtask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    Header(TraceHeader),
    Entry(TraceEntry),
    Summary(TraceSummary),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub entries: Vec<TraceEntry>,
    pub summary: TraceSummary,
}

impl TraceFile {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut line = |r: &TraceRecord| {
            out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            out.push('\n');
        };
        line(&TraceRecord::Header(self.header.clone()));
        for e in &self.entries {
            line(&TraceRecord::Entry(e.clone()));
        }
        line(&TraceRecord::Summary(self.summary.clone()));
        out
    }

    pub fn from_jsonl(text: &str) -> Result<TraceFile, HarnessError> {
        let mut header = None;
        let mut entries = Vec::new();
        let mut summary = None;
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec: TraceRecord =
                serde_json::from_str(line).map_err(|e| HarnessError::Trace(format!("line {}: {e}", n + 1)))?;
            match rec {
                TraceRecord::Header(h) if header.is_none() => header = Some(h),
                TraceRecord::Entry(e) => entries.push(e),
                TraceRecord::Summary(s) => summary = Some(s),
                TraceRecord::Header(_) => return Err(HarnessError::Trace(format!("line {}: second header", n + 1))),
            }
        }
        let header = header.ok_or_else(|| HarnessError::Trace("missing header".into()))?;
        if header.schema_version != TRACE_SCHEMA_VERSION {
            return Err(HarnessError::Trace(format!("unsupported schema version {}", header.schema_version)));
        }
        let summary = summary.ok_or_else(|| HarnessError::Trace("missing summary".into()))?;
        Ok(TraceFile { header, entries, summary })
    }

    pub fn episode(&self) -> EpisodeTrace {
        EpisodeTrace {
            entries: self.entries.clone(),
            budgets: self.summary.budgets.clone(),
            subtasks: self.summary.subtasks.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub parallel: usize,
    pub agent: AgentConfig,
    pub templates: Templates,
    /// Where traces and reports go; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { parallel: 1, agent: AgentConfig::default(), templates: Templates::builtin(), out_dir: None }
    }
}

/// Result of one task in a suite.
#[derive(Debug, Clone)]
pub struct TaskRun {
    pub row: TaskRow,
    pub trace: Option<TraceFile>,
    pub wall_ms: u128,
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Materializes, runs and scores one task. Errors become reward 0.
pub fn run_task(task: &TaskSpec, provider: &dyn BackendProvider, opts: &SuiteOptions) -> TaskRun {
    let start = Instant::now();
    let mut row = TaskRow::new(task);
    let attempt = catch_unwind(AssertUnwindSafe(|| -> Result<TraceFile, HarnessError> {
        let env = materialize(task)?;
        let backend = provider.backend_for(task)?;
        let header = TraceHeader {
            schema_version: TRACE_SCHEMA_VERSION,
            task_id: task.id.clone(),
            scenario: task.scenario_ref.clone(),
            scenario_digest: digest_hex(env.scenario().doc_digest),
            prefs: task.prefs.clone(),
            pre_actions: task.pre_actions.clone(),
            initial_digest: digest_hex(env.digest()),
        };
        let ctx = TaskContext { query: &task.query, instruction_text: &task.instruction_text };
        let spec = &task.eval;
        let out = run_episode(ctx, env, backend.as_ref(), &opts.templates, &opts.agent, &|s| evaluate(s, spec) == 1);
        Ok(TraceFile {
            header,
            entries: out.trace.entries,
            summary: TraceSummary {
                reward: out.reward,
                budgets: out.trace.budgets,
                subtasks: out.trace.subtasks,
                error: out.error,
            },
        })
    }));
    let trace = match attempt {
        Ok(Ok(tf)) => {
            row.reward = tf.summary.reward;
            row.steps = tf.entries.iter().filter(|e| e.action.is_some()).count() as u32;
            row.error = tf.summary.error.clone();
            Some(tf)
        }
        Ok(Err(e)) => {
            row.error = Some(e.to_string());
            None
        }
        Err(p) => {
            row.error = Some(format!("panic: {}", panic_message(p.as_ref())));
            None
        }
    };
    let wall_ms = start.elapsed().as_millis();
    tracing::info!(task = %task.id, reward = row.reward, steps = row.steps, wall_ms, error = ?row.error, "task finished");
    TaskRun { row, trace, wall_ms }
}

/// Runs every task on a bounded worker pool and assembles the report in
/// task order. Writes traces and reports when `out_dir` is set.
pub fn run_suite(
    tasks: &[TaskSpec],
    provider: &dyn BackendProvider,
    opts: &SuiteOptions,
) -> Result<(RunReport, Vec<TaskRun>), HarnessError> {
    let slots: Mutex<Vec<Option<TaskRun>>> = Mutex::new(vec![None; tasks.len()]);
    let next = AtomicUsize::new(0);
    let workers = opts.parallel.clamp(1, tasks.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= tasks.len() {
                    break;
                }
                let run = run_task(&tasks[i], provider, opts);
                slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(run);
            });
        }
    });
    let runs: Vec<TaskRun> = slots
        .into_inner()
        .unwrap_or_else(|p| p.into_inner())
        .into_iter()
        .map(|r| r.expect("every slot is filled after the join"))
        .collect();
    let report = RunReport { rows: runs.iter().map(|r| r.row.clone()).collect() };
    if let Some(dir) = &opts.out_dir {
        write_outputs(dir, &report, &runs)?;
    }
    Ok((report, runs))
}

/// `traces/<id>.jsonl`, `report.json`, `report.txt`, and wall times in
/// `timings.json` (kept apart so reports stay byte-identical across runs).
pub fn write_outputs(dir: &Path, report: &RunReport, runs: &[TaskRun]) -> Result<(), HarnessError> {
    let traces = dir.join("traces");
    std::fs::create_dir_all(&traces).map_err(|e| HarnessError::io(&traces, e))?;
    for run in runs {
        if let Some(tf) = &run.trace {
            let p = traces.join(format!("{}.jsonl", run.row.id));
            std::fs::write(&p, tf.to_jsonl()).map_err(|e| HarnessError::io(&p, e))?;
        }
    }
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| HarnessError::io(&p, e))
    };
    write("report.json", report.to_json())?;
    write("report.txt", report.table() + "\n")?;
    let timings: BTreeMap<&str, u128> = runs.iter().map(|r| (r.row.id.as_str(), r.wall_ms)).collect();
    write("timings.json", serde_json::to_string_pretty(&timings).expect("timings serialize") + "\n")?;
    Ok(())
}
