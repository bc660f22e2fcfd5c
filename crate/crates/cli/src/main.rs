//! Command-line front end for the benchmark harness.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use deskloop::agent::{AgentConfig, ExhaustionPolicy};
use deskloop::bench::{
    augment_task, load_tasks, replay_trace, run_suite, validate_tasks, AugmentRequest, BackendProvider, GtPlan,
    HttpProvider, RunReport, ScriptedProvider, SuiteOptions, TaskKind, TraceFile,
};
use deskloop::gateway::{GatewayConfig, HttpBackend, Templates};

#[derive(Parser)]
#[command(name = "deskloop", version, about = "Run and score GUI agent tasks in a simulated desktop")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the agent over every task in a manifest.
    Run(RunArgs),
    /// Re-execute a recorded trace and check every digest.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        /// Directory that relative scenario paths resolve against.
        #[arg(long, default_value = ".")]
        base: PathBuf,
    },
    /// Add an augmented variant of a meta task to its family manifest.
    Augment {
        /// Family manifest file holding the meta task.
        #[arg(long)]
        manifest: PathBuf,
        /// Id of the meta task.
        #[arg(long)]
        task: String,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// File with the pre-action script.
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        id: Option<String>,
        /// JSON file with the adjusted GT plan; the parent's plan by default.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Print the success-rate table of a finished run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Replay every GT plan from its materialized state and evaluate it.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Add,
    Trim,
    Adjust,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// `scripted:<file or dir>[,<file or dir>...]` or `http`.
    #[arg(long)]
    backend: String,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[arg(long)]
    out: PathBuf,
    /// TOML gateway settings for the http backend.
    #[arg(long)]
    gateway_config: Option<PathBuf>,
    /// Directory with prompt template overrides.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Only run tasks with these ids.
    #[arg(long = "task")]
    tasks: Vec<String>,
    #[arg(long)]
    no_planner_critic: bool,
    #[arg(long)]
    no_step_check: bool,
    #[arg(long)]
    no_actor_critic: bool,
    #[arg(long)]
    no_region_search: bool,
    /// Record every first verification as a Critic entry.
    #[arg(long)]
    literal_algorithm: bool,
    /// Stop the episode when a subtask runs out of critic trials.
    #[arg(long)]
    abort_on_exhaustion: bool,
}

enum Failure {
    Config(anyhow::Error),
    Task(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Config(e.into())
    }
}

fn provider(args: &RunArgs) -> Result<Box<dyn BackendProvider>, Failure> {
    if let Some(list) = args.backend.strip_prefix("scripted:") {
        let p = ScriptedProvider::from_spec(list);
        if p.sources.is_empty() {
            return Err(anyhow!("scripted backend needs at least one rules file or directory").into());
        }
        if let Some(missing) = p.sources.iter().find(|s| !s.exists()) {
            return Err(anyhow!("scripted rules source {} does not exist", missing.display()).into());
        }
        return Ok(Box::new(p));
    }
    if args.backend == "http" {
        let cfg = GatewayConfig::from_env(args.gateway_config.as_deref())?;
        return Ok(Box::new(HttpProvider(HttpBackend::new(cfg))));
    }
    Err(anyhow!("unknown backend `{}`; use scripted:<paths> or http", args.backend).into())
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut tasks = load_tasks(&args.manifest)?;
    if !args.tasks.is_empty() {
        if let Some(unknown) = args.tasks.iter().find(|id| tasks.iter().all(|t| &t.id != *id)) {
            return Err(anyhow!("no task `{unknown}` in {}", args.manifest.display()).into());
        }
        tasks.retain(|t| args.tasks.contains(&t.id));
    }
    let provider = provider(&args)?;
    let templates = match &args.templates {
        Some(dir) => Templates::with_overrides(dir)?,
        None => Templates::builtin(),
    };
    let agent = AgentConfig {
        planner_critic: !args.no_planner_critic,
        step_check: !args.no_step_check,
        actor_critic: !args.no_actor_critic,
        region_search: !args.no_region_search,
        literal_algorithm: args.literal_algorithm,
        exhaustion: if args.abort_on_exhaustion { ExhaustionPolicy::Abort } else { ExhaustionPolicy::Advance },
        ..AgentConfig::default()
    };
    let opts = SuiteOptions { parallel: args.parallel, agent, templates, out_dir: Some(args.out.clone()) };
    let (report, _) = run_suite(&tasks, provider.as_ref(), &opts)?;
    println!("{}", report.table());
    let errored: Vec<String> =
        report.rows.iter().filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.id))).collect();
    if errored.is_empty() {
        Ok(())
    } else {
        Err(Failure::Task(errored.join("\n")))
    }
}

fn replay(trace: &Path, base: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(trace).with_context(|| format!("reading {}", trace.display()))?;
    let tf = TraceFile::from_jsonl(&text)?;
    match replay_trace(&tf, base) {
        Ok(s) => {
            println!("{}: {} actions replayed, final digest {}", s.task_id, s.actions, s.final_digest);
            Ok(())
        }
        Err(e) => Err(Failure::Task(e.to_string())),
    }
}

fn augment(
    manifest: &Path,
    task: String,
    kind: KindArg,
    pre: &Path,
    id: Option<String>,
    plan: Option<PathBuf>,
) -> Result<(), Failure> {
    let pre_actions = std::fs::read_to_string(pre).with_context(|| format!("reading {}", pre.display()))?;
    let gt_plan = match plan {
        Some(p) => {
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            Some(serde_json::from_str::<GtPlan>(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    let kind = match kind {
        KindArg::Add => TaskKind::AddStep,
        KindArg::Trim => TaskKind::TrimStep,
        KindArg::Adjust => TaskKind::AdjustStep,
    };
    let req = AugmentRequest { parent: task, kind, pre_actions: pre_actions.trim_end().to_string(), id, gt_plan };
    let id = augment_task(manifest, &req)?;
    println!("added {id} to {}", manifest.display());
    Ok(())
}

fn validate(manifest: &Path) -> Result<(), Failure> {
    let tasks = load_tasks(manifest)?;
    let mut failed = Vec::new();
    for (task, result) in tasks.iter().zip(validate_tasks(&tasks)) {
        match result {
            Ok(v) if v.reward == 1 => println!("ok    {} (final {})", v.id, v.final_digest),
            Ok(v) => {
                println!("FAIL  {} (final {})", v.id, v.final_digest);
                failed.push(v.id);
            }
            Err(e) => {
                println!("ERROR {}: {e}", task.id);
                failed.push(task.id.clone());
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Task(format!("{} task(s) failed validation: {}", failed.len(), failed.join(", "))))
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Replay { trace, base } => replay(&trace, &base),
        Command::Augment { manifest, task, kind, pre, id, plan } => augment(&manifest, task, kind, &pre, id, plan),
        Command::Report { input } => RunReport::load(&input).map(|r| println!("{}", r.table())).map_err(Failure::from),
        Command::Validate { manifest } => validate(&manifest),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Task(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
