use super::modules::Modules;
use super::output::{ActorCriticVerdict, StepCheckDecision};
use super::plan::{Subtask, SubtaskStatus};
use super::trace::{digest_hex, Budgets, EpisodeTrace, LoopState, TraceEntry};
use super::{AgentConfig, AgentError, ExhaustionPolicy};
use crate::action::ActionScript;
use crate::gateway::{ChatBackend, Templates};
use crate::sim::{observe, run_script, EnvState, Observation};

#[derive(Debug, Clone, Copy)]
pub struct TaskContext<'a> {
    pub query: &'a str,
    pub instruction_text: &'a str,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub reward: u8,
    pub trace: EpisodeTrace,
    pub final_state: EnvState,
    /// Set when the loop stopped on an unrecoverable error.
    pub error: Option<String>,
}

struct Episode<'a> {
    task: TaskContext<'a>,
    cfg: &'a AgentConfig,
    modules: Modules<'a>,
    env: EnvState,
    entries: Vec<TraceEntry>,
    subtasks: Vec<Subtask>,
    history: Vec<String>,
    budgets: Budgets,
}

enum Halt {
    /// Stopped early without an error, e.g. budget or abort policy.
    Stopped(String),
    Error(AgentError),
}

impl From<AgentError> for Halt {
    fn from(e: AgentError) -> Self {
        Halt::Error(e)
    }
}

impl Episode<'_> {
    fn execute(&mut self, script: &ActionScript) -> Observation {
        self.env = run_script(&self.env, script);
        self.history.push(script.to_canonical());
        observe(&self.env)
    }

    fn executed_entry(
        &self,
        t: u32,
        state: LoopState,
        sub: &Subtask,
        script: &ActionScript,
        before: &Observation,
        after: &Observation,
    ) -> TraceEntry {
        TraceEntry {
            action: Some(script.to_canonical()),
            digest_before: Some(digest_hex(before.digest())),
            digest_after: Some(digest_hex(after.digest())),
            ..TraceEntry::for_subtask(t, state, sub)
        }
    }

    fn run(&mut self) -> Result<(), Halt> {
        let (q, instr) = (self.task.query, self.task.instruction_text);
        let v0 = observe(&self.env);
        let plan = self.modules.plan_initial(q, instr, &v0)?;
        self.entries.push(TraceEntry { plan: Some(plan.clone()), ..TraceEntry::new(0, LoopState::Continue) });
        let plan = if self.cfg.planner_critic {
            let (working, out) = self.modules.critique_plan(&plan, q, instr, &v0)?;
            self.entries.push(TraceEntry {
                plan: Some(working.clone()),
                critique: Some(out),
                ..TraceEntry::new(0, LoopState::Continue)
            });
            working
        } else {
            plan
        };
        self.subtasks = plan.flatten();
        let n = self.subtasks.len() as u32;
        self.budgets.n = n;
        self.budgets.max_iterations = 4 * n + 1;

        let mut i = 0;
        while i < self.subtasks.len() {
            if self.budgets.iterations >= self.budgets.max_iterations {
                self.budgets.exhausted = true;
                return Err(Halt::Stopped(format!("budget exhausted after {} iterations", self.budgets.iterations)));
            }
            self.budgets.iterations += 1;
            let t = self.budgets.iterations;
            let before = observe(&self.env);

            let mut checked = None;
            if self.cfg.step_check {
                let out = self.modules.step_check(q, &self.subtasks[i], &before, &self.subtasks)?;
                match &out.decision {
                    StepCheckDecision::Finished | StepCheckDecision::Pass => {
                        self.subtasks[i].status = SubtaskStatus::Skipped;
                        self.entries.push(TraceEntry {
                            decision: Some(out.decision),
                            region_search: out.region_search,
                            ..TraceEntry::for_subtask(t, LoopState::Next, &self.subtasks[i])
                        });
                        i += 1;
                        continue;
                    }
                    StepCheckDecision::Modify { replacement } => {
                        let orig = self.subtasks[i].clone();
                        let fresh: Vec<Subtask> = replacement
                            .iter()
                            .enumerate()
                            .map(|(k, text)| Subtask::new(format!("{}.{}", orig.id, k + 1), text.as_str()))
                            .collect();
                        self.subtasks.splice(i..=i, fresh);
                        self.entries.push(TraceEntry {
                            decision: Some(out.decision.clone()),
                            region_search: out.region_search,
                            ..TraceEntry::for_subtask(t, LoopState::Next, &orig)
                        });
                    }
                    _ => checked = Some(out),
                }
            }

            let sub = self.subtasks[i].clone();
            let script = self.modules.act(q, &sub, &before, &self.history)?;
            let after = self.execute(&script);
            let mut entry = self.executed_entry(t, LoopState::Continue, &sub, &script, &before, &after);
            if let Some(out) = checked {
                entry.decision = Some(out.decision);
                entry.region_search = out.region_search;
            }

            if !self.cfg.actor_critic {
                self.entries.push(entry);
                self.subtasks[i].status = SubtaskStatus::Done;
                self.entries.push(TraceEntry::for_subtask(t, LoopState::Next, &sub));
                i += 1;
                continue;
            }

            let mut verdict = self.modules.verify_action(&sub, &script, &before, &after)?;
            if self.cfg.literal_algorithm {
                self.entries.push(entry);
                self.entries.push(TraceEntry {
                    verdict: Some(verdict.clone()),
                    ..TraceEntry::for_subtask(t, LoopState::Critic, &sub)
                });
            } else {
                entry.verdict = Some(verdict.clone());
                self.entries.push(entry);
            }

            let failure = self.critic_loop(t, &sub, &mut verdict, after)?;
            if let Some(reason) = failure {
                self.subtasks[i].status = SubtaskStatus::Failed;
                self.entries.push(TraceEntry::for_subtask(t, LoopState::Failed { reason: reason.clone() }, &sub));
                if self.cfg.exhaustion == ExhaustionPolicy::Abort {
                    return Err(Halt::Stopped(format!("subtask {} failed: {reason}", sub.id)));
                }
            } else {
                self.subtasks[i].status = SubtaskStatus::Done;
                self.entries.push(TraceEntry::for_subtask(t, LoopState::Next, &sub));
            }
            i += 1;
        }
        Ok(())
    }

    /// Correct and re-verify until success or the trial budget runs out.
    /// Returns the failure reason, if any.
    fn critic_loop(
        &mut self,
        t: u32,
        sub: &Subtask,
        verdict: &mut ActorCriticVerdict,
        mut before: Observation,
    ) -> Result<Option<String>, Halt> {
        let mut z = 0;
        let mut failure = None;
        while !verdict.success {
            if z >= self.cfg.max_critic_trials {
                failure = Some(format!("no success after {z} critic trials: {}", verdict.feedback));
                break;
            }
            let (script, located) = match self.modules.correct_action(sub, verdict, &before, &self.history) {
                Ok(v) => v,
                Err(AgentError::CorrectionFailed { detail }) => {
                    failure = Some(format!("correction failed: {detail}"));
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            z += 1;
            let after = self.execute(&script);
            *verdict = self.modules.verify_action(sub, &script, &before, &after)?;
            let mut entry = self.executed_entry(t, LoopState::Critic, sub, &script, &before, &after);
            entry.located = Some(located.describe());
            entry.verdict = Some(verdict.clone());
            entry.z = z;
            self.entries.push(entry);
            before = after;
        }
        self.budgets.critic_trials.insert(sub.id.clone(), z);
        self.budgets.total_critic_trials += z;
        Ok(failure)
    }
}

/// Runs the reasoning loop from `env` (pre-actions already applied) and
/// scores the final state with `evaluate`.
pub fn run_episode(
    task: TaskContext<'_>,
    env: EnvState,
    backend: &dyn ChatBackend,
    templates: &Templates,
    cfg: &AgentConfig,
    evaluate: &dyn Fn(&EnvState) -> bool,
) -> EpisodeOutcome {
    let mut ep = Episode {
        task,
        cfg,
        modules: Modules::new(backend, templates, cfg),
        env,
        entries: Vec::new(),
        subtasks: Vec::new(),
        history: Vec::new(),
        budgets: Budgets::default(),
    };
    let result = ep.run();
    let t = ep.budgets.iterations;
    let error = match result {
        Ok(()) => {
            ep.entries.push(TraceEntry::new(t, LoopState::Done));
            None
        }
        Err(Halt::Stopped(reason)) => {
            ep.entries.push(TraceEntry::new(t, LoopState::Failed { reason }));
            None
        }
        Err(Halt::Error(e)) => {
            let reason = e.to_string();
            ep.entries.push(TraceEntry::new(t, LoopState::Failed { reason: reason.clone() }));
            Some(reason)
        }
    };
    ep.budgets.model_calls = ep.modules.calls();
    let reward = u8::from(evaluate(&ep.env));
    EpisodeOutcome {
        reward,
        trace: EpisodeTrace { entries: ep.entries, budgets: ep.budgets, subtasks: ep.subtasks },
        final_state: ep.env,
        error,
    }
}
