use std::cell::Cell;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::output::{
    parse_actor_script, parse_critique, parse_decision, parse_element_choice, parse_verdict, ActorCriticVerdict,
    PlannerCriticOutput, ScriptProblem, StepCheckDecision,
};
use super::plan::{Plan, Subtask, SubtaskStatus};
use super::{AgentConfig, AgentError};
use crate::action::ActionScript;
use crate::gateway::{render_prompt, ChatBackend, GatewayError, Message, PromptContext, Template, Templates};
use crate::gui::{
    crop_observation, describe_elements, locate_element, parse_elements, region_search_crop, CropRegion, GuiElement,
};
use crate::sim::Observation;

/// What happened after a `#Cannot confirm`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSearch {
    /// Element label the chooser named, when it named one we could find.
    pub anchor: Option<String>,
    pub crop: Option<CropRegion>,
    /// Decision on the cropped screenshot; absent when no crop was made.
    pub recheck: Option<StepCheckDecision>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepCheckOutcome {
    pub decision: StepCheckDecision,
    pub region_search: Option<RegionSearch>,
}

/// The model-backed modules of one episode, sharing a backend and templates.
pub struct Modules<'a> {
    pub backend: &'a dyn ChatBackend,
    pub templates: &'a Templates,
    pub cfg: &'a AgentConfig,
    calls: Cell<u32>,
}

/// `1. text [done]` lines for the working plan.
pub fn plan_overview(subtasks: &[Subtask]) -> String {
    subtasks
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mark = match s.status {
                SubtaskStatus::Pending => "",
                SubtaskStatus::Done => " [done]",
                SubtaskStatus::Skipped => " [skipped]",
                SubtaskStatus::Failed => " [failed]",
            };
            format!("{}. {}{mark}", i + 1, s.text)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn history_text(history: &[String]) -> String {
    if history.is_empty() {
        return "(none)".into();
    }
    history.iter().enumerate().map(|(i, h)| format!("{}. {}", i + 1, h.replace('\n', "; "))).collect::<Vec<_>>().join("\n")
}

impl<'a> Modules<'a> {
    pub fn new(backend: &'a dyn ChatBackend, templates: &'a Templates, cfg: &'a AgentConfig) -> Self {
        Modules { backend, templates, cfg, calls: Cell::new(0) }
    }

    /// Model calls made so far, re-asks included.
    pub fn calls(&self) -> u32 {
        self.calls.get()
    }

    /// One logical module call: the first ask plus up to `parse_retries`
    /// re-asks, each carrying a note about the rejected reply. The inner
    /// error holds the attempt count and the last parse problem.
    fn ask<T, E: fmt::Display>(
        &self,
        template: Template,
        ctx: &PromptContext,
        parse: impl Fn(&str) -> Result<T, E>,
    ) -> Result<Result<T, (u32, E)>, GatewayError> {
        let mut req = render_prompt(self.templates, template, ctx)?;
        let mut attempts = 0;
        loop {
            attempts += 1;
            self.calls.set(self.calls.get() + 1);
            let reply = self.backend.complete(&req)?;
            match parse(&reply) {
                Ok(v) => return Ok(Ok(v)),
                Err(e) if attempts <= self.cfg.parse_retries => {
                    tracing::debug!(role = req.role_tag.as_str(), attempts, error = %e, "re-asking after invalid reply");
                    req.messages.push(Message::user_text(format!(
                        "Your previous reply was invalid: {e}. Reply again using the required format."
                    )));
                }
                Err(e) => return Ok(Err((attempts, e))),
            }
        }
    }

    pub fn plan_initial(&self, query: &str, instruction_text: &str, v0: &Observation) -> Result<Plan, AgentError> {
        if query.trim().is_empty() {
            return Err(AgentError::EmptyQuery);
        }
        let ctx = PromptContext::new()
            .field("query", query)
            .field("instruction_text", instruction_text)
            .image(v0.screenshot.clone());
        self.ask(Template::Planner, &ctx, Plan::parse)?
            .map_err(|(attempts, detail)| AgentError::PlanParse { attempts, detail })
    }

    /// Returns the working plan: unchanged when the critic accepts it, the
    /// correction otherwise.
    pub fn critique_plan(
        &self,
        plan: &Plan,
        query: &str,
        instruction_text: &str,
        v0: &Observation,
    ) -> Result<(Plan, PlannerCriticOutput), AgentError> {
        let ctx = PromptContext::new()
            .field("query", query)
            .field("instruction_text", instruction_text)
            .field("plan", plan.to_text())
            .image(v0.screenshot.clone());
        let out = self.ask(Template::PlannerCritic, &ctx, parse_critique)?.map_err(|(attempts, detail)| {
            AgentError::CritiqueParse { attempts, detail }
        })?;
        let working = match (&out.flag, &out.correction) {
            (false, Some(c)) => c.clone(),
            _ => plan.clone(),
        };
        Ok((working, out))
    }

    fn ask_decision(&self, ctx: &PromptContext) -> Result<StepCheckDecision, AgentError> {
        self.ask(Template::StepCheck, ctx, parse_decision)?
            .map_err(|(attempts, detail)| AgentError::DecisionParse { attempts, detail })
    }

    /// Asks for a decision. On `#Cannot confirm`, crops around the element
    /// the region chooser names and asks once more; a second `#Cannot
    /// confirm`, or any failure to crop, resolves to `Continue`.
    pub fn step_check(
        &self,
        query: &str,
        subtask: &Subtask,
        obs: &Observation,
        plan: &[Subtask],
    ) -> Result<StepCheckOutcome, AgentError> {
        let elements = parse_elements(obs);
        let ctx = |obs: &Observation, els: &[GuiElement]| {
            PromptContext::new()
                .field("query", query)
                .field("plan", plan_overview(plan))
                .field("subtask", subtask.text.as_str())
                .field("elements", describe_elements(els))
                .image(obs.screenshot.clone())
        };
        let first = self.ask_decision(&ctx(obs, &elements))?;
        if first != StepCheckDecision::CannotConfirm {
            return Ok(StepCheckOutcome { decision: first, region_search: None });
        }
        let fallback = |rs: Option<RegionSearch>| StepCheckOutcome { decision: StepCheckDecision::Continue, region_search: rs };
        if !self.cfg.region_search {
            return Ok(fallback(None));
        }
        let choose = PromptContext::new()
            .field("subtask", subtask.text.as_str())
            .field("elements", describe_elements(&elements));
        let no_crop = RegionSearch { anchor: None, crop: None, recheck: None };
        let Ok(label) = self.ask(Template::RegionChooser, &choose, parse_element_choice)? else {
            return Ok(fallback(Some(no_crop)));
        };
        let Ok(found) = locate_element(&label, &elements, self.cfg.match_threshold, 1) else {
            return Ok(fallback(Some(no_crop)));
        };
        let anchor = &found[0].element;
        let Ok(region) = region_search_crop(obs_screen(obs), anchor.bbox) else {
            return Ok(fallback(Some(no_crop)));
        };
        let cropped = crop_observation(obs, region);
        let second = self.ask_decision(&ctx(&cropped, &parse_elements(&cropped)))?;
        let rs = RegionSearch { anchor: Some(anchor.label.clone()), crop: Some(region), recheck: Some(second.clone()) };
        let decision = if second == StepCheckDecision::CannotConfirm { StepCheckDecision::Continue } else { second };
        Ok(StepCheckOutcome { decision, region_search: Some(rs) })
    }

    fn script_reply(&self, template: Template, ctx: &PromptContext, obs: &Observation) -> Result<ActionScript, AgentError> {
        let screen = obs_screen(obs);
        self.ask(template, ctx, |t| parse_actor_script(t, screen))?.map_err(|(attempts, problem)| match problem {
            ScriptProblem::Parse(detail) => AgentError::ActionParse { attempts, detail },
            ScriptProblem::OutOfBounds(detail) => AgentError::OutOfBoundsAction { detail },
        })
    }

    pub fn act(&self, query: &str, subtask: &Subtask, obs: &Observation, history: &[String]) -> Result<ActionScript, AgentError> {
        let ctx = PromptContext::new()
            .field("query", query)
            .field("subtask", subtask.text.as_str())
            .field("elements", describe_elements(&parse_elements(obs)))
            .field("history", history_text(history))
            .image(obs.screenshot.clone());
        self.script_reply(Template::Actor, &ctx, obs)
    }

    pub fn verify_action(
        &self,
        subtask: &Subtask,
        action: &ActionScript,
        before: &Observation,
        after: &Observation,
    ) -> Result<ActorCriticVerdict, AgentError> {
        let changed = if before.digest() == after.digest() { "no" } else { "yes" };
        let ctx = PromptContext::new()
            .field("subtask", subtask.text.as_str())
            .field("action", action.to_canonical())
            .field("screen_changed", changed)
            .image(before.screenshot.clone())
            .image(after.screenshot.clone());
        self.ask(Template::ActorCritic, &ctx, parse_verdict)?
            .map_err(|(attempts, detail)| AgentError::VerdictParse { attempts, detail })
    }

    /// Locates the element the critic named (or the subtask text) and asks
    /// for a corrected script with its center in the prompt.
    pub fn correct_action(
        &self,
        subtask: &Subtask,
        verdict: &ActorCriticVerdict,
        obs: &Observation,
        history: &[String],
    ) -> Result<(ActionScript, GuiElement), AgentError> {
        let elements = parse_elements(obs);
        let query = verdict.target_element_query.as_deref().unwrap_or(&subtask.text);
        let located = locate_element(query, &elements, self.cfg.match_threshold, 1)
            .map_err(|e| AgentError::CorrectionFailed { detail: e.to_string() })?
            .remove(0)
            .element;
        let ctx = PromptContext::new()
            .field("subtask", subtask.text.as_str())
            .field("feedback", verdict.feedback.as_str())
            .field("located", located.describe())
            .field("elements", describe_elements(&elements))
            .field("history", history_text(history))
            .image(obs.screenshot.clone());
        let script = self.script_reply(Template::ActorCorrection, &ctx, obs)?;
        Ok((script, located))
    }
}

fn obs_screen(obs: &Observation) -> crate::action::ScreenSize {
    crate::action::ScreenSize { w: obs.screenshot.width, h: obs.screenshot.height }
}
