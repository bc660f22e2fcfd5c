//! Parsers for the structured replies of each module.

use serde::{Deserialize, Serialize};

use super::plan::{numbered_lines, Plan};
use crate::action::{parse_script, validate_bounds, ActionScript, ScreenSize, ScriptMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CritiqueFeedback {
    WrongSteps,
    MissingSteps,
    RedundantSteps,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerCriticOutput {
    pub flag: bool,
    pub feedback: Option<CritiqueFeedback>,
    pub correction: Option<Plan>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepCheckDecision {
    Modify { replacement: Vec<String> },
    Pass,
    Continue,
    Finished,
    CannotConfirm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorCriticVerdict {
    pub success: bool,
    pub feedback: String,
    pub target_element_query: Option<String>,
}

/// Text between `<tag>` and `</tag>`, or to the end when unclosed.
pub fn tag_content<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let start = text.find(&open)? + open.len();
    let rest = &text[start..];
    let end = rest.find(&format!("</{tag}>")).unwrap_or(rest.len());
    Some(rest[..end].trim())
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn parse_feedback(s: &str) -> Option<CritiqueFeedback> {
    let k: String = s.to_ascii_lowercase().chars().filter(char::is_ascii_alphabetic).collect();
    if k.starts_with("wrong") {
        Some(CritiqueFeedback::WrongSteps)
    } else if k.starts_with("missing") {
        Some(CritiqueFeedback::MissingSteps)
    } else if k.starts_with("redundant") {
        Some(CritiqueFeedback::RedundantSteps)
    } else {
        None
    }
}

pub fn parse_critique(text: &str) -> Result<PlannerCriticOutput, String> {
    let flag = tag_content(text, "Flag").ok_or("missing <Flag>")?;
    let flag = parse_bool(flag).ok_or_else(|| format!("<Flag> must be true or false, got `{flag}`"))?;
    let reason = tag_content(text, "Reason").unwrap_or_default().to_string();
    if flag {
        return Ok(PlannerCriticOutput { flag, feedback: None, correction: None, reason });
    }
    let fb = tag_content(text, "Feedback").ok_or("<Flag>false requires <Feedback>")?;
    let feedback = parse_feedback(fb).ok_or_else(|| format!("unknown feedback `{fb}`"))?;
    let corr = tag_content(text, "Correction").ok_or("<Flag>false requires <Correction>")?;
    let correction = Plan::parse(corr).map_err(|e| format!("<Correction>: {e}"))?;
    Ok(PlannerCriticOutput { flag, feedback: Some(feedback), correction: Some(correction), reason })
}

/// The earliest decision token wins.
pub fn parse_decision(text: &str) -> Result<StepCheckDecision, String> {
    let lower = text.to_ascii_lowercase();
    let tokens = [
        ("#cannot confirm", StepCheckDecision::CannotConfirm),
        ("<modify>", StepCheckDecision::Modify { replacement: Vec::new() }),
        ("<pass>", StepCheckDecision::Pass),
        ("<continue>", StepCheckDecision::Continue),
        ("<finished>", StepCheckDecision::Finished),
    ];
    let (pos, decision) = tokens
        .into_iter()
        .filter_map(|(tok, d)| lower.find(tok).map(|p| (p, d)))
        .min_by_key(|(p, _)| *p)
        .ok_or("no decision token")?;
    match decision {
        StepCheckDecision::Modify { .. } => {
            let body = &text[pos + "<modify>".len()..];
            let end = body.to_ascii_lowercase().find("</modify>").unwrap_or(body.len());
            let replacement = numbered_lines(&body[..end]);
            if replacement.is_empty() {
                return Err("<Modify> needs at least one numbered subtask".into());
            }
            Ok(StepCheckDecision::Modify { replacement })
        }
        d => Ok(d),
    }
}

pub fn parse_verdict(text: &str) -> Result<ActorCriticVerdict, String> {
    let s = tag_content(text, "Success").ok_or("missing <Success>")?;
    let success = parse_bool(s).ok_or_else(|| format!("<Success> must be true or false, got `{s}`"))?;
    let feedback = tag_content(text, "Feedback").unwrap_or_default().to_string();
    if !success && feedback.is_empty() {
        return Err("<Success>false requires non-empty <Feedback>".into());
    }
    let target = tag_content(text, "Target").filter(|t| !t.is_empty()).map(str::to_string);
    Ok(ActorCriticVerdict { success, feedback, target_element_query: target })
}

pub fn parse_element_choice(text: &str) -> Result<String, String> {
    let label = tag_content(text, "Element").unwrap_or(text.trim());
    if label.is_empty() {
        return Err("empty element choice".into());
    }
    Ok(label.to_string())
}

/// Drops Markdown code fences around the actor's reply.
pub fn strip_code_fences(text: &str) -> String {
    let t = text.trim();
    if !t.starts_with("```") {
        return t.to_string();
    }
    t.lines().filter(|l| !l.trim_start().starts_with("```")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptProblem {
    Parse(String),
    OutOfBounds(String),
}

impl std::fmt::Display for ScriptProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScriptProblem::Parse(m) | ScriptProblem::OutOfBounds(m) => f.write_str(m),
        }
    }
}

/// Strict-dialect script with at least one action, all inside the screen.
pub fn parse_actor_script(text: &str, screen: ScreenSize) -> Result<ActionScript, ScriptProblem> {
    let src = strip_code_fences(text);
    let script = parse_script(&src, ScriptMode::Strict).map_err(|e| ScriptProblem::Parse(e.to_string()))?;
    if script.is_empty() {
        return Err(ScriptProblem::Parse("no actions".into()));
    }
    let bad = validate_bounds(&script, screen);
    if !bad.is_empty() {
        let list: Vec<String> = bad.iter().map(|v| v.to_string()).collect();
        return Err(ScriptProblem::OutOfBounds(list.join("; ")));
    }
    Ok(script)
}
