use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtaskStatus {
    Pending,
    Done,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subtask {
    pub id: String,
    pub text: String,
    pub status: SubtaskStatus,
}

impl Subtask {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Subtask { id: id.into(), text: text.into(), status: SubtaskStatus::Pending }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milestone {
    pub title: String,
    pub subtasks: Vec<Subtask>,
}

/// Milestones of numbered subtasks. Flattened order is execution order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub milestones: Vec<Milestone>,
}

fn milestone_header(line: &str) -> Option<String> {
    let lower = line.to_ascii_lowercase();
    let rest = lower.strip_prefix("milestone")?;
    let rest = rest.trim_start();
    let digits = rest.chars().take_while(char::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let after = rest[digits..].trim_start();
    let title = after.strip_prefix(':').or_else(|| after.strip_prefix('-')).or_else(|| after.strip_prefix('.'))?;
    // slice the original line to keep the title's case
    let offset = line.len() - title.len();
    Some(line[offset..].trim().to_string())
}

fn numbered_item(line: &str) -> Option<&str> {
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let rest = &line[digits..];
    let text = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    let text = text.trim();
    (!text.is_empty()).then_some(text)
}

/// Numbered lines (`1. text` or `1) text`) in order, ignoring anything else.
pub fn numbered_lines(text: &str) -> Vec<String> {
    text.lines().filter_map(|l| numbered_item(l.trim())).map(str::to_string).collect()
}

impl Plan {
    /// Reads `Milestone k: title` headers followed by numbered subtasks.
    /// Numbered lines before the first header go into an untitled milestone.
    /// Ids are `s1, s2, ...` in flattened order.
    pub fn parse(text: &str) -> Result<Plan, String> {
        let mut milestones: Vec<Milestone> = Vec::new();
        let mut next_id = 1;
        for raw in text.lines() {
            let line = raw.trim().trim_start_matches(['*', '#', '-', ' ']).trim_end_matches('*').trim();
            if let Some(title) = milestone_header(line) {
                milestones.push(Milestone { title, subtasks: Vec::new() });
            } else if let Some(item) = numbered_item(line) {
                if milestones.is_empty() {
                    milestones.push(Milestone { title: "Task".into(), subtasks: Vec::new() });
                }
                let m = milestones.last_mut().expect("pushed above");
                m.subtasks.push(Subtask::new(format!("s{next_id}"), item));
                next_id += 1;
            }
        }
        milestones.retain(|m| !m.subtasks.is_empty());
        if milestones.is_empty() {
            return Err("no numbered subtasks found".into());
        }
        Ok(Plan { milestones })
    }

    pub fn flatten(&self) -> Vec<Subtask> {
        self.milestones.iter().flat_map(|m| m.subtasks.iter().cloned()).collect()
    }

    pub fn subtask_count(&self) -> usize {
        self.milestones.iter().map(|m| m.subtasks.len()).sum()
    }

    /// Text in the format [`Plan::parse`] reads, numbered continuously.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut n = 1;
        for (i, m) in self.milestones.iter().enumerate() {
            let _ = writeln!(out, "Milestone {}: {}", i + 1, m.title);
            for s in &m.subtasks {
                let _ = writeln!(out, "{n}. {}", s.text);
                n += 1;
            }
        }
        out.pop();
        out
    }
}
