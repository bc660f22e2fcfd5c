use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::task::{Category, TaskKind, TaskSpec};
use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRow {
    pub id: String,
    pub family: String,
    pub category: Category,
    pub kind: TaskKind,
    pub reward: u8,
    /// Executed actions, corrections included.
    pub steps: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TaskRow {
    pub fn new(task: &TaskSpec) -> Self {
        TaskRow {
            id: task.id.clone(),
            family: task.family.clone(),
            category: task.category,
            kind: task.kind,
            reward: 0,
            steps: 0,
            error: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellStats {
    pub successes: u32,
    pub attempts: u32,
}

impl CellStats {
    fn add(&mut self, reward: u8) {
        self.attempts += 1;
        self.successes += u32::from(reward);
    }

    /// Success rate in percent, `None` without attempts.
    pub fn sr(&self) -> Option<f64> {
        (self.attempts > 0).then(|| 100.0 * f64::from(self.successes) / f64::from(self.attempts))
    }

    /// One decimal, or `n/a`.
    pub fn sr_text(&self) -> String {
        self.sr().map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}"))
    }
}

#[derive(Serialize)]
struct CellJson {
    successes: u32,
    attempts: u32,
    sr: String,
}

impl From<CellStats> for CellJson {
    fn from(c: CellStats) -> Self {
        CellJson { successes: c.successes, attempts: c.attempts, sr: c.sr_text() }
    }
}

#[derive(Serialize)]
struct ReportJson<'a> {
    rows: &'a [TaskRow],
    categories: BTreeMap<Category, BTreeMap<&'static str, CellJson>>,
    overall: CellJson,
}

#[derive(Deserialize)]
struct ReportIn {
    rows: Vec<TaskRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunReport {
    /// One row per task, in manifest order.
    pub rows: Vec<TaskRow>,
}

impl RunReport {
    /// Aggregate for one category; `meta` picks meta or augmented tasks.
    pub fn cell(&self, category: Category, meta: bool) -> CellStats {
        let mut c = CellStats::default();
        for r in self.rows.iter().filter(|r| r.category == category && r.kind.is_meta() == meta) {
            c.add(r.reward);
        }
        c
    }

    pub fn overall(&self) -> CellStats {
        let mut c = CellStats::default();
        for r in &self.rows {
            c.add(r.reward);
        }
        c
    }

    pub fn reward_of(&self, id: &str) -> Option<u8> {
        self.rows.iter().find(|r| r.id == id).map(|r| r.reward)
    }

    pub fn to_json(&self) -> String {
        let categories = Category::ALL
            .iter()
            .map(|&c| {
                let cells = [("meta", self.cell(c, true).into()), ("aug", self.cell(c, false).into())];
                (c, cells.into_iter().collect())
            })
            .collect();
        let doc = ReportJson { rows: &self.rows, categories, overall: self.overall().into() };
        serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<RunReport, HarnessError> {
        let doc: ReportIn = serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("report.json: {e}")))?;
        Ok(RunReport { rows: doc.rows })
    }

    /// Reads `report.json` from a run directory.
    pub fn load(dir: &Path) -> Result<RunReport, HarnessError> {
        let p = dir.join("report.json");
        let text = std::fs::read_to_string(&p).map_err(|e| HarnessError::io(&p, e))?;
        Self::from_json(&text)
    }

    pub fn table(&self) -> String {
        report_table(self)
    }
}

fn cell_text(c: CellStats) -> String {
    c.sr().map_or_else(|| "--".to_string(), |v| format!("{v:.1}"))
}

/// Success rates as a category x {Meta, Aug.} grid plus an Overall column.
/// The second row gives successes/attempts.
pub fn report_table(report: &RunReport) -> String {
    const LEAD: usize = 8;
    const COL: usize = 8;
    let mut head1 = format!("{:LEAD$}", "");
    let mut head2 = format!("{:LEAD$}", "");
    let mut sr = format!("{:LEAD$}", "SR (%)");
    let mut counts = format!("{:LEAD$}", "n");
    for &c in &Category::ALL {
        head1.push_str(&format!("| {:width$}", c.title(), width = 2 * COL));
        head2.push_str(&format!("| {:COL$}{:COL$}", "Meta", "Aug."));
        let (m, a) = (report.cell(c, true), report.cell(c, false));
        sr.push_str(&format!("| {:COL$}{:COL$}", cell_text(m), cell_text(a)));
        counts.push_str(&format!(
            "| {:COL$}{:COL$}",
            format!("{}/{}", m.successes, m.attempts),
            format!("{}/{}", a.successes, a.attempts)
        ));
    }
    let o = report.overall();
    head1.push_str("| Overall");
    head2.push('|');
    sr.push_str(&format!("| {}", cell_text(o)));
    counts.push_str(&format!("| {}/{}", o.successes, o.attempts));
    [head1, head2, sr, counts].map(|l| l.trim_end().to_string()).join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, category: Category, kind: TaskKind, reward: u8) -> TaskRow {
        TaskRow { id: id.into(), family: "f".into(), category, kind, reward, steps: 0, error: None }
    }

    #[test]
    fn single_office_meta_success() {
        let r = RunReport { rows: vec![row("a", Category::Office, TaskKind::Meta, 1)] };
        assert_eq!(r.cell(Category::Office, true).sr_text(), "100.0");
        let table = r.table();
        let sr_line = table.lines().nth(2).unwrap();
        let office = sr_line.split('|').nth(1).unwrap();
        assert_eq!(office.split_whitespace().collect::<Vec<_>>(), ["100.0", "--"]);
        assert!(table.contains("--"));
    }

    #[test]
    fn empty_report_is_na() {
        let r = RunReport::default();
        assert_eq!(r.overall().sr_text(), "n/a");
        assert!(r.to_json().contains("\"n/a\""));
        let table = r.table();
        assert!(table.lines().nth(2).unwrap().ends_with("| --"));
    }

    #[test]
    fn mixed_counts_match_rewards() {
        let rows = vec![
            row("a", Category::Office, TaskKind::Meta, 1),
            row("b", Category::Office, TaskKind::TrimStep, 0),
            row("c", Category::Office, TaskKind::AddStep, 1),
            row("d", Category::Web, TaskKind::AdjustStep, 1),
        ];
        let r = RunReport { rows };
        let aug = r.cell(Category::Office, false);
        assert_eq!((aug.successes, aug.attempts), (1, 2));
        assert_eq!(aug.sr_text(), "50.0");
        let total: u32 = Category::ALL.iter().flat_map(|&c| [r.cell(c, true), r.cell(c, false)]).map(|c| c.successes).sum();
        assert_eq!(total, 3);
        assert_eq!(r.overall().sr_text(), "75.0");
        let back = RunReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn one_decimal_rounding() {
        let c = CellStats { successes: 1, attempts: 3 };
        assert_eq!(c.sr_text(), "33.3");
        let c = CellStats { successes: 2, attempts: 3 };
        assert_eq!(c.sr_text(), "66.7");
    }
}
