use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    ablation_report, satisfaction_key, variant_means, AblationTable, CorpusEvaluation, LikertStats,
    ResponseStage, SCALE_MAX,
};
use crate::prompts::PromptVariant;
use crate::scalar::Exact;
use crate::sim::{pooled_success_rate, SuccessCount};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    #[default]
    Md,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Md),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCell {
    pub similarity: Option<f64>,
    pub proportion: Option<f64>,
    pub satisfaction: Option<LikertStats<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub task_id: u32,
    pub need: StageCell,
    pub solution: StageCell,
    pub success: Option<SuccessCount>,
    pub execution: Option<LikertStats<f64>>,
}

/// Column means over tasks; satisfaction is the mean of per-task means and
/// success is pooled over all trials.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub need_similarity: Option<f64>,
    pub need_proportion: Option<f64>,
    pub need_satisfaction: Option<f64>,
    pub solution_similarity: Option<f64>,
    pub solution_proportion: Option<f64>,
    pub solution_satisfaction: Option<f64>,
    pub success_rate: Option<f64>,
    pub execution_satisfaction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub variant: PromptVariant,
    pub rows: Vec<TableRow>,
    pub average: AverageRow,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationTable<f64>>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub(super) fn summarize(
    evaluation: &CorpusEvaluation<f64>,
    success: &BTreeMap<u32, SuccessCount>,
    variant: PromptVariant,
) -> EvalSummary {
    let mut tasks: Vec<u32> = evaluation.reports.iter().map(|r| r.task_id).collect();
    tasks.extend(success.keys());
    tasks.extend(
        evaluation
            .satisfaction
            .keys()
            .filter_map(|k| k.split('_').next()?.parse::<u32>().ok()),
    );
    tasks.sort_unstable();
    tasks.dedup();

    let cell = |task_id: u32, stage: ResponseStage| {
        let report = evaluation
            .reports
            .iter()
            .find(|r| r.task_id == task_id && r.stage == stage && r.variant == variant);
        StageCell {
            similarity: report.map(|r| r.avg_sim),
            proportion: report.map(|r| r.proportion),
            satisfaction: evaluation.satisfaction.get(&satisfaction_key(task_id, stage)).copied(),
        }
    };
    let rows: Vec<TableRow> = tasks
        .iter()
        .map(|&task_id| TableRow {
            task_id,
            need: cell(task_id, ResponseStage::Need),
            solution: cell(task_id, ResponseStage::Solution),
            success: success.get(&task_id).copied(),
            execution: evaluation
                .satisfaction
                .get(&satisfaction_key(task_id, ResponseStage::Execution))
                .copied(),
        })
        .collect();

    let counts: Vec<SuccessCount> = rows.iter().filter_map(|r| r.success).collect();
    let average = AverageRow {
        need_similarity: mean(rows.iter().map(|r| r.need.similarity)),
        need_proportion: mean(rows.iter().map(|r| r.need.proportion)),
        need_satisfaction: mean(rows.iter().map(|r| r.need.satisfaction.map(|s| s.mean))),
        solution_similarity: mean(rows.iter().map(|r| r.solution.similarity)),
        solution_proportion: mean(rows.iter().map(|r| r.solution.proportion)),
        solution_satisfaction: mean(rows.iter().map(|r| r.solution.satisfaction.map(|s| s.mean))),
        success_rate: pooled_success_rate::<Exact>(&counts)
            .ok()
            .map(|r| *r.numer() as f64 / *r.denom() as f64),
        execution_satisfaction: mean(rows.iter().map(|r| r.execution.map(|s| s.mean))),
    };
    let ablation = ablation_report(&variant_means(&evaluation.reports)).ok();
    EvalSummary {
        variant,
        rows,
        average,
        ablation,
    }
}

pub const COLUMNS: [&str; 9] = [
    "Task ID",
    "Need Similarity",
    "Need Proportion Rate",
    "Need Satisfaction",
    "Solution Similarity",
    "Solution Proportion Rate",
    "Solution Satisfaction",
    "Success Rate",
    "Execution Satisfaction",
];

const MISSING: &str = "-";

fn pct(v: Option<f64>) -> String {
    v.map_or(MISSING.into(), |v| format!("{:.1}%", v * 100.0))
}

fn sat(v: Option<LikertStats<f64>>) -> String {
    v.map_or(MISSING.into(), |s| format!("{:.2}±{:.2}", s.mean, s.sd))
}

fn sat_avg(v: Option<f64>) -> String {
    v.map_or(MISSING.into(), |m| format!("{m:.2} / {SCALE_MAX}"))
}

fn cells(summary: &EvalSummary) -> Vec<[String; 9]> {
    let mut out: Vec<[String; 9]> = summary
        .rows
        .iter()
        .map(|r| {
            [
                r.task_id.to_string(),
                pct(r.need.similarity),
                pct(r.need.proportion),
                sat(r.need.satisfaction),
                pct(r.solution.similarity),
                pct(r.solution.proportion),
                sat(r.solution.satisfaction),
                r.success
                    .map_or(MISSING.into(), |s| format!("{}/{}", s.successes, s.trials)),
                sat(r.execution),
            ]
        })
        .collect();
    let a = &summary.average;
    out.push([
        "Average".into(),
        pct(a.need_similarity),
        pct(a.need_proportion),
        sat_avg(a.need_satisfaction),
        pct(a.solution_similarity),
        pct(a.solution_proportion),
        sat_avg(a.solution_satisfaction),
        pct(a.success_rate),
        sat_avg(a.execution_satisfaction),
    ]);
    out
}

fn ablation_lines(t: &AblationTable<f64>) -> Vec<[String; 4]> {
    let p = |v: f64| format!("{:.1}%", v * 100.0);
    let mut rows = Vec::new();
    for (name, grid, d) in [
        ("need", &t.need, &t.need_deltas),
        ("solution", &t.solution, &t.solution_deltas),
    ] {
        rows.push([name.into(), "w/o constraints".into(), p(grid[0][0]), p(grid[0][1])]);
        rows.push([name.into(), "w/ constraints".into(), p(grid[1][0]), p(grid[1][1])]);
        rows.push([
            name.into(),
            "drop vs full".into(),
            format!("atom {}", p(d.atom_removal)),
            format!("constraints {} / both {}", p(d.constraint_removal), p(d.both_removal)),
        ]);
    }
    rows
}

fn markdown(summary: &EvalSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", COLUMNS.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(COLUMNS.len()));
    for row in cells(summary) {
        let _ = writeln!(s, "| {} |", row.join(" | "));
    }
    if let Some(t) = &summary.ablation {
        s.push_str("\n| Similarity | Prompt | w/o AToM | w/ AToM |\n|---|---|---|---|\n");
        for row in ablation_lines(t) {
            let _ = writeln!(s, "| {} |", row.join(" | "));
        }
    }
    s
}

fn csv_text(summary: &EvalSummary) -> Result<String, csv::Error> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for row in cells(summary) {
        w.write_record(&row)?;
    }
    if let Some(t) = &summary.ablation {
        w.write_record([""; 0])?;
        w.write_record(["similarity", "prompt", "w/o AToM", "w/ AToM"])?;
        for row in ablation_lines(t) {
            w.write_record(&row)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

pub fn render_report(summary: &EvalSummary, format: ReportFormat) -> String {
    match format {
        ReportFormat::Md => markdown(summary),
        ReportFormat::Csv => csv_text(summary).expect("in-memory csv write"),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
            s.push('\n');
            s
        }
    }
}
