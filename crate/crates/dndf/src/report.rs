//! Metric tables and the machine-readable results file.

use std::fmt::Write;

use dndf_core::metrics::round3;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::runner::{ModelResult, StageResult};

pub const TABLE_HEADER: [&str; 5] = ["Model name", "Accuracy", "Recall", "Precision", "F1-score"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub stages: Vec<StageResult>,
}

/// The four weighted metrics of one model, rounded to three decimals.
pub fn metric_row(m: &ModelResult) -> [f64; 4] {
    let r = &m.metrics;
    [r.accuracy, r.weighted_recall, r.weighted_precision, r.weighted_f1].map(round3)
}

/// Metric table rows in model order.
pub fn metric_table(models: &[ModelResult]) -> String {
    let name_w = models.iter().map(|m| m.name.len()).max().unwrap_or(0).max(TABLE_HEADER[0].len());
    let mut out = format!("{:<name_w$}", TABLE_HEADER[0]);
    for h in &TABLE_HEADER[1..] {
        write!(out, "  {h:>9}").unwrap();
    }
    out.push('\n');
    for m in models {
        write!(out, "{:<name_w$}", m.name).unwrap();
        for v in metric_row(m) {
            write!(out, "  {v:>9.3}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn confusion_table(models: &[ModelResult]) -> String {
    let name_w = models.iter().map(|m| m.name.len()).max().unwrap_or(0).max(TABLE_HEADER[0].len());
    let mut out = format!("{:<name_w$}  {:>6}  {:>6}  {:>6}  {:>6}\n", TABLE_HEADER[0], "TN", "FP", "FN", "TP");
    for m in models {
        let c = &m.confusion;
        writeln!(out, "{:<name_w$}  {:>6}  {:>6}  {:>6}  {:>6}", m.name, c.tn, c.fp, c.fn_, c.tp).unwrap();
    }
    out
}

pub fn render_stage(s: &StageResult) -> String {
    let mut out = format!("Stage {}: {}\n", s.stage, s.description);
    writeln!(
        out,
        "train {} rows ({} recovered, {} deceased), test {} rows ({} recovered, {} deceased), split seed {}",
        s.n_train,
        s.train_class_counts[0],
        s.train_class_counts[1],
        s.n_test,
        s.test_class_counts[0],
        s.test_class_counts[1],
        s.split_seed
    )
    .unwrap();
    writeln!(out, "features: {}\n", s.features.join(", ")).unwrap();
    out.push_str(&metric_table(&s.models));
    out.push_str("\nConfusion matrices (rows actual, columns predicted; positive = deceased)\n");
    out.push_str(&confusion_table(&s.models));
    out
}

/// Plain-text report of every stage.
pub fn render_text(stages: &[StageResult]) -> String {
    stages.iter().map(render_stage).collect::<Vec<_>>().join("\n")
}

/// Full-precision JSON of every stage.
pub fn results_to_json(stages: &[StageResult]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&ResultsFile { stages: stages.to_vec() })?;
    s.push('\n');
    Ok(s)
}

pub fn results_from_json(s: &str) -> Result<Vec<StageResult>> {
    Ok(serde_json::from_str::<ResultsFile>(s)?.stages)
}

/// Text and JSON renderings of the same results.
pub fn emit_report(stages: &[StageResult]) -> Result<(String, String)> {
    Ok((render_text(stages), results_to_json(stages)?))
}
