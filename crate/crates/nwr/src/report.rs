//! Per-instance reduction reports and their CSV/JSON serialisation.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::WpMdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub states: usize,
    pub choices: usize,
}

impl StageCounts {
    pub fn of(m: &WpMdp) -> Self {
        StageCounts { states: m.num_states(), choices: m.num_choices() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneRule {
    Query,
    Essential,
    AlmostSure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneRecord {
    pub outer_iteration: usize,
    pub state: String,
    pub action: String,
    /// Position of the choice in its state at the time it was pruned.
    pub choice: usize,
    pub rule: PruneRule,
}

/// Model size after one outer iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationPoint {
    pub outer_iteration: usize,
    pub inner_passes: usize,
    pub pruned: usize,
    pub merged: usize,
    pub states: usize,
    pub choices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub instance: String,
    pub original: StageCounts,
    pub preprocessed: StageCounts,
    pub reduced: StageCounts,
    pub seconds_preprocess: f64,
    pub seconds_reduce: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub pruned_actions: usize,
    pub collapsed_states: usize,
    pub prune_log: Vec<PruneRecord>,
    pub curve: Vec<IterationPoint>,
    pub notes: Vec<String>,
}

impl ReductionReport {
    pub fn seconds_total(&self) -> f64 {
        self.seconds_preprocess + self.seconds_reduce
    }

    /// Checks that state and choice counts never grow from one stage to
    /// the next, including along the per-iteration curve.
    pub fn check_monotone(&self) -> Result<(), ReportError> {
        let mut stages = vec![("original", self.original), ("preprocessed", self.preprocessed)];
        let curve: Vec<(String, StageCounts)> = self
            .curve
            .iter()
            .map(|p| (format!("iteration {}", p.outer_iteration), StageCounts { states: p.states, choices: p.choices }))
            .collect();
        for (name, c) in &curve {
            stages.push((name.as_str(), *c));
        }
        stages.push(("reduced", self.reduced));
        for w in stages.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.1.states > a.1.states || b.1.choices > a.1.choices {
                return Err(ReportError::NonMonotone {
                    instance: self.instance.clone(),
                    from: a.0.to_string(),
                    to: b.0.to_string(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report for `{instance}` grows between {from} and {to}")]
    NonMonotone { instance: String, from: String, to: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Column order of the CSV report.
pub const CSV_HEADER: [&str; 8] = ["st_orig", "ch_orig", "st_pre", "ch_pre", "st_ua", "ch_ua", "time", "instance"];

/// Writes one row per report. Every report must pass
/// [`ReductionReport::check_monotone`]; nothing is written otherwise.
pub fn write_reports<W: Write>(reports: &[ReductionReport], out: W, format: ReportFormat) -> Result<(), ReportError> {
    for r in reports {
        r.check_monotone()?;
    }
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER)?;
            for r in reports {
                w.write_record([
                    r.original.states.to_string(),
                    r.original.choices.to_string(),
                    r.preprocessed.states.to_string(),
                    r.preprocessed.choices.to_string(),
                    r.reduced.states.to_string(),
                    r.reduced.choices.to_string(),
                    format!("{:.3}", r.seconds_total()),
                    r.instance.clone(),
                ])?;
            }
            w.flush()?;
        }
        ReportFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, reports)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Writes reports to a file.
pub fn write_report(
    reports: &[ReductionReport],
    path: &std::path::Path,
    format: ReportFormat,
) -> Result<(), ReportError> {
    let mut buf = Vec::new();
    write_reports(reports, &mut buf, format)?;
    std::fs::write(path, buf)?;
    Ok(())
}
