//! Evaluation reports: per-utterance raw scores, their means, and the
//! configuration that produced them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::MetricId;
use crate::training::{Mode, TrainConfig};

/// Identifies the model behind a report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportSnapshot {
    /// `None` for the passthrough baseline.
    pub mode: Option<Mode>,
    pub objective: Option<MetricId>,
    pub w: Option<f64>,
    pub history_portion: Option<f64>,
    /// Checkpoint file name (or `"passthrough"`).
    pub checkpoint: String,
    pub role: Option<super::Role>,
}

impl ReportSnapshot {
    pub fn passthrough() -> Self {
        Self {
            checkpoint: "passthrough".into(),
            ..Self::default()
        }
    }

    pub fn from_config(config: &TrainConfig, checkpoint: impl Into<String>, role: super::Role) -> Self {
        Self {
            mode: Some(config.mode),
            objective: Some(config.objective),
            w: config.mode.has_degenerator().then_some(config.w),
            history_portion: Some(config.history_portion),
            checkpoint: checkpoint.into(),
            role: Some(role),
        }
    }
}

/// Raw scores of one utterance, aligned with [`EvalReport::metrics`]; a
/// failed cell holds the error message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub scores: Vec<Result<f64, String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: Vec<MetricId>,
    pub rows: Vec<EvalRow>,
    /// Mean raw score per metric over successful rows (`None` if all failed).
    pub means: Vec<Option<f64>>,
    pub failures: Vec<usize>,
    pub snapshot: ReportSnapshot,
}

/// Table scale: STOI is printed in percent, everything else as is.
fn display_scale(metric: MetricId) -> f64 {
    if metric == MetricId::Stoi {
        100.0
    } else {
        1.0
    }
}

impl EvalReport {
    /// Builds the report; rows are ordered by id.
    pub fn new(metrics: Vec<MetricId>, mut rows: Vec<EvalRow>, snapshot: ReportSnapshot) -> Self {
        rows.sort_by(|a, b| a.id.cmp(&b.id));
        let mut means = Vec::with_capacity(metrics.len());
        let mut failures = Vec::with_capacity(metrics.len());
        for k in 0..metrics.len() {
            let ok: Vec<f64> = rows.iter().filter_map(|r| r.scores[k].as_ref().ok().copied()).collect();
            failures.push(rows.len() - ok.len());
            means.push((!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64));
        }
        Self {
            metrics,
            rows,
            means,
            failures,
            snapshot,
        }
    }

    /// Mean raw score of `metric` (STOI as a fraction).
    pub fn mean(&self, metric: MetricId) -> Option<f64> {
        let k = self.metrics.iter().position(|m| *m == metric)?;
        self.means[k]
    }

    /// Aligned text table with STOI in percent; the last line holds the means
    /// and, below it, failure counts when there are any.
    pub fn to_table(&self) -> String {
        let id_width = self.rows.iter().map(|r| r.id.len()).max().unwrap_or(2).max(4);
        let mut out = String::new();
        let _ = write!(out, "{:<id_width$}", "id");
        for m in &self.metrics {
            let _ = write!(out, " {:>8}", m.to_string());
        }
        out.push('\n');
        let cell = |v: &Option<f64>, m: MetricId| match v {
            Some(v) => format!(" {:>8.2}", v * display_scale(m)),
            None => format!(" {:>8}", "failed"),
        };
        for r in &self.rows {
            let _ = write!(out, "{:<id_width$}", r.id);
            for (s, m) in r.scores.iter().zip(&self.metrics) {
                out.push_str(&cell(&s.as_ref().ok().copied(), *m));
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<id_width$}", "mean");
        for (v, m) in self.means.iter().zip(&self.metrics) {
            out.push_str(&cell(v, *m));
        }
        out.push('\n');
        if self.failures.iter().any(|&f| f > 0) {
            let _ = write!(out, "{:<id_width$}", "failed");
            for f in &self.failures {
                let _ = write!(out, " {f:>8}");
            }
            out.push('\n');
        }
        out
    }

    /// Comma-separated rows with raw scores (STOI as a fraction); failed
    /// cells are empty. The final row has id `mean`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id");
        for m in &self.metrics {
            out.push(',');
            out.push_str(m.name());
        }
        out.push('\n');
        let push_row = |out: &mut String, id: &str, values: Vec<Option<f64>>| {
            out.push_str(id);
            for v in values {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        };
        for r in &self.rows {
            push_row(&mut out, &r.id, r.scores.iter().map(|s| s.as_ref().ok().copied()).collect());
        }
        push_row(&mut out, "mean", self.means.clone());
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> EvalReport {
        let rows = vec![
            EvalRow {
                id: "b".into(),
                scores: vec![Ok(0.9), Ok(2.0)],
            },
            EvalRow {
                id: "a".into(),
                scores: vec![Ok(0.8), Err("timeout".into())],
            },
        ];
        EvalReport::new(vec![MetricId::Stoi, MetricId::Pesq], rows, ReportSnapshot::passthrough())
    }

    #[test]
    fn means_skip_failures() {
        let r = report();
        assert!((r.mean(MetricId::Stoi).unwrap() - 0.85).abs() < 1e-12);
        assert_eq!(r.mean(MetricId::Pesq), Some(2.0));
        assert_eq!(r.failures, vec![0, 1]);
        assert_eq!(r.rows[0].id, "a");
    }

    #[test]
    fn stoi_is_percent_in_table_and_fraction_in_csv() {
        let r = report();
        let table = r.to_table();
        assert!(table.contains("85.00"));
        assert!(table.contains("failed"));
        let csv = r.to_csv();
        assert!(csv.lines().last().unwrap().starts_with("mean,0.85"));
        assert!(csv.contains("a,0.8,\n"));
    }
}
