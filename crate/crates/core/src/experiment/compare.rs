use serde::{Deserialize, Serialize};

use super::trace::Trace;
use crate::error::{Error, Result};
use crate::metrics::EvalReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub label: String,
    pub seed: u64,
    pub map: Option<f64>,
    pub macro_auc: Option<f64>,
    /// Mean over classes of positive pseudo-label precision, where defined.
    pub positive_precision: Option<f64>,
    pub negative_precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDelta {
    pub label: String,
    pub seed: u64,
    pub map_delta: Option<f64>,
    pub auc_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub label: String,
    pub runs: usize,
    pub mean_map_delta: Option<f64>,
    pub mean_auc_delta: Option<f64>,
    /// Seeds where this run's mAP is at least the reference's.
    pub map_not_worse: usize,
}

/// Side-by-side final metrics, with every run compared to the reference run
/// (first trace of the reference label) on the same dataset seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reference: String,
    pub rows: Vec<RunRow>,
    pub deltas: Vec<RunDelta>,
    pub summaries: Vec<MethodSummary>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn row(trace: &Trace) -> RunRow {
    let report: &EvalReport = &trace.final_record.report;
    let quality = report.pseudo_labels.as_deref().unwrap_or(&[]);
    RunRow {
        label: trace.header.label.clone(),
        seed: trace.header.config.seed,
        map: report.map,
        macro_auc: report.macro_auc,
        positive_precision: mean(quality.iter().filter_map(|q| q.positive.precision)),
        negative_precision: mean(quality.iter().filter_map(|q| q.negative.precision)),
    }
}

/// Dataset identity: the seed plus every field that shapes the data.
fn dataset_key(trace: &Trace) -> String {
    let c = &trace.header.config;
    format!(
        "seed={} spec={:?} data_path={:?}",
        c.seed,
        c.dataset_spec(),
        c.data_path
    )
}

pub fn compare_runs(traces: &[Trace]) -> Result<Comparison> {
    if traces.len() < 2 {
        return Err(Error::invalid("compare needs at least two traces"));
    }
    let reference = traces[0].header.label.clone();
    let rows: Vec<RunRow> = traces.iter().map(row).collect();

    let mut deltas = Vec::new();
    for (i, trace) in traces.iter().enumerate().skip(1) {
        let key = dataset_key(trace);
        let base = traces
            .iter()
            .position(|t| t.header.label == reference && dataset_key(t) == key)
            .ok_or_else(|| {
                Error::TraceMismatch(format!(
                    "trace {i} ({}, seed {}) has no {reference} run on the same dataset",
                    trace.header.label, trace.header.config.seed
                ))
            })?;
        if base == i {
            // first reference run on this dataset
            continue;
        }
        let diff = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| a - b);
        deltas.push(RunDelta {
            label: rows[i].label.clone(),
            seed: rows[i].seed,
            map_delta: diff(rows[i].map, rows[base].map),
            auc_delta: diff(rows[i].macro_auc, rows[base].macro_auc),
        });
    }

    let mut labels: Vec<String> = Vec::new();
    for d in &deltas {
        if !labels.contains(&d.label) {
            labels.push(d.label.clone());
        }
    }
    let summaries = labels
        .into_iter()
        .map(|label| {
            let mine: Vec<&RunDelta> = deltas.iter().filter(|d| d.label == label).collect();
            MethodSummary {
                runs: mine.len(),
                mean_map_delta: mean(mine.iter().filter_map(|d| d.map_delta)),
                mean_auc_delta: mean(mine.iter().filter_map(|d| d.auc_delta)),
                map_not_worse: mine
                    .iter()
                    .filter(|d| d.map_delta.is_some_and(|x| x >= 0.0))
                    .count(),
                label,
            }
        })
        .collect();

    Ok(Comparison {
        reference,
        rows,
        deltas,
        summaries,
    })
}

impl Comparison {
    /// Plain-text table for terminals.
    pub fn render(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{:.4}", x));
        let fmt_delta =
            |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{:+.4}", x));
        let mut s = format!(
            "{:<20} {:>6} {:>8} {:>8} {:>8} {:>8}\n",
            "run", "seed", "mAP", "AUC", "prec+", "prec-"
        );
        for r in &self.rows {
            s += &format!(
                "{:<20} {:>6} {:>8} {:>8} {:>8} {:>8}\n",
                r.label,
                r.seed,
                fmt(r.map),
                fmt(r.macro_auc),
                fmt(r.positive_precision),
                fmt(r.negative_precision)
            );
        }
        s += &format!("\ndeltas vs {}\n", self.reference);
        for d in &self.deltas {
            s += &format!(
                "{:<20} {:>6} {:>9} {:>9}\n",
                d.label,
                d.seed,
                fmt_delta(d.map_delta),
                fmt_delta(d.auc_delta)
            );
        }
        for m in &self.summaries {
            s += &format!(
                "{:<20} mean dmAP {} mean dAUC {} ({}/{} seeds not worse)\n",
                m.label,
                fmt_delta(m.mean_map_delta),
                fmt_delta(m.mean_auc_delta),
                m.map_not_worse,
                m.runs
            );
        }
        s
    }
}
