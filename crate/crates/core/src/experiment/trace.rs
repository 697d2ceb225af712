use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::histogram::ClassHistogram;
use crate::metrics::EvalReport;
use crate::thresholds::ThresholdState;

pub const TRACE_FORMAT: &str = "percentmatch-trace/1";

/// One JSON object per line. The first line is the header, then one
/// iteration record per training step, then the final record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
pub enum TraceLine {
    Header(TraceHeader),
    Iteration(TraceRecord),
    Final(FinalRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub label: String,
    /// Names of the fields carried by every iteration record.
    pub fields: Vec<String>,
    pub config: ExperimentConfig,
    pub class_priors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    pub tau_plus: Vec<f64>,
    pub tau_minus: Vec<f64>,
    pub gap: Vec<f64>,
    pub alpha: Vec<f64>,
    pub selected_positive: Vec<usize>,
    pub selected_negative: Vec<usize>,
    pub loss_supervised: f64,
    pub loss_unlabeled: f64,
    pub loss_total: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eval: Option<EvalReport>,
}

impl TraceRecord {
    pub const FIELDS: [&'static str; 11] = [
        "t",
        "tau_plus",
        "tau_minus",
        "gap",
        "alpha",
        "selected_positive",
        "selected_negative",
        "loss_supervised",
        "loss_unlabeled",
        "loss_total",
        "eval",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRecord {
    pub report: EvalReport,
    pub thresholds: ThresholdState,
    pub histograms: Vec<ClassHistogram>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
    pub final_record: FinalRecord,
}

impl Trace {
    pub fn record_at(&self, t: u64) -> Option<&TraceRecord> {
        self.records.iter().find(|r| r.t == t)
    }

    pub fn last_record(&self) -> &TraceRecord {
        self.records
            .last()
            .expect("trace has at least one iteration")
    }
}

pub fn read_trace(input: impl BufRead) -> Result<Trace> {
    let mut header = None;
    let mut records: Vec<TraceRecord> = Vec::new();
    let mut final_record = None;
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        let out_of_place = |what: &str| Error::Parse {
            line: n + 1,
            message: format!("unexpected {what} record"),
        };
        match parsed {
            TraceLine::Header(h) if header.is_none() && n == 0 => {
                if h.format != TRACE_FORMAT {
                    return Err(Error::Parse {
                        line: 1,
                        message: format!("unsupported trace format {:?}", h.format),
                    });
                }
                header = Some(h)
            }
            TraceLine::Header(_) => return Err(out_of_place("header")),
            TraceLine::Iteration(r) => {
                if header.is_none() || final_record.is_some() {
                    return Err(out_of_place("iteration"));
                }
                if records.last().is_some_and(|prev| prev.t >= r.t) {
                    return Err(Error::Parse {
                        line: n + 1,
                        message: format!("iteration {} is not increasing", r.t),
                    });
                }
                records.push(r);
            }
            TraceLine::Final(f) if header.is_some() && final_record.is_none() => {
                final_record = Some(f)
            }
            TraceLine::Final(_) => return Err(out_of_place("final")),
        }
    }
    let header = header.ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing trace header".into(),
    })?;
    let final_record = final_record.ok_or_else(|| Error::Parse {
        line: records.len() + 2,
        message: "trace has no final record (run incomplete?)".into(),
    })?;
    if records.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "trace has no iteration records".into(),
        });
    }
    Ok(Trace {
        header,
        records,
        final_record,
    })
}

pub fn read_trace_file(path: impl AsRef<Path>) -> Result<Trace> {
    let file = std::fs::File::open(path)?;
    read_trace(std::io::BufReader::new(file))
}
