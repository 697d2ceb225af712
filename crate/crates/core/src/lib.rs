//! Percentile-based dynamic thresholding for multi-label semi-supervised
//! classification.
//!
//! Each class keeps an EMA histogram of its weak-view confidence scores on
//! unlabeled data. Fixed percentile targets are inverted through that
//! histogram into per-class positive and negative score thresholds, which
//! select hard pseudo-labels; the gap between the two thresholds drives the
//! per-class unlabeled loss weight.
//!
//! The [`toy`] module provides a small feature-space training substrate and
//! [`experiment`] runs the full loop with trace output.

pub mod error;
pub mod experiment;
pub mod histogram;
pub mod losses;
pub mod metrics;
pub mod pseudo_label;
pub mod thresholds;
pub mod toy;

pub use error::{Error, Result};
pub use experiment::{compare_runs, run_experiment, ExperimentConfig, Method};
pub use histogram::ClassHistogram;
pub use losses::{LossConfig, LossKind};
pub use metrics::EvalReport;
pub use pseudo_label::{select, SelectionMask};
pub use thresholds::{ThresholdState, WeightSchedule};
