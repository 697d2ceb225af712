//! End-to-end training loop with trace output, plus run comparison.

mod compare;
mod config;
mod runner;
mod trace;

pub use compare::{compare_runs, Comparison, MethodSummary, RunDelta, RunRow};
pub use config::{AlphaMode, ExperimentConfig, LrSchedule, Method};
pub use runner::{run_experiment, run_experiment_to_path, RunOutcome};
pub use trace::{
    read_trace, read_trace_file, FinalRecord, Trace, TraceHeader, TraceLine, TraceRecord,
    TRACE_FORMAT,
};
