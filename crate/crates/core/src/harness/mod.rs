//! File formats and experiment orchestration.

mod experiment;
mod io;
mod trace_file;

pub use crate::random::synth_matrix;
pub use experiment::{
    init_hash, run_experiment, ExperimentReport, ExperimentSpec, ProblemKind, ReferenceSummary, RunSummary,
    ACCESS_ACCOUNTING,
};
pub use io::{fmt_f64, load_matrix, write_matrix, MatrixFormat};
pub use trace_file::{TraceFile, TRACE_COLUMNS};
