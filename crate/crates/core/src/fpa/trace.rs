use std::time::{Duration, Instant};

use crate::error::{NmfError, Result};

/// One row of a convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub data_access: u64,
    pub primal: f64,
    pub dual: Option<f64>,
    pub gap: Option<f64>,
    pub wall_seconds: f64,
    /// ADMM only: `||X - YZ||`, `||Y - W||`, `||Z - H||` (Frobenius).
    pub residuals: Option<[f64; 3]>,
}

impl TraceRecord {
    pub fn primal(data_access: u64, primal: f64, wall_seconds: f64) -> Self {
        Self {
            data_access,
            primal,
            dual: None,
            gap: None,
            wall_seconds,
            residuals: None,
        }
    }
}

/// A factor column (or row of `H`) that was reseeded because it vanished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnRepair {
    pub data_access: u64,
    pub factor: FactorKind,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// Column of `W`.
    W,
    /// Row of `H`.
    H,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
    repairs: Vec<ColumnRepair>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; `data_access` must strictly increase and
    /// `wall_seconds` must not decrease.
    pub fn push(&mut self, record: TraceRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.data_access <= last.data_access {
                return Err(NmfError::InvalidArgument(format!(
                    "trace data_access {} after {}",
                    record.data_access, last.data_access
                )));
            }
            if record.wall_seconds < last.wall_seconds {
                return Err(NmfError::InvalidArgument("trace wall clock went backwards".into()));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn note_repair(&mut self, repair: ColumnRepair) {
        self.repairs.push(repair);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn repairs(&self) -> &[ColumnRepair] {
        &self.repairs
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends every record of `other`, shifting its data accesses by `offset`
    /// and its wall clock by `time_offset`.
    pub fn extend_shifted(&mut self, other: &ConvergenceTrace, offset: u64, time_offset: f64) -> Result<()> {
        for rec in &other.records {
            let mut rec = rec.clone();
            rec.data_access += offset;
            rec.wall_seconds += time_offset;
            self.push(rec)?;
        }
        for rep in &other.repairs {
            self.repairs.push(ColumnRepair {
                data_access: rep.data_access + offset,
                ..*rep
            });
        }
        Ok(())
    }
}

/// Configuration shared by all solvers.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolveConfig {
    /// Inner FPA iterations per convex block.
    pub iter_nd: usize,
    /// Budget in data accesses.
    pub max_data_access: u64,
    /// Relative duality-gap tolerance; non-finite disables gap stopping.
    pub gap_tol: f64,
    /// Record intermediate rows (the first and last rows are always kept).
    pub record_trace: bool,
    /// Record every `trace_stride` outer iterations.
    pub trace_stride: usize,
    /// Value used to reseed vanished factor columns.
    pub repair_offset: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            iter_nd: 5,
            max_data_access: 3000,
            gap_tol: f64::INFINITY,
            record_trace: true,
            trace_stride: 1,
            repair_offset: crate::random::DEFAULT_INIT_OFFSET,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iter_nd == 0 {
            return Err(NmfError::Config("iter_nd must be at least 1".into()));
        }
        if self.max_data_access == 0 {
            return Err(NmfError::Config("data-access budget must be positive".into()));
        }
        if self.trace_stride == 0 {
            return Err(NmfError::Config("trace_stride must be at least 1".into()));
        }
        if self.gap_tol < 0.0 || self.gap_tol.is_nan() {
            return Err(NmfError::Config(format!("gap_tol must be >= 0, got {}", self.gap_tol)));
        }
        if !(self.repair_offset > 0.0) {
            return Err(NmfError::Config("repair_offset must be positive".into()));
        }
        Ok(())
    }

    pub fn gap_stopping(&self) -> bool {
        self.gap_tol.is_finite()
    }

    /// Whether a trace row is due after `access` data accesses.
    ///
    /// Rows fall on multiples of `iter_nd * trace_stride` and on the final
    /// access, so every method shares the same grid for a given config.
    pub fn record_due(&self, access: u64) -> bool {
        let period = (self.iter_nd * self.trace_stride) as u64;
        access == self.max_data_access || (self.record_trace && access.is_multiple_of(period))
    }
}

/// Accumulates time spent in solver steps only.
#[derive(Debug, Default)]
pub(crate) struct SolverClock {
    elapsed: Duration,
}

impl SolverClock {
    pub fn time<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.elapsed += start.elapsed();
        out
    }

    pub fn seconds(&self) -> f64 {
        self.elapsed.as_secs_f64()
    }
}
