//! Uniform entry point for benchmarking the three solvers.

use std::fmt;
use std::str::FromStr;

use crate::baselines::admm::{admm_step_with, AdmmState};
use crate::baselines::mu::{mu_step, mu_update_h, mu_update_w};
use crate::error::{NmfError, Result};
use crate::fpa::{check_factorization, nd_batch, nmf_fpa, ConvergenceTrace, Side, SolveConfig, SolverClock, TraceRecord};
use crate::kl::kl_objective;
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mu,
    Admm,
    Fpa,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Fpa, Method::Mu, Method::Admm];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mu => "mu",
            Method::Admm => "admm",
            Method::Fpa => "fpa",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = NmfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mu" | "mua" => Ok(Method::Mu),
            "admm" => Ok(Method::Admm),
            "fpa" => Ok(Method::Fpa),
            other => Err(NmfError::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub w: DenseMatrix,
    pub h: DenseMatrix,
    pub trace: ConvergenceTrace,
}

fn require_rho(method: Method, rho: Option<f64>) -> Result<Option<f64>> {
    match (method, rho) {
        (Method::Admm, None) => Err(NmfError::Config("ADMM requires rho".into())),
        (Method::Admm, Some(r)) if !(r > 0.0) => Err(NmfError::Config(format!("rho must be positive, got {r}"))),
        _ => Ok(rho),
    }
}

/// Runs `method` on the full NMF problem from `(W0, H0)`.
///
/// Every method spends `cfg.max_data_access` data accesses (one MU or ADMM
/// iteration each; `iter_nd` per FPA outer iteration) and records rows on
/// the grid of [`SolveConfig::record_due`]. ADMM rows also carry residuals.
pub fn solver_driver(
    method: Method,
    v: &DenseMatrix,
    w0: &DenseMatrix,
    h0: &DenseMatrix,
    cfg: &SolveConfig,
    rho: Option<f64>,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    let rho = require_rho(method, rho)?;
    check_factorization(v, w0, h0)?;
    match method {
        Method::Fpa => {
            let out = nmf_fpa(v, w0, h0, cfg)?;
            Ok(SolveOutcome {
                w: out.w,
                h: out.h,
                trace: out.trace,
            })
        }
        Method::Mu => {
            let mut clock = SolverClock::default();
            let mut trace = ConvergenceTrace::new();
            let (mut w, mut h) = (w0.clone(), h0.clone());
            trace.push(TraceRecord::primal(0, kl_objective(v, &w.matmul(&h)?)?, 0.0))?;
            for access in 1..=cfg.max_data_access {
                (w, h) = clock.time(|| mu_step(v, &w, &h))?;
                if cfg.record_due(access) {
                    let obj = kl_objective(v, &w.matmul(&h)?)?;
                    trace.push(TraceRecord::primal(access, obj, clock.seconds()))?;
                }
            }
            Ok(SolveOutcome { w, h, trace })
        }
        Method::Admm => {
            let rho = rho.expect("checked above");
            let mut clock = SolverClock::default();
            let mut trace = ConvergenceTrace::new();
            let mut state = AdmmState::new(w0, h0, rho)?;
            trace.push(admm_record(0, v, &state, 0.0)?)?;
            for access in 1..=cfg.max_data_access {
                state = clock.time(|| admm_step_with(v, state, None))?;
                if cfg.record_due(access) {
                    trace.push(admm_record(access, v, &state, clock.seconds())?)?;
                }
            }
            Ok(SolveOutcome {
                w: state.w,
                h: state.h,
                trace,
            })
        }
    }
}

fn admm_record(access: u64, v: &DenseMatrix, state: &AdmmState, wall: f64) -> Result<TraceRecord> {
    Ok(TraceRecord {
        residuals: Some(state.residuals()?),
        ..TraceRecord::primal(access, state.objective(v)?, wall)
    })
}

/// Runs `method` on a convex ND problem: `side` names the fixed factor,
/// `fixed` is its value and `init` the starting value of the free factor.
/// Returns the estimated free factor and the trace.
pub fn nd_driver(
    method: Method,
    v: &DenseMatrix,
    fixed: &DenseMatrix,
    init: &DenseMatrix,
    side: Side,
    cfg: &SolveConfig,
    rho: Option<f64>,
) -> Result<(DenseMatrix, ConvergenceTrace)> {
    cfg.validate()?;
    let rho = require_rho(method, rho)?;
    let (w0, h0) = match side {
        Side::FixW => (fixed, init),
        Side::FixH => (init, fixed),
    };
    check_factorization(v, w0, h0)?;
    let free = |w: DenseMatrix, h: DenseMatrix| match side {
        Side::FixW => h,
        Side::FixH => w,
    };
    match method {
        Method::Fpa => {
            let (factor, out) = nd_batch(v, fixed, init, side, cfg)?;
            Ok((factor, out.trace))
        }
        Method::Mu => {
            let mut clock = SolverClock::default();
            let mut trace = ConvergenceTrace::new();
            let (mut w, mut h) = (w0.clone(), h0.clone());
            trace.push(TraceRecord::primal(0, kl_objective(v, &w.matmul(&h)?)?, 0.0))?;
            for access in 1..=cfg.max_data_access {
                clock.time(|| -> Result<()> {
                    match side {
                        Side::FixW => h = mu_update_h(v, &w, &h)?,
                        Side::FixH => w = mu_update_w(v, &w, &h)?,
                    }
                    Ok(())
                })?;
                if nd_record_due(cfg, access) {
                    let obj = kl_objective(v, &w.matmul(&h)?)?;
                    trace.push(TraceRecord::primal(access, obj, clock.seconds()))?;
                }
            }
            Ok((free(w, h), trace))
        }
        Method::Admm => {
            let rho = rho.expect("checked above");
            let mut clock = SolverClock::default();
            let mut trace = ConvergenceTrace::new();
            let mut state = AdmmState::new(w0, h0, rho)?;
            trace.push(admm_record(0, v, &state, 0.0)?)?;
            for access in 1..=cfg.max_data_access {
                state = clock.time(|| admm_step_with(v, state, Some(side)))?;
                if nd_record_due(cfg, access) {
                    trace.push(admm_record(access, v, &state, clock.seconds())?)?;
                }
            }
            Ok((free(state.w, state.h), trace))
        }
    }
}

/// ND runs record every `trace_stride` iterations, matching `nd_batch`.
fn nd_record_due(cfg: &SolveConfig, access: u64) -> bool {
    access == cfg.max_data_access || (cfg.record_trace && access.is_multiple_of(cfg.trace_stride as u64))
}
