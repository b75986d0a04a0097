//! Chambolle-Pock iteration for the convex decomposition problem.

use crate::error::{NmfError, Result};
use crate::fpa::steps::{heuristic_step_sizes, StepSizes};
use crate::fpa::trace::{ConvergenceTrace, SolveConfig, SolverClock, TraceRecord};
use crate::kl::{dual_bound, primal_objective, simplex_dual_bound, Certificate, NdProblem};
use crate::matrix::{DenseMatrix, Role};
use crate::prox::{prox_f_star, prox_g_simplex};
use crate::spectral::spectral_norm_or_estimate;

/// Feasible set for the primal iterate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PrimalConstraint {
    #[default]
    NonNegative,
    /// Each column on the probability simplex.
    Simplex,
}

/// Iterates of the primal-dual loop.
#[derive(Debug, Clone, PartialEq)]
pub struct FpaState {
    pub x: DenseMatrix,
    pub x_bar: DenseMatrix,
    pub x_old: DenseMatrix,
    pub y: DenseMatrix,
}

impl FpaState {
    pub fn new(prob: &NdProblem, x0: DenseMatrix, y0: DenseMatrix) -> Result<Self> {
        prob.check_primal(&x0)?;
        prob.check_dual(&y0)?;
        x0.validate(Role::Factor)?;
        y0.validate(Role::Dual)?;
        Ok(Self {
            x_bar: x0.clone(),
            x_old: x0.clone(),
            x: x0,
            y: y0,
        })
    }

    /// Starts from `x0` with the dual set to `K x0`.
    pub fn from_primal(prob: &NdProblem, x0: DenseMatrix) -> Result<Self> {
        let y0 = prob.k().matmul(&x0)?;
        Self::new(prob, x0, y0)
    }

    /// Keeps `x` and `y` but drops the extrapolation memory.
    pub fn restart_extrapolation(&mut self) {
        self.x_bar = self.x.clone();
        self.x_old = self.x.clone();
    }
}

/// Runs one primal-dual iteration in place.
///
/// `y <- prox_{sigma F*}(y + sigma K x_bar)`,
/// `x <- (x - tau K^T (y + 1))_+` (or its simplex counterpart),
/// `x_bar <- 2x - x_old`, `x_old <- x`.
pub fn fpa_iteration(
    prob: &NdProblem,
    state: &mut FpaState,
    steps: &StepSizes,
    constraint: PrimalConstraint,
) -> Result<()> {
    let cols = prob.batch();
    let sigma = steps.sigma();
    let tau = steps.tau();
    if sigma.len() != cols && sigma.len() != 1 {
        return Err(NmfError::InvalidArgument(format!(
            "{} step sizes for {cols} columns",
            sigma.len()
        )));
    }
    let per_col = |s: &[f64], c: usize| if s.len() == 1 { s[0] } else { s[c] };

    let kx_bar = prob.k().matmul(&state.x_bar)?;
    let mut shifted = state.y.clone();
    for (idx, (v, kx)) in shifted.as_mut_slice().iter_mut().zip(kx_bar.as_slice()).enumerate() {
        // ascent on the dual: with `y - sigma K x_bar` the iteration has no
        // fixed point with `x >= 0` (for a = K = 1 it would need x = y = -1)
        *v += per_col(sigma, idx % cols) * kx;
    }
    state.y = prox_f_star(&shifted, sigma, prob.a())?;

    state.x = match constraint {
        PrimalConstraint::NonNegative => {
            let ky1 = prob.k().tr_matmul(&state.y.map(|v| v + 1.0))?;
            let mut x = state.x.clone();
            for (idx, (v, g)) in x.as_mut_slice().iter_mut().zip(ky1.as_slice()).enumerate() {
                *v = (*v - per_col(tau, idx % cols) * g).max(0.0);
            }
            x
        }
        PrimalConstraint::Simplex => {
            let ky = prob.k().tr_matmul(&state.y)?;
            let mut x = state.x.clone();
            for (idx, (v, g)) in x.as_mut_slice().iter_mut().zip(ky.as_slice()).enumerate() {
                *v -= per_col(tau, idx % cols) * g;
            }
            prox_g_simplex(&x, tau, prob.col_sums())?
        }
    };

    let mut x_bar = state.x.clone();
    for (b, o) in x_bar.as_mut_slice().iter_mut().zip(state.x_old.as_slice()) {
        *b = 2.0 * *b - o;
    }
    state.x_bar = x_bar;
    state.x_old = state.x.clone();
    Ok(())
}

fn check_finite(state: &FpaState, iteration: usize) -> Result<()> {
    if !state.y.is_finite() {
        return Err(NmfError::NonFinite {
            iteration,
            stage: "dual update",
        });
    }
    if !state.x.is_finite() {
        return Err(NmfError::NonFinite {
            iteration,
            stage: "primal update",
        });
    }
    Ok(())
}

/// Stopping and tracing options for [`fpa_nd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdOptions {
    pub max_iter: usize,
    /// Relative gap tolerance; non-finite disables gap stopping.
    pub gap_tol: f64,
    /// Certificate and trace row every `trace_stride` iterations; 0 keeps
    /// only the first and last rows.
    pub trace_stride: usize,
    pub constraint: PrimalConstraint,
}

impl NdOptions {
    pub fn iterations(max_iter: usize) -> Self {
        Self {
            max_iter,
            gap_tol: f64::INFINITY,
            trace_stride: 0,
            constraint: PrimalConstraint::NonNegative,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NdOutcome {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
    pub trace: ConvergenceTrace,
    pub iterations: usize,
    /// Certificate at the final iterate.
    pub certificate: Certificate,
}

/// Certificate used inside the solvers. A transient iterate with
/// `(Kx)_i = 0` where `a_i > 0` has primal value `+inf` rather than failing
/// the run.
pub(crate) fn nd_certificate(
    prob: &NdProblem,
    x: &DenseMatrix,
    y: &DenseMatrix,
    constraint: PrimalConstraint,
) -> Result<Certificate> {
    let primal_value = match primal_objective(prob, x) {
        Err(NmfError::KlUndefined { .. }) => f64::INFINITY,
        other => other?,
    };
    let (feasible_dual, dual_value) = match constraint {
        PrimalConstraint::NonNegative => dual_bound(prob, y)?,
        PrimalConstraint::Simplex => simplex_dual_bound(prob, y)?,
    };
    Ok(Certificate {
        primal_value,
        dual_value,
        gap: primal_value - dual_value,
        feasible_dual,
    })
}

fn certified_record(iteration: usize, cert: &Certificate, wall: f64) -> TraceRecord {
    TraceRecord {
        data_access: iteration as u64,
        primal: cert.primal_value,
        dual: Some(cert.dual_value),
        gap: Some(cert.gap),
        wall_seconds: wall,
        residuals: None,
    }
}

/// Solves one (batched) ND problem from `(x0, y0)`.
///
/// Stops after `max_iter` iterations, or earlier once the relative gap of a
/// certificate drops to `gap_tol`. Certificates are only taken from duals
/// that went through at least one proximal step.
pub fn fpa_nd(
    prob: &NdProblem,
    x0: DenseMatrix,
    y0: DenseMatrix,
    steps: &StepSizes,
    opts: NdOptions,
) -> Result<NdOutcome> {
    if opts.max_iter == 0 {
        return Err(NmfError::InvalidArgument("need at least one iteration".into()));
    }
    let mut state = FpaState::new(prob, x0, y0)?;
    let mut trace = ConvergenceTrace::new();
    let mut clock = SolverClock::default();
    trace.push(TraceRecord::primal(0, primal_objective(prob, &state.x)?, 0.0))?;

    let check_gap = opts.gap_tol.is_finite();
    let mut last_cert = None;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        clock.time(|| fpa_iteration(prob, &mut state, steps, opts.constraint))?;
        check_finite(&state, it)?;
        iterations = it;

        let strided = opts.trace_stride > 0 && it % opts.trace_stride == 0;
        if strided || check_gap || it == opts.max_iter {
            let cert = nd_certificate(prob, &state.x, &state.y, opts.constraint)?;
            let stop = check_gap && cert.relative_gap() <= opts.gap_tol;
            if strided || stop || it == opts.max_iter {
                trace.push(certified_record(it, &cert, clock.seconds()))?;
            }
            last_cert = Some(cert);
            if stop {
                break;
            }
        }
    }
    let certificate = match last_cert {
        Some(c) => c,
        None => nd_certificate(prob, &state.x, &state.y, opts.constraint)?,
    };
    Ok(NdOutcome {
        x: state.x,
        y: state.y,
        trace,
        iterations,
        certificate,
    })
}

/// Which factor is held fixed in a batched ND solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Side {
    /// `H` fixed, estimate `W`: `a = V^T`, `K = H^T`, `x = W^T`.
    FixH,
    /// `W` fixed, estimate `H`: `a = V`, `K = W`, `x = H`.
    FixW,
}

/// The ND problem for `side`, plus the initial primal in solver orientation.
pub fn nd_problem(v: &DenseMatrix, fixed: &DenseMatrix, init: &DenseMatrix, side: Side) -> Result<(NdProblem, DenseMatrix)> {
    match side {
        Side::FixW => Ok((NdProblem::new(v.clone(), fixed.clone())?, init.clone())),
        Side::FixH => Ok((NdProblem::new(v.transpose(), fixed.transpose())?, init.transpose())),
    }
}

/// Estimates the free factor with every column of the data solved at once.
///
/// `fixed` is `W` (`n x r`) for [`Side::FixW`] or `H` (`r x m`) for
/// [`Side::FixH`]; `init` is the starting value of the free factor in its
/// natural orientation, and the returned factor has the same orientation.
/// One iteration counts as one data access.
pub fn nd_batch(
    v: &DenseMatrix,
    fixed: &DenseMatrix,
    init: &DenseMatrix,
    side: Side,
    cfg: &SolveConfig,
) -> Result<(DenseMatrix, NdOutcome)> {
    cfg.validate()?;
    let (prob, x0) = nd_problem(v, fixed, init, side)?;
    let steps = heuristic_step_sizes(&prob, spectral_norm_or_estimate(prob.k())?)?;
    let state = FpaState::from_primal(&prob, x0)?;
    let opts = NdOptions {
        max_iter: cfg.max_data_access as usize,
        gap_tol: cfg.gap_tol,
        trace_stride: if cfg.record_trace { cfg.trace_stride } else { 0 },
        constraint: PrimalConstraint::NonNegative,
    };
    let out = fpa_nd(&prob, state.x, state.y, &steps, opts)?;
    let factor = match side {
        Side::FixW => out.x.clone(),
        Side::FixH => out.x.transpose(),
    };
    Ok((factor, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::prox_g;

    fn col(v: &[f64]) -> DenseMatrix {
        DenseMatrix::column(v).unwrap()
    }

    fn scalar_problem() -> (NdProblem, StepSizes) {
        let prob = NdProblem::new(col(&[1.0]), col(&[1.0])).unwrap();
        let steps = heuristic_step_sizes(&prob, 1.0).unwrap();
        (prob, steps)
    }

    #[test]
    fn scalar_identity_converges() {
        let (prob, steps) = scalar_problem();
        let state = FpaState::from_primal(&prob, col(&[0.3])).unwrap();
        let out = fpa_nd(&prob, state.x, state.y, &steps, NdOptions::iterations(200)).unwrap();
        assert!((out.x.get(0, 0) - 1.0).abs() < 1e-6, "x = {}", out.x.get(0, 0));
    }

    #[test]
    fn infinite_tolerance_runs_full_budget() {
        let (prob, steps) = scalar_problem();
        let opts = NdOptions {
            trace_stride: 1,
            ..NdOptions::iterations(37)
        };
        let out = fpa_nd(&prob, col(&[0.3]), col(&[0.3]), &steps, opts).unwrap();
        assert_eq!(out.iterations, 37);
        assert_eq!(out.trace.len(), 38);
    }

    #[test]
    fn gap_tolerance_stops_early() {
        let (prob, steps) = scalar_problem();
        let opts = NdOptions {
            gap_tol: 1e-6,
            ..NdOptions::iterations(10_000)
        };
        let out = fpa_nd(&prob, col(&[0.3]), col(&[0.3]), &steps, opts).unwrap();
        assert!(out.iterations < 10_000);
        assert!(out.certificate.relative_gap() <= 1e-6);
    }

    #[test]
    fn primal_update_matches_prox_form() {
        let k = DenseMatrix::from_rows(&[vec![0.5, 1.0], vec![2.0, 0.1], vec![0.3, 0.3]]).unwrap();
        let prob = NdProblem::new(col(&[1.0, 2.0, 0.5]), k.clone()).unwrap();
        let x = col(&[0.7, 0.01]);
        let y = col(&[-0.4, -1.9, -0.2]);
        let tau = 0.37;
        let ky1 = k.tr_matmul(&y.map(|v| v + 1.0)).unwrap();
        let algebraic = x.zip_map(&ky1, |xi, g| (xi - tau * g).max(0.0)).unwrap();
        let kty = k.tr_matmul(&y).unwrap();
        let shifted = x.zip_map(&kty, |xi, g| xi - tau * g).unwrap();
        let prox = prox_g(&shifted, &[tau], prob.col_sums()).unwrap();
        for (a, b) in algebraic.as_slice().iter().zip(prox.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn extrapolation_invariant() {
        let (prob, steps) = scalar_problem();
        let mut state = FpaState::from_primal(&prob, col(&[0.3])).unwrap();
        for _ in 0..3 {
            let prev = state.x.clone();
            fpa_iteration(&prob, &mut state, &steps, PrimalConstraint::NonNegative).unwrap();
            assert_eq!(state.x_bar.get(0, 0), 2.0 * state.x.get(0, 0) - prev.get(0, 0));
            assert_eq!(state.x_old, state.x);
            assert!(state.y.get(0, 0) < 0.0);
        }
    }

    #[test]
    fn diverging_steps_report_iteration() {
        let (prob, _) = scalar_problem();
        let steps = StepSizes {
            params: crate::prox::ProxParams::scalar(1e300, 1e300).unwrap(),
            norm_k: 1.0,
        };
        let err = fpa_nd(&prob, col(&[0.3]), col(&[0.3]), &steps, NdOptions::iterations(50)).unwrap_err();
        assert!(matches!(err, NmfError::NonFinite { .. }), "{err:?}");
    }
}
