//! Alternating primal-dual NMF.
//!
//! Each outer iteration runs `iter_nd` primal-dual steps on `W` with `H`
//! fixed, then `iter_nd` steps on `H` with `W` fixed. The dual variable `chi`
//! (`n x m`, living in data space) is carried across both blocks. An outer
//! iteration counts as `iter_nd` data accesses, the same as `iter_nd`
//! multiplicative updates of both factors.

use crate::error::{shape_err, NmfError, Result};
use crate::fpa::nd::{fpa_iteration, nd_certificate, FpaState, PrimalConstraint};
use crate::fpa::steps::heuristic_step_sizes;
use crate::fpa::trace::{ColumnRepair, ConvergenceTrace, FactorKind, SolveConfig, SolverClock, TraceRecord};
use crate::kl::{kl_objective, NdProblem};
use crate::matrix::{DenseMatrix, Role};
use crate::spectral::spectral_norm_or_estimate;

/// Rescales so every column of `W` sums to one, moving the scale into the
/// matching row of `H`. The product `WH` is unchanged.
pub fn normalize_factors(w: &DenseMatrix, h: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if w.cols() != h.rows() {
        return Err(shape_err("normalize_factors", (w.cols(), h.cols()), h.shape()));
    }
    let sums = w.col_sums();
    if let Some(col) = sums.iter().position(|&s| !(s > 0.0)) {
        return Err(NmfError::DegenerateColumn { col });
    }
    let mut w2 = w.clone();
    let r = w.cols();
    for (idx, v) in w2.as_mut_slice().iter_mut().enumerate() {
        *v /= sums[idx % r];
    }
    let mut h2 = h.clone();
    let m = h.cols();
    for (idx, v) in h2.as_mut_slice().iter_mut().enumerate() {
        *v *= sums[idx / m];
    }
    Ok((w2, h2))
}

/// Like [`normalize_factors`] but leaves all-zero columns of `W` (and the
/// matching rows of `H`) untouched.
fn normalize_nonzero(w: &DenseMatrix, h: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let scale: Vec<f64> = w.col_sums().into_iter().map(|s| if s > 0.0 { s } else { 1.0 }).collect();
    let mut w2 = w.clone();
    let r = w.cols();
    for (idx, v) in w2.as_mut_slice().iter_mut().enumerate() {
        *v /= scale[idx % r];
    }
    let mut h2 = h.clone();
    let m = h.cols();
    for (idx, v) in h2.as_mut_slice().iter_mut().enumerate() {
        *v *= scale[idx / m];
    }
    (w2, h2)
}

/// Reseeds the vanished components of the factor that is about to be held
/// fixed (`W` columns or `H` rows) with `offset`, logging each. A zero
/// component of the free factor is a valid starting point and is kept.
fn repair_components(
    fixed: &mut DenseMatrix,
    kind: FactorKind,
    offset: f64,
    access: u64,
    trace: &mut ConvergenceTrace,
) {
    let sums = match kind {
        FactorKind::W => fixed.col_sums(),
        FactorKind::H => fixed.row_sums(),
    };
    for (j, s) in sums.into_iter().enumerate() {
        if s > 0.0 {
            continue;
        }
        match kind {
            FactorKind::W => (0..fixed.rows()).for_each(|i| fixed.set(i, j, offset)),
            FactorKind::H => (0..fixed.cols()).for_each(|c| fixed.set(j, c, offset)),
        }
        trace.note_repair(ColumnRepair {
            data_access: access,
            factor: kind,
            index: j,
        });
    }
}

#[derive(Debug, Clone)]
pub struct NmfOutcome {
    pub w: DenseMatrix,
    pub h: DenseMatrix,
    pub trace: ConvergenceTrace,
    pub data_accesses: u64,
}

pub(crate) fn check_factorization(v: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix) -> Result<()> {
    if w.rows() != v.rows() {
        return Err(shape_err("W", (v.rows(), w.cols()), w.shape()));
    }
    if h.shape() != (w.cols(), v.cols()) {
        return Err(shape_err("H", (w.cols(), v.cols()), h.shape()));
    }
    v.validate(Role::Data)?;
    w.validate(Role::Factor)?;
    h.validate(Role::Factor)?;
    Ok(())
}

/// Runs one convex block of `inner` iterations and returns the final state.
fn run_block(prob: &NdProblem, x: DenseMatrix, y: DenseMatrix, inner: usize, first_access: u64) -> Result<FpaState> {
    let steps = heuristic_step_sizes(prob, spectral_norm_or_estimate(prob.k())?)?;
    let mut state = FpaState::new(prob, x, y)?;
    for i in 0..inner {
        fpa_iteration(prob, &mut state, &steps, PrimalConstraint::NonNegative)?;
        if !state.x.is_finite() || !state.y.is_finite() {
            return Err(NmfError::NonFinite {
                iteration: (first_access as usize) + i + 1,
                stage: "nmf block",
            });
        }
    }
    Ok(state)
}

/// Alternating primal-dual NMF from `(W0, H0)` under `cfg`.
///
/// Trace rows carry the objective `D(V || WH)` together with the certificate
/// of the most recent `H` block (a bound for `min_H D(V || WH)` at the
/// current `W`). With a finite `gap_tol` the run stops once that block's
/// relative gap falls below it.
pub fn nmf_fpa(v: &DenseMatrix, w0: &DenseMatrix, h0: &DenseMatrix, cfg: &SolveConfig) -> Result<NmfOutcome> {
    cfg.validate()?;
    check_factorization(v, w0, h0)?;
    let vt = v.transpose();
    let mut w = w0.clone();
    let mut h = h0.clone();
    let mut chi = w.matmul(&h)?;

    let mut trace = ConvergenceTrace::new();
    let mut clock = SolverClock::default();
    trace.push(TraceRecord::primal(0, kl_objective(v, &chi)?, 0.0))?;

    let mut access = 0u64;
    while access < cfg.max_data_access {
        let inner = (cfg.iter_nd as u64).min(cfg.max_data_access - access) as usize;

        // W block: a = V^T, K = H^T, x = W^T, dual chi^T
        repair_components(&mut h, FactorKind::H, cfg.repair_offset, access, &mut trace);
        let state = clock.time(|| -> Result<FpaState> {
            let (wn, hn) = normalize_nonzero(&w, &h);
            h = hn;
            let prob = NdProblem::new(vt.clone(), h.transpose())?;
            run_block(&prob, wn.transpose(), chi.transpose(), inner, access)
        })?;
        w = state.x.transpose();
        chi = state.y.transpose();

        // H block: a = V, K = W, x = H, dual chi
        repair_components(&mut w, FactorKind::W, cfg.repair_offset, access, &mut trace);
        let (prob, state) = clock.time(|| -> Result<(NdProblem, FpaState)> {
            // rows of H sum to one, scale moves into the columns of W
            let (ht, wt) = normalize_nonzero(&h.transpose(), &w.transpose());
            w = wt.transpose();
            let prob = NdProblem::new(v.clone(), w.clone())?;
            let state = run_block(&prob, ht.transpose(), chi.clone(), inner, access)?;
            Ok((prob, state))
        })?;
        h = state.x;
        chi = state.y;
        access += inner as u64;

        let due = cfg.record_due(access);
        if due || cfg.gap_stopping() {
            let cert = nd_certificate(&prob, &h, &chi, PrimalConstraint::NonNegative)?;
            let stop = cfg.gap_stopping() && cert.relative_gap() <= cfg.gap_tol;
            if due || stop {
                trace.push(TraceRecord {
                    data_access: access,
                    primal: cert.primal_value,
                    dual: Some(cert.dual_value),
                    gap: Some(cert.gap),
                    wall_seconds: clock.seconds(),
                    residuals: None,
                })?;
            }
            if stop {
                break;
            }
        }
    }
    Ok(NmfOutcome {
        w,
        h,
        trace,
        data_accesses: access,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_init, RandomSeed};

    #[test]
    fn normalize_examples() {
        let w = DenseMatrix::from_rows(&[vec![2.0], vec![2.0]]).unwrap();
        let h = DenseMatrix::from_rows(&[vec![1.0, 3.0]]).unwrap();
        let (w2, h2) = normalize_factors(&w, &h).unwrap();
        assert_eq!(w2.as_slice(), &[0.5, 0.5]);
        assert_eq!(h2.as_slice(), &[4.0, 12.0]);

        let stochastic = DenseMatrix::from_rows(&[vec![0.25, 1.0], vec![0.75, 0.0]]).unwrap();
        let h = DenseMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(normalize_factors(&stochastic, &h).unwrap(), (stochastic.clone(), h));
    }

    #[test]
    fn normalize_rejects_zero_column() {
        let w = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let h = DenseMatrix::filled(2, 3, 1.0);
        assert!(matches!(
            normalize_factors(&w, &h),
            Err(NmfError::DegenerateColumn { col: 1 })
        ));
    }

    #[test]
    fn trace_schedule_and_budget() {
        let (w0, h0) = random_init(6, 8, 2, 0.1, RandomSeed(4)).unwrap();
        let v = crate::random::synth_matrix(6, 8, 0.0, 1.0, RandomSeed(5)).unwrap();
        let cfg = SolveConfig {
            iter_nd: 5,
            max_data_access: 23,
            ..SolveConfig::default()
        };
        let out = nmf_fpa(&v, &w0, &h0, &cfg).unwrap();
        let grid: Vec<u64> = out.trace.records().iter().map(|r| r.data_access).collect();
        assert_eq!(grid, vec![0, 5, 10, 15, 20, 23]);
        assert_eq!(out.data_accesses, 23);
        for rec in &out.trace.records()[1..] {
            assert!(rec.gap.unwrap() >= -1e-10);
        }
    }

    #[test]
    fn repairs_zero_rows_of_fixed_h() {
        let (w0, h0) = random_init(6, 8, 3, 0.1, RandomSeed(4)).unwrap();
        let v = w0.matmul(&h0).unwrap();
        let mut h = h0.clone();
        for c in 0..8 {
            h.set(2, c, 0.0);
        }
        let cfg = SolveConfig {
            max_data_access: 10,
            ..SolveConfig::default()
        };
        let out = nmf_fpa(&v, &w0, &h, &cfg).unwrap();
        assert_eq!(out.trace.repairs()[0].index, 2);
        assert_eq!(out.trace.repairs()[0].factor, FactorKind::H);
        assert_eq!(out.trace.repairs()[0].data_access, 0);
    }

    #[test]
    fn zero_w_column_is_a_valid_start() {
        let v = crate::random::synth_matrix(6, 8, 0.0, 4.0, RandomSeed(9)).unwrap();
        let (w0, h0) = random_init(6, 8, 3, 0.1, RandomSeed(4)).unwrap();
        let mut w = w0.clone();
        for i in 0..6 {
            w.set(i, 2, 0.0);
        }
        let cfg = SolveConfig {
            max_data_access: 20,
            ..SolveConfig::default()
        };
        let out = nmf_fpa(&v, &w, &h0, &cfg).unwrap();
        assert!(out.trace.repairs().is_empty());
        assert!(out.w.col_sums()[2] > 0.0);
        let first = out.trace.records()[0].primal;
        assert!(out.trace.last().unwrap().primal < first);
    }
}
