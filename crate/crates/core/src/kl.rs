//! Generalized KL objective, the convex ND problem and its dual.
//!
//! For data `a >= 0` and a fixed factor `K >= 0` the primal is
//! `min_{x >= 0} -sum a (log(Kx / a) + 1) + sum Kx` and the dual is
//! `max a^T log(-y)` subject to `K^T(-y) <= K^T 1`. Batched problems carry one
//! data column per independent subproblem; objective values are summed over
//! columns.

use crate::error::{shape_err, NmfError, Result};
use crate::matrix::{DenseMatrix, Role};

/// Replacement for positive dual entries before projection.
pub const DUAL_CLAMP: f64 = -1e-300;

/// `D(V || P) = -sum V (log(P / V) + 1) + sum P`, with `V = 0` entries
/// contributing `P`.
pub fn kl_divergence(v: &DenseMatrix, p: &DenseMatrix) -> Result<f64> {
    v.same_shape("kl_divergence", p)?;
    let cols = v.cols();
    let mut total = 0.0;
    for (idx, (&vi, &pi)) in v.as_slice().iter().zip(p.as_slice()).enumerate() {
        total += kl_term(vi, pi).ok_or(NmfError::KlUndefined {
            row: idx / cols,
            col: idx % cols,
            data: vi,
            model: pi,
        })?;
    }
    Ok(total)
}

/// [`kl_divergence`] for trace rows: a model that vanishes where the data
/// does not scores `+inf` instead of failing.
pub fn kl_objective(v: &DenseMatrix, p: &DenseMatrix) -> Result<f64> {
    match kl_divergence(v, p) {
        Err(NmfError::KlUndefined { .. }) => Ok(f64::INFINITY),
        other => other,
    }
}

#[inline]
pub(crate) fn kl_term(v: f64, p: f64) -> Option<f64> {
    if v == 0.0 {
        Some(p)
    } else if p <= 0.0 {
        None
    } else {
        Some(-v * ((p / v).ln() + 1.0) + p)
    }
}

/// One convex non-negative decomposition instance `a ~ K x`.
#[derive(Debug, Clone)]
pub struct NdProblem {
    a: DenseMatrix,
    k: DenseMatrix,
    col_sums: Vec<f64>,
}

impl NdProblem {
    /// `a` is `p x cols` (one subproblem per column), `k` is `p x q`.
    pub fn new(a: DenseMatrix, k: DenseMatrix) -> Result<Self> {
        if a.rows() != k.rows() {
            return Err(shape_err("NdProblem", (k.rows(), a.cols()), a.shape()));
        }
        a.validate(Role::Data)?;
        k.validate(Role::Factor)?;
        let col_sums = k.col_sums();
        if let Some(col) = col_sums.iter().position(|&s| s <= 0.0) {
            return Err(NmfError::ZeroFactorColumn { col });
        }
        Ok(Self { a, k, col_sums })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn k(&self) -> &DenseMatrix {
        &self.k
    }

    /// `K^T 1`.
    pub fn col_sums(&self) -> &[f64] {
        &self.col_sums
    }

    /// Data dimension `p`.
    pub fn p(&self) -> usize {
        self.k.rows()
    }

    /// Unknown dimension `q`.
    pub fn q(&self) -> usize {
        self.k.cols()
    }

    /// Number of independent columns solved together.
    pub fn batch(&self) -> usize {
        self.a.cols()
    }

    pub(crate) fn check_primal(&self, x: &DenseMatrix) -> Result<()> {
        if x.shape() != (self.q(), self.batch()) {
            return Err(shape_err("primal iterate", (self.q(), self.batch()), x.shape()));
        }
        Ok(())
    }

    pub(crate) fn check_dual(&self, y: &DenseMatrix) -> Result<()> {
        if y.shape() != self.a.shape() {
            return Err(shape_err("dual iterate", self.a.shape(), y.shape()));
        }
        Ok(())
    }
}

/// Weak-duality certificate for a primal/dual pair.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub feasible_dual: DenseMatrix,
}

impl Certificate {
    /// `gap / |primal|`.
    pub fn relative_gap(&self) -> f64 {
        relative_gap(self.gap, self.primal_value)
    }
}

pub(crate) fn relative_gap(gap: f64, primal: f64) -> f64 {
    if gap.is_infinite() {
        return gap;
    }
    gap / primal.abs().max(f64::MIN_POSITIVE)
}

pub fn primal_objective(prob: &NdProblem, x: &DenseMatrix) -> Result<f64> {
    prob.check_primal(x)?;
    let kx = prob.k.matmul(x)?;
    kl_divergence(&prob.a, &kx)
}

/// `sum a log(-y)`; entries with `a = 0` contribute nothing.
pub fn dual_objective(prob: &NdProblem, y: &DenseMatrix) -> Result<f64> {
    prob.check_dual(y)?;
    let cols = y.cols();
    let mut total = 0.0;
    for (idx, (&a, &yi)) in prob.a.as_slice().iter().zip(y.as_slice()).enumerate() {
        if a == 0.0 {
            continue;
        }
        if !(yi < 0.0) {
            return Err(NmfError::DualOutsideDomain {
                row: idx / cols,
                col: idx % cols,
                value: yi,
            });
        }
        total += a * (-yi).ln();
    }
    Ok(total)
}

/// Rescales each dual column so that `K^T(-y) <= K^T 1` holds.
///
/// Columns already feasible are returned untouched; infeasible ones are
/// divided by their largest ratio `K^T(-y) / K^T 1`. Positive entries are
/// clamped to [`DUAL_CLAMP`] first.
pub fn project_dual_feasible(prob: &NdProblem, y: &DenseMatrix) -> Result<DenseMatrix> {
    prob.check_dual(y)?;
    if !y.is_finite() {
        return Err(NmfError::InvalidEntry {
            role: "dual",
            row: 0,
            col: 0,
            value: f64::NAN,
        });
    }
    if y.as_slice().iter().all(|&v| v == 0.0) {
        return Err(NmfError::ZeroDual);
    }
    let mut out = y.map(|v| if v > 0.0 { DUAL_CLAMP } else { v });
    let ratios = max_ratios(prob, &out)?;
    let cols = out.cols();
    let scale: Vec<f64> = ratios.iter().map(|&r| if r > 1.0 { r } else { 1.0 }).collect();
    if scale.iter().any(|&s| s != 1.0) {
        for (idx, v) in out.as_mut_slice().iter_mut().enumerate() {
            *v /= scale[idx % cols];
        }
        // division can land one ulp outside the constraint
        loop {
            let ratios = max_ratios(prob, &out)?;
            if ratios.iter().all(|&r| r <= 1.0) {
                break;
            }
            for (idx, v) in out.as_mut_slice().iter_mut().enumerate() {
                if ratios[idx % cols] > 1.0 {
                    *v *= 1.0 - f64::EPSILON;
                }
            }
        }
    }
    Ok(out)
}

/// Per column, `max_j (K^T(-y))_j / (K^T 1)_j`.
fn max_ratios(prob: &NdProblem, y: &DenseMatrix) -> Result<Vec<f64>> {
    let kty = prob.k.tr_matmul(y)?;
    let cols = y.cols();
    let mut ratios = vec![f64::NEG_INFINITY; cols];
    for j in 0..kty.rows() {
        for (c, r) in ratios.iter_mut().enumerate() {
            *r = r.max(-kty.get(j, c) / prob.col_sums[j]);
        }
    }
    Ok(ratios)
}

/// Projects `y`, evaluates both objectives and returns the gap.
pub fn certificate(prob: &NdProblem, x: &DenseMatrix, y: &DenseMatrix) -> Result<Certificate> {
    let primal_value = primal_objective(prob, x)?;
    let (feasible_dual, dual_value) = dual_bound(prob, y)?;
    Ok(Certificate {
        primal_value,
        dual_value,
        gap: primal_value - dual_value,
        feasible_dual,
    })
}

/// The projected dual point and its objective value.
pub(crate) fn dual_bound(prob: &NdProblem, y: &DenseMatrix) -> Result<(DenseMatrix, f64)> {
    let feasible = project_dual_feasible(prob, y)?;
    let value = dual_objective(prob, &feasible)?;
    Ok((feasible, value))
}

/// Certificate for the simplex-constrained variant, where each column of `x`
/// lies on the probability simplex.
///
/// With `G(x) = 1{x on simplex} + 1^T K x` the conjugate term is
/// `G*(-K^T y) = max_j (-K^T y - K^T 1)_j`, finite for every `y`, so no
/// projection is required. Positive dual entries are clamped as in
/// [`project_dual_feasible`].
pub fn certificate_simplex(prob: &NdProblem, x: &DenseMatrix, y: &DenseMatrix) -> Result<Certificate> {
    let primal_value = primal_objective(prob, x)?;
    let (feasible_dual, dual_value) = simplex_dual_bound(prob, y)?;
    Ok(Certificate {
        primal_value,
        dual_value,
        gap: primal_value - dual_value,
        feasible_dual,
    })
}

pub(crate) fn simplex_dual_bound(prob: &NdProblem, y: &DenseMatrix) -> Result<(DenseMatrix, f64)> {
    prob.check_dual(y)?;
    let y = y.map(|v| if v > 0.0 { DUAL_CLAMP } else { v });
    let kty = prob.k.tr_matmul(&y)?;
    let mut penalty = 0.0;
    for c in 0..kty.cols() {
        let worst = (0..kty.rows())
            .map(|j| -kty.get(j, c) - prob.col_sums[j])
            .fold(f64::NEG_INFINITY, f64::max);
        penalty += worst;
    }
    let value = dual_objective(prob, &y)? - penalty;
    Ok((y, value))
}
