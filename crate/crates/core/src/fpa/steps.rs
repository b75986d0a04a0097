use crate::error::{NmfError, Result};
use crate::kl::NdProblem;
use crate::prox::ProxParams;

/// Per-column step sizes together with the `||K||` they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizes {
    pub params: ProxParams,
    pub norm_k: f64,
}

impl StepSizes {
    pub fn sigma(&self) -> &[f64] {
        &self.params.sigma
    }

    pub fn tau(&self) -> &[f64] {
        &self.params.tau
    }
}

/// Data-driven step sizes for the primal-dual iteration.
///
/// Per data column `c`, with `S_K = 1^T K 1` and `S_a = 1^T a_c`:
/// `sigma = sqrt(p) S_K / (sqrt(q) ||K|| S_a)` and
/// `tau = sqrt(q) S_a / (sqrt(p) ||K|| S_K)`, so `sigma tau ||K||^2 = 1`.
/// These come from assuming `x* = alpha 1` with `alpha = S_a / S_K` and
/// `y* = -1`, started from `(0, 0)`.
pub fn heuristic_step_sizes(prob: &NdProblem, norm_k: f64) -> Result<StepSizes> {
    if !(norm_k > 0.0 && norm_k.is_finite()) {
        return Err(NmfError::InvalidArgument(format!(
            "spectral norm must be positive, got {norm_k}"
        )));
    }
    let p = prob.p() as f64;
    let q = prob.q() as f64;
    let k_total: f64 = prob.col_sums().iter().sum();
    if !(k_total > 0.0) {
        return Err(NmfError::ZeroMatrix);
    }
    let data_sums = prob.a().col_sums();
    let mut sigma = Vec::with_capacity(data_sums.len());
    let mut tau = Vec::with_capacity(data_sums.len());
    for (col, &a_total) in data_sums.iter().enumerate() {
        if !(a_total > 0.0) {
            return Err(NmfError::EmptyDataColumn { col });
        }
        sigma.push(p.sqrt() * k_total / (q.sqrt() * norm_k * a_total));
        tau.push(q.sqrt() * a_total / (p.sqrt() * norm_k * k_total));
    }
    Ok(StepSizes {
        params: ProxParams::new(sigma, tau)?,
        norm_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;

    #[test]
    fn all_ones() {
        let (p, q) = (4, 3);
        let prob = NdProblem::new(DenseMatrix::filled(p, 1, 1.0), DenseMatrix::filled(p, q, 1.0)).unwrap();
        let norm = ((p * q) as f64).sqrt();
        let s = heuristic_step_sizes(&prob, norm).unwrap();
        assert!((s.sigma()[0] - 1.0).abs() < 1e-15);
        assert!((s.tau()[0] - 1.0 / (p * q) as f64).abs() < 1e-15);
        assert!((s.sigma()[0] * s.tau()[0] * norm * norm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn empty_column_is_an_error() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let prob = NdProblem::new(a, DenseMatrix::identity(2)).unwrap();
        assert!(matches!(
            heuristic_step_sizes(&prob, 1.0),
            Err(NmfError::EmptyDataColumn { col: 1 })
        ));
    }
}
