//! Closed-form proximal operators for the KL decomposition problem.
//!
//! Step sizes are given per column: a slice with one entry per column of the
//! iterate, or a single entry broadcast to every column.

use crate::error::{NmfError, Result};
use crate::matrix::DenseMatrix;

/// Dual (`sigma`) and primal (`tau`) step sizes, one entry per column.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxParams {
    pub sigma: Vec<f64>,
    pub tau: Vec<f64>,
}

impl ProxParams {
    pub fn new(sigma: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        if sigma.is_empty() || sigma.len() != tau.len() {
            return Err(NmfError::InvalidArgument(format!(
                "need matching non-empty step vectors, got {} and {}",
                sigma.len(),
                tau.len()
            )));
        }
        if let Some(bad) = sigma.iter().chain(&tau).find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(NmfError::InvalidArgument(format!(
                "step sizes must be positive and finite, got {bad}"
            )));
        }
        Ok(Self { sigma, tau })
    }

    pub fn scalar(sigma: f64, tau: f64) -> Result<Self> {
        Self::new(vec![sigma], vec![tau])
    }
}

fn broadcast<'a>(steps: &'a [f64], cols: usize, what: &str) -> Result<impl Fn(usize) -> f64 + 'a> {
    if steps.len() != 1 && steps.len() != cols {
        return Err(NmfError::InvalidArgument(format!(
            "{what} has {} entries for {cols} columns",
            steps.len()
        )));
    }
    let single = steps.len() == 1;
    Ok(move |c: usize| if single { steps[0] } else { steps[c] })
}

/// `1/2 (y - sqrt(y^2 + 4 sigma a))`, elementwise.
#[inline]
pub fn prox_f_star_scalar(y: f64, sigma: f64, a: f64) -> f64 {
    let root = (y * y + 4.0 * sigma * a).sqrt();
    if y > 0.0 {
        // same root, without cancelling y against sqrt(y^2 + ...)
        -2.0 * sigma * a / (y + root)
    } else {
        0.5 * (y - root)
    }
}

/// Proximal map of `sigma F*` where `F*(y) = -sum a log(-y)`.
pub fn prox_f_star(y: &DenseMatrix, sigma: &[f64], a: &DenseMatrix) -> Result<DenseMatrix> {
    y.same_shape("prox_f_star", a)?;
    let cols = y.cols();
    let sigma = broadcast(sigma, cols, "sigma")?;
    let mut out = y.clone();
    for (idx, (v, &ai)) in out.as_mut_slice().iter_mut().zip(a.as_slice()).enumerate() {
        *v = prox_f_star_scalar(*v, sigma(idx % cols), ai);
    }
    Ok(out)
}

/// Proximal map of `tau G` where `G(x) = 1{x >= 0} + 1^T K x`:
/// `(x - tau K^T 1)_+`.
pub fn prox_g(x: &DenseMatrix, tau: &[f64], col_sums: &[f64]) -> Result<DenseMatrix> {
    if col_sums.len() != x.rows() {
        return Err(NmfError::InvalidArgument(format!(
            "K^T 1 has {} entries for {} rows",
            col_sums.len(),
            x.rows()
        )));
    }
    let cols = x.cols();
    let tau = broadcast(tau, cols, "tau")?;
    let mut out = x.clone();
    for (idx, v) in out.as_mut_slice().iter_mut().enumerate() {
        *v = (*v - tau(idx % cols) * col_sums[idx / cols]).max(0.0);
    }
    Ok(out)
}

/// Euclidean projection onto `{u >= 0, sum u = 1}` by sort and threshold.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(NmfError::InvalidArgument("cannot project an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(NmfError::InvalidArgument("non-finite entry in simplex projection".into()));
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    // absorb the rounding left in the sum into the support
    let total: f64 = out.iter().sum();
    let support = out.iter().filter(|&&x| x > 0.0).count();
    let correction = (1.0 - total) / support as f64;
    if correction != 0.0 {
        for x in out.iter_mut().filter(|x| **x > 0.0) {
            *x = (*x + correction).max(0.0);
        }
    }
    Ok(out)
}

/// Proximal map for the simplex-constrained `G`: each column becomes
/// `project_simplex(x - tau K^T 1)`.
pub fn prox_g_simplex(x: &DenseMatrix, tau: &[f64], col_sums: &[f64]) -> Result<DenseMatrix> {
    if col_sums.len() != x.rows() {
        return Err(NmfError::InvalidArgument(format!(
            "K^T 1 has {} entries for {} rows",
            col_sums.len(),
            x.rows()
        )));
    }
    let cols = x.cols();
    let tau = broadcast(tau, cols, "tau")?;
    let mut out = x.clone();
    for c in 0..cols {
        let shifted: Vec<f64> = (0..x.rows())
            .map(|j| x.get(j, c) - tau(c) * col_sums[j])
            .collect();
        for (j, v) in project_simplex(&shifted)?.into_iter().enumerate() {
            out.set(j, c, v);
        }
    }
    Ok(out)
}
