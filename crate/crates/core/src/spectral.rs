//! Largest singular value by power iteration on the smaller Gram matrix.

use crate::error::{NmfError, Result};
use crate::matrix::DenseMatrix;

pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-9;
pub const DEFAULT_SPECTRAL_MAX_ITER: usize = 10_000;

/// `||K||_2`, the largest singular value of `k`.
///
/// Runs power iteration on `K^T K` or `K K^T` (whichever is smaller) from the
/// normalized all-ones vector and stops once the Rayleigh quotient moves by
/// less than `tol` relative.
pub fn spectral_norm(k: &DenseMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(NmfError::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if k.as_slice().iter().all(|&v| v == 0.0) {
        return Err(NmfError::ZeroMatrix);
    }
    let gram = if k.cols() <= k.rows() {
        k.tr_matmul(k)?
    } else {
        k.matmul_tr(k)?
    };
    let d = gram.rows();
    let g = gram.as_slice();

    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut w = vec![0.0; d];
    let apply = |v: &[f64], w: &mut [f64]| {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = g[i * d..(i + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum();
        }
    };

    apply(&v, &mut w);
    if w.iter().all(|&x| x == 0.0) {
        // all-ones start is orthogonal to the range; restart on the heaviest axis
        let axis = (0..d)
            .max_by(|&a, &b| g[a * d + a].total_cmp(&g[b * d + b]))
            .unwrap_or(0);
        v.iter_mut().for_each(|x| *x = 0.0);
        v[axis] = 1.0;
        apply(&v, &mut w);
    }

    let mut lambda = dot(&v, &w);
    for _ in 0..max_iter {
        let norm = dot(&w, &w).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        apply(&v, &mut w);
        let next = dot(&v, &w);
        if (next - lambda).abs() <= tol * next.abs() {
            return Ok(next.max(0.0).sqrt());
        }
        lambda = next;
    }
    Err(NmfError::SpectralNotConverged {
        iterations: max_iter,
        estimate: lambda.max(0.0).sqrt(),
    })
}

/// Spectral norm with the default tolerance, falling back to the best
/// estimate when the iteration budget runs out.
pub fn spectral_norm_or_estimate(k: &DenseMatrix) -> Result<f64> {
    match spectral_norm(k, DEFAULT_SPECTRAL_TOL, DEFAULT_SPECTRAL_MAX_ITER) {
        Err(NmfError::SpectralNotConverged { estimate, .. }) if estimate > 0.0 => Ok(estimate),
        other => other,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
