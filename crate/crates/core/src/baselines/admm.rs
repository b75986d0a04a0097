//! ADMM for KL-NMF with splitting `X = YZ`, `Y = W`, `Z = H`.

use nalgebra::DMatrix;

use crate::error::{NmfError, Result};
use crate::fpa::Side;
use crate::kl::kl_divergence;
use crate::matrix::DenseMatrix;

/// Floor applied to `W` and `H` before evaluating the objective.
pub const ADMM_EVAL_EPS: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
    pub z: DenseMatrix,
    pub w: DenseMatrix,
    pub h: DenseMatrix,
    pub alpha_x: DenseMatrix,
    pub alpha_y: DenseMatrix,
    pub alpha_z: DenseMatrix,
    pub rho: f64,
}

impl AdmmState {
    /// `Y = W = W0`, `Z = H = H0`, `X = W0 H0`, multipliers zero.
    pub fn new(w0: &DenseMatrix, h0: &DenseMatrix, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(NmfError::Config(format!("rho must be positive, got {rho}")));
        }
        let x = w0.matmul(h0)?;
        Ok(Self {
            alpha_x: DenseMatrix::zeros(x.rows(), x.cols()),
            alpha_y: DenseMatrix::zeros(w0.rows(), w0.cols()),
            alpha_z: DenseMatrix::zeros(h0.rows(), h0.cols()),
            x,
            y: w0.clone(),
            z: h0.clone(),
            w: w0.clone(),
            h: h0.clone(),
            rho,
        })
    }

    /// `D(V || max(W, eps) max(H, eps))`.
    pub fn objective(&self, v: &DenseMatrix) -> Result<f64> {
        let w = self.w.map(|x| x.max(ADMM_EVAL_EPS));
        let h = self.h.map(|x| x.max(ADMM_EVAL_EPS));
        kl_divergence(v, &w.matmul(&h)?)
    }

    /// Frobenius norms of `X - YZ`, `Y - W`, `Z - H`.
    pub fn residuals(&self) -> Result<[f64; 3]> {
        let yz = self.y.matmul(&self.z)?;
        Ok([
            self.x.sub(&yz)?.frobenius_norm(),
            self.y.sub(&self.w)?.frobenius_norm(),
            self.z.sub(&self.h)?.frobenius_norm(),
        ])
    }
}

/// Solves `(G + I) S = B` for symmetric positive semidefinite `G`.
fn spd_solve(gram: &DenseMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix> {
    let r = gram.rows();
    let mut g = DMatrix::from_row_slice(r, r, gram.as_slice());
    for i in 0..r {
        g[(i, i)] += 1.0;
    }
    let chol = g
        .cholesky()
        .ok_or_else(|| NmfError::LinearSolve("Gram-plus-identity matrix is not positive definite".into()))?;
    let b = DMatrix::from_row_slice(rhs.rows(), rhs.cols(), rhs.as_slice());
    let s = chol.solve(&b);
    Ok(DenseMatrix::from_fn(rhs.rows(), rhs.cols(), |i, j| s[(i, j)]))
}

/// Root of `rho X^2 + (1 + alpha_X - rho P) X - V = 0` taken elementwise,
/// with `P = YZ`.
pub fn admm_x_update(v: &DenseMatrix, yz: &DenseMatrix, alpha_x: &DenseMatrix, rho: f64) -> Result<DenseMatrix> {
    let b = yz.zip_map(alpha_x, |p, ax| rho * p - ax - 1.0)?;
    b.zip_map(v, |b, vi| {
        let root = (b * b + 4.0 * rho * vi).sqrt();
        if b < 0.0 {
            2.0 * vi / (root - b)
        } else {
            (b + root) / (2.0 * rho)
        }
    })
}

/// One ADMM sweep in the order `Y, Z, X, W, H`, then the multipliers.
pub fn admm_step(v: &DenseMatrix, state: AdmmState) -> Result<AdmmState> {
    admm_step_with(v, state, None)
}

/// As [`admm_step`], optionally keeping one factor frozen (`Y = W` or
/// `Z = H` held at their current values) for the convex ND problems.
pub fn admm_step_with(v: &DenseMatrix, mut s: AdmmState, frozen: Option<Side>) -> Result<AdmmState> {
    let rho = s.rho;
    if frozen != Some(Side::FixW) {
        // Y^T <- (Z Z^T + I)^{-1} (Z (X + alpha_X / rho)^T + (W - alpha_Y / rho)^T)
        let target = s.x.zip_map(&s.alpha_x, |x, a| x + a / rho)?;
        let anchor = s.w.zip_map(&s.alpha_y, |w, a| w - a / rho)?;
        let rhs = s.z.matmul_tr(&target)?.add(&anchor.transpose())?;
        s.y = spd_solve(&s.z.matmul_tr(&s.z)?, &rhs)?.transpose();
    }
    if frozen != Some(Side::FixH) {
        // Z <- (Y^T Y + I)^{-1} (Y^T (X + alpha_X / rho) + H - alpha_Z / rho)
        let target = s.x.zip_map(&s.alpha_x, |x, a| x + a / rho)?;
        let anchor = s.h.zip_map(&s.alpha_z, |h, a| h - a / rho)?;
        let rhs = s.y.tr_matmul(&target)?.add(&anchor)?;
        s.z = spd_solve(&s.y.tr_matmul(&s.y)?, &rhs)?;
    }
    let yz = s.y.matmul(&s.z)?;
    s.x = admm_x_update(v, &yz, &s.alpha_x, rho)?;
    if frozen != Some(Side::FixW) {
        s.w = s.y.zip_map(&s.alpha_y, |y, a| (y + a / rho).max(0.0))?;
    }
    if frozen != Some(Side::FixH) {
        s.h = s.z.zip_map(&s.alpha_z, |z, a| (z + a / rho).max(0.0))?;
    }

    let dx = s.x.sub(&yz)?;
    s.alpha_x = s.alpha_x.zip_map(&dx, |a, d| a + rho * d)?;
    if frozen != Some(Side::FixW) {
        let dy = s.y.sub(&s.w)?;
        s.alpha_y = s.alpha_y.zip_map(&dy, |a, d| a + rho * d)?;
    }
    if frozen != Some(Side::FixH) {
        let dz = s.z.sub(&s.h)?;
        s.alpha_z = s.alpha_z.zip_map(&dz, |a, d| a + rho * d)?;
    }

    if !s.x.is_finite() || !s.w.is_finite() || !s.h.is_finite() {
        return Err(NmfError::NonFinite {
            iteration: 0,
            stage: "admm",
        });
    }
    Ok(s)
}
