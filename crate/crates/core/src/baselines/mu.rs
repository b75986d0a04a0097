//! Multiplicative updates for KL-NMF.

use crate::error::{NmfError, Result};
use crate::matrix::DenseMatrix;

/// Floor applied to denominators and to entries of `WH`.
pub const MU_EPS: f64 = 1e-16;

fn ratio(v: &DenseMatrix, wh: &DenseMatrix) -> Result<DenseMatrix> {
    v.zip_map(wh, |vi, p| vi / p.max(MU_EPS))
}

/// `W_ia <- W_ia (sum_mu H_amu V_imu / (WH)_imu) / sum_nu H_anu`.
pub fn mu_update_w(v: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix) -> Result<DenseMatrix> {
    let r = ratio(v, &w.matmul(h)?)?;
    let num = r.matmul_tr(h)?;
    let den = h.row_sums();
    let k = w.cols();
    let mut out = w.clone();
    for (idx, (x, g)) in out.as_mut_slice().iter_mut().zip(num.as_slice()).enumerate() {
        *x *= g / den[idx % k].max(MU_EPS);
    }
    Ok(out)
}

/// `H_amu <- H_amu (sum_i W_ia V_imu / (WH)_imu) / sum_k W_ka`.
pub fn mu_update_h(v: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix) -> Result<DenseMatrix> {
    let r = ratio(v, &w.matmul(h)?)?;
    let num = w.tr_matmul(&r)?;
    let den = w.col_sums();
    let m = h.cols();
    let mut out = h.clone();
    for (idx, (x, g)) in out.as_mut_slice().iter_mut().zip(num.as_slice()).enumerate() {
        *x *= g / den[idx / m].max(MU_EPS);
    }
    Ok(out)
}

/// One multiplicative step: `W` first, then `H` using the updated `W`.
pub fn mu_step(v: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let w2 = mu_update_w(v, w, h)?;
    let h2 = mu_update_h(v, &w2, h)?;
    if !w2.is_finite() || !h2.is_finite() {
        return Err(NmfError::NonFinite {
            iteration: 0,
            stage: "multiplicative update",
        });
    }
    Ok((w2, h2))
}
