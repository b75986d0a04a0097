use crate::error::{NmfError, Result};
use crate::matrix::DenseMatrix;
use crate::random::{positive_block, RandomSeed, DEFAULT_INIT_OFFSET};

/// Grows a rank-`r` factorization to rank `r2`.
///
/// `W' = [W, c 1]` and `H' = [H; nu]` where `nu` holds `|N(0,1)| + offset`
/// draws scaled by [`component_scale`], so a new row carries about as much
/// mass as an existing component once `W` is column-normalized. With `c = 0`
/// the product, and hence the objective, is unchanged.
pub fn extend_rank(
    w: &DenseMatrix,
    h: &DenseMatrix,
    r2: usize,
    c: f64,
    seed: RandomSeed,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let r = w.cols();
    if h.rows() != r {
        return Err(NmfError::InvalidArgument(format!(
            "factor ranks disagree: W has {r} columns, H has {} rows",
            h.rows()
        )));
    }
    if r2 <= r {
        return Err(NmfError::InvalidArgument(format!(
            "new rank {r2} must exceed current rank {r}"
        )));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(NmfError::InvalidArgument(format!("padding constant must be >= 0, got {c}")));
    }
    let extra = r2 - r;
    let w2 = w.hstack(&DenseMatrix::filled(w.rows(), extra, c))?;
    let scale = component_scale(w, h);
    let nu = positive_block(extra, h.cols(), DEFAULT_INIT_OFFSET, seed).scale(scale);
    let h2 = h.vstack(&nu)?;
    Ok((w2, h2))
}

/// Mean mass `(1^T W_a)(H_a 1)` of the current components per column of
/// `H`; 1 when every component has vanished.
///
/// The additive primal-dual steps move a component at a rate set by the
/// size of its partner factor, so unscaled padding rows next to rows holding
/// the full mass of `V` barely grow.
pub fn component_scale(w: &DenseMatrix, h: &DenseMatrix) -> f64 {
    let mass: f64 = w
        .col_sums()
        .iter()
        .zip(h.row_sums())
        .map(|(a, b)| a * b)
        .sum();
    let s = mass / (w.cols() * h.cols()) as f64;
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}
