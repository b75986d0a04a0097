//! Seeded generators for initializations and synthetic data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{NmfError, Result};
use crate::matrix::DenseMatrix;

/// Offset added to |N(0,1)| draws when none is given.
pub const DEFAULT_INIT_OFFSET: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct RandomSeed(pub u64);

impl RandomSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for RandomSeed {
    fn from(s: u64) -> Self {
        RandomSeed(s)
    }
}

fn folded_normal(rows: usize, cols: usize, offset: f64, rng: &mut impl Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z.abs() + offset
    })
}

/// Strictly positive `n x r` and `r x m` factors with entries `|N(0,1)| + offset`.
///
/// `W0` is drawn first, row by row, then `H0` from the same stream.
pub fn random_init(
    n: usize,
    m: usize,
    r: usize,
    offset: f64,
    seed: RandomSeed,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if n == 0 || m == 0 || r == 0 {
        return Err(NmfError::InvalidArgument(format!(
            "dimensions must be positive, got n={n} m={m} r={r}"
        )));
    }
    if !(offset > 0.0) || !offset.is_finite() {
        return Err(NmfError::InvalidArgument(format!(
            "init offset must be positive, got {offset}"
        )));
    }
    let mut rng = seed.rng();
    let w = folded_normal(n, r, offset, &mut rng);
    let h = folded_normal(r, m, offset, &mut rng);
    Ok((w, h))
}

/// `rows x cols` block of `|N(0,1)| + offset` draws.
pub fn positive_block(rows: usize, cols: usize, offset: f64, seed: RandomSeed) -> DenseMatrix {
    folded_normal(rows, cols, offset, &mut seed.rng())
}

/// `n x m` matrix with i.i.d. entries uniform on `[lo, hi)`.
pub fn synth_matrix(n: usize, m: usize, lo: f64, hi: f64, seed: RandomSeed) -> Result<DenseMatrix> {
    if n == 0 || m == 0 {
        return Err(NmfError::InvalidArgument(format!(
            "dimensions must be positive, got {n}x{m}"
        )));
    }
    if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
        return Err(NmfError::InvalidArgument(format!(
            "need 0 <= lo < hi, got lo={lo} hi={hi}"
        )));
    }
    let dist = Uniform::new(lo, hi).map_err(|e| NmfError::InvalidArgument(e.to_string()))?;
    let mut rng = seed.rng();
    Ok(DenseMatrix::from_fn(n, m, |_, _| dist.sample(&mut rng)))
}
