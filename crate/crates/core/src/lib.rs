//! Non-negative matrix factorization under the generalized Kullback-Leibler
//! divergence.
//!
//! The core solver is a first-order primal-dual (Chambolle-Pock) iteration
//! for the convex decomposition problem with one factor fixed. It uses
//! closed-form proximal steps, automatic step sizes and a duality-gap
//! certificate, and it alternates over both factors for full NMF.
//! Multiplicative updates and ADMM are included as baselines, plus a small
//! harness for running and recording comparisons.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod fpa;
pub mod harness;
pub mod kl;
pub mod matrix;
pub mod prox;
pub mod random;
pub mod spectral;

pub use error::{NmfError, Result};
pub use matrix::{DenseMatrix, Role};

/// Environment variable holding the worker count for parallel kernels.
pub const THREADS_ENV: &str = "KLNMF_THREADS";

/// Sizes the global thread pool from [`THREADS_ENV`] if it is set.
///
/// Results do not depend on the thread count. Call this before any solver
/// work; once the pool exists this returns an error.
pub fn init_threads_from_env() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| NmfError::Config(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    if n == 0 {
        return Err(NmfError::Config(format!("{THREADS_ENV} must be at least 1")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| NmfError::Config(format!("cannot configure thread pool: {e}")))?;
    Ok(Some(n))
}
