//! Reference solvers used for comparison.

mod admm;
mod driver;
mod mu;

pub use admm::{admm_step, admm_step_with, admm_x_update, AdmmState, ADMM_EVAL_EPS};
pub use driver::{nd_driver, solver_driver, Method, SolveOutcome};
pub use mu::{mu_step, mu_update_h, mu_update_w, MU_EPS};
