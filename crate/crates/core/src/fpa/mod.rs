//! First-order primal-dual solvers: the convex ND iteration, its automatic
//! step sizes, alternating NMF and rank growth.

mod nd;
mod nmf;
mod steps;
mod trace;
mod warm;

pub use nd::{fpa_iteration, fpa_nd, nd_batch, nd_problem, FpaState, NdOptions, NdOutcome, PrimalConstraint, Side};
pub use nmf::{nmf_fpa, normalize_factors, NmfOutcome};
pub(crate) use nmf::check_factorization;
pub use steps::{heuristic_step_sizes, StepSizes};
pub use trace::{ColumnRepair, ConvergenceTrace, FactorKind, SolveConfig, TraceRecord};
pub(crate) use trace::SolverClock;
pub use warm::{component_scale, extend_rank};
