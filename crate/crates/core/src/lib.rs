//! Global minimization by sequential steepest descent.
//!
//! A run alternates two phases. A local descent reaches a minimum `x*`.
//! Then the level set `{x : f(x) = f(x*)}` is sampled on a grid, the
//! crossings are refined by bisection, and the crossing with the steepest
//! gradient becomes the next start point. Every accepted restart ends
//! strictly lower than the one before it. The run stops when the level set
//! holds no usable restart point.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod descent;
pub mod error;
pub mod functions;
pub mod levelset;
pub mod objective;
pub mod solver;

pub use bench::{
    builtin_cases, find_case, grid_oracle, multistart_baseline, run_benchmark, BenchReport,
    BenchmarkCase, Provenance,
};
pub use descent::{descend, DescentParams, LineSearchMode, LineSearchParams, LocalMinimum};
pub use error::{Error, Result};
pub use functions::{builtin_objectives, lookup};
pub use levelset::{compute_level_set, FilterMode, LevelCandidate, LevelSet, LevelSetConfig};
pub use objective::{
    clamp_to_box, BoxDomain, EvalCounter, EvalCounts, GradientMethod, GradientMode, ObjectiveSpec,
    Vector,
};
pub use solver::{
    random_init, solve, solve_with, NoObserver, SgdConfig, SolveObserver, SolveReport,
    SolveTermination,
};
