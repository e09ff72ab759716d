//! Classical and weak optimal transport between finite laws, and the LP
//! solver shared by every exact computation in the crate.

pub mod lp;
pub mod ot;
pub mod weak;

pub use lp::{solve_lp, solve_lp_with, Backend, ConstraintOp, LinearProgram, LpSolution, LpStatus};
pub use ot::{
    optimal_transport, quantile_coupling, sup_distance, wasserstein, wasserstein_lp, wasserstein_paths, Coupling,
    Transport,
};
pub use weak::{weak_ot, weak_ot_exhaustive, weak_ot_with, FrankWolfeOptions, WeakMethod, WeakTransport};
