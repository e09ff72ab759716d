//! Hedging, risk measures and the stability verifiers.

pub mod claim;
pub mod hedge;
pub mod project;
pub mod risk;
pub mod utility;
pub mod verify;

pub use claim::{AffinePiece, Claim, PrefixStrategy, Strategy};
pub use hedge::{expected_loss_hedge, optimal_avar_hedge, optimal_oce_hedge, wealth_distribution, AvarHedge, OceHedge, LossHedge, LossMethod};
pub use risk::{avar, oce_risk, LossSpec, UtilitySpec};
pub use utility::{indifference_price, utility_gradient, utility_maximize, utility_maximize_with, utility_objective, AscentOptions, IndifferencePrice, UtilityMax};
pub use project::{conditional_gain_defect, project_strategy};
pub use verify::{
    verify_avar_fixed_strategy, verify_avar_lipschitz, verify_contraction, verify_contraction_lipschitz,
    verify_oce_stability, verify_shi, verify_whi, BoundKind, BoundReport, TransferReport, SLACK_TOL,
};
