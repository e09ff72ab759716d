use awd_core::decompose::ConstantsLedger;
use awd_core::hedging::{expected_loss_hedge, indifference_price, optimal_avar_hedge, utility_maximize};
use serde_json::json;

use crate::args::HedgeCommand;
use crate::commands::strategy_json;
use crate::error::CliResult;
use crate::input;
use crate::output::Report;

pub fn run(cmd: &HedgeCommand) -> CliResult<Report> {
    let ledger = ConstantsLedger::default();
    match cmd {
        HedgeCommand::Avar { claim, alpha, tree } => {
            let t = input::tree(tree)?;
            let h = optimal_avar_hedge(&t, &input::claim(&claim.claim)?, claim.k, *alpha)?;
            let mut json = serde_json::to_value(&h)?;
            json["alpha"] = json!(alpha);
            json["k"] = json!(claim.k);
            json["strategy"] = strategy_json(&h.strategy, &t)?;
            json["constants"] = serde_json::to_value(ledger)?;
            Report::scalars(json)
        }
        HedgeCommand::Loss { claim, m, loss, tree } => {
            let t = input::tree(tree)?;
            let h = expected_loss_hedge(&t, &input::claim(&claim.claim)?, claim.k, *m, &input::loss(loss)?)?;
            let mut json = serde_json::to_value(&h)?;
            json["m"] = json!(m);
            json["k"] = json!(claim.k);
            json["strategy"] = strategy_json(&h.strategy, &t)?;
            Report::scalars(json)
        }
        HedgeCommand::Utility { claim, utility, tree } => {
            let t = input::tree(tree)?;
            let u = utility_maximize(&t, &input::claim(&claim.claim)?, claim.k, &input::utility(utility)?)?;
            let mut json = serde_json::to_value(&u)?;
            json["k"] = json!(claim.k);
            json["strategy"] = strategy_json(&u.strategy, &t)?;
            Report::scalars(json)
        }
        HedgeCommand::Indiff { claim, utility, tol, tree } => {
            let t = input::tree(tree)?;
            let p = indifference_price(&t, &input::claim(&claim.claim)?, claim.k, &input::utility(utility)?, *tol)?;
            let mut json = serde_json::to_value(&p)?;
            json["k"] = json!(claim.k);
            json["tol"] = json!(tol);
            Report::scalars(json)
        }
    }
}
