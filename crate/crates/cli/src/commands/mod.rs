pub mod dist;
pub mod gen;
pub mod hedge;
pub mod verify;

use awd_core::hedging::Strategy;
use awd_core::scenario::ScenarioTree;
use serde_json::Value;

use crate::error::CliResult;

/// A strategy in its file form, for embedding in reports.
pub(crate) fn strategy_json(s: &Strategy, tree: &ScenarioTree) -> CliResult<Value> {
    Ok(serde_json::from_str(&s.to_json(tree)?)?)
}
