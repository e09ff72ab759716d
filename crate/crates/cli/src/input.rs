//! Loading files and parsing the small spec strings used by the flags.

use std::path::Path;

use awd_core::hedging::{AffinePiece, Claim, LossSpec, UtilitySpec};
use awd_core::scenario::{DiscreteDistribution, ScenarioTree};

use crate::error::{CliError, CliResult};

pub fn tree(path: &Path) -> CliResult<ScenarioTree> {
    ScenarioTree::load(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// A distribution file, or the terminal law of a tree file.
pub fn distribution(path: &Path) -> CliResult<DiscreteDistribution> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if value.get("atoms").is_some() {
        return serde_json::from_value(value).map_err(|e| CliError::Input(format!("{}: {e}", path.display())));
    }
    let t = ScenarioTree::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    terminal_law(&t)
}

pub fn terminal_law(t: &ScenarioTree) -> CliResult<DiscreteDistribution> {
    let law = t.to_path_law()?;
    Ok(DiscreteDistribution::new(
        law.paths.iter().map(|p| (p.values[p.values.len() - 1], p.prob)),
    )?)
}

fn number(s: &str, what: &str) -> CliResult<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| CliError::Input(format!("{what}: '{s}' is not a number")))
}

pub fn claim(spec: &str) -> CliResult<Claim> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "call" => Ok(Claim::call(number(arg, "call strike")?)),
        "const" => Ok(Claim::constant(number(arg, "constant claim")?)),
        "zero" => Ok(Claim::zero()),
        "max-affine" => {
            let text =
                std::fs::read_to_string(arg).map_err(|e| CliError::Input(format!("claim file {arg}: {e}")))?;
            let pieces: Vec<AffinePiece> = serde_json::from_str(&text)?;
            Ok(Claim::max_affine(pieces)?)
        }
        _ => Err(CliError::Input(format!(
            "unknown claim '{spec}', expected call:K, const:C, zero or max-affine:FILE"
        ))),
    }
}

pub fn loss(spec: &str) -> CliResult<LossSpec> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let loss = match kind {
        "positive" => LossSpec::positive_part(),
        "exp" => LossSpec::Exponential {
            rate: number(arg, "exponential rate")?,
        },
        "pl" => {
            let pieces = arg
                .split(',')
                .map(|piece| {
                    let (s, i) = piece
                        .split_once(':')
                        .ok_or_else(|| CliError::Input(format!("loss piece '{piece}' must be SLOPE:INTERCEPT")))?;
                    Ok((number(s, "slope")?, number(i, "intercept")?))
                })
                .collect::<CliResult<Vec<_>>>()?;
            LossSpec::PiecewiseLinear(pieces)
        }
        _ => {
            return Err(CliError::Input(format!(
                "unknown loss '{spec}', expected positive, exp:RATE or pl:S:I,..."
            )))
        }
    };
    loss.validate()?;
    Ok(loss)
}

pub fn utility(spec: &str) -> CliResult<UtilitySpec> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let u = match kind {
        "capped" => UtilitySpec::CappedLinear {
            cap: number(arg, "utility cap")?,
        },
        "explin" => UtilitySpec::ExponentialLinear {
            risk_aversion: number(arg, "risk aversion")?,
        },
        "exp" => UtilitySpec::Exponential {
            risk_aversion: number(arg, "risk aversion")?,
        },
        _ => {
            return Err(CliError::Input(format!(
                "unknown utility '{spec}', expected capped:CAP, explin:A or exp:A"
            )))
        }
    };
    u.validate()?;
    Ok(u)
}
