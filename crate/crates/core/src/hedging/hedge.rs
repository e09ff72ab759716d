//! Bounded hedging problems solved as linear programs.

use serde::Serialize;

use super::claim::{Claim, Strategy};
use super::risk::{bracket_minimiser, golden_section, LossSpec};
use crate::bicausal::DEFAULT_VAR_BUDGET;
use crate::error::{Error, Result};
use crate::scenario::{DiscreteDistribution, NodeId, ScenarioTree};
use crate::transport::{solve_lp, ConstraintOp, LinearProgram};

/// For every leaf (depth-first order), the `(node, Δx)` pairs of the edges
/// on its root path.
pub(crate) fn leaf_exposures(tree: &ScenarioTree) -> Vec<Vec<(NodeId, f64)>> {
    tree.leaves()
        .into_iter()
        .map(|l| {
            tree.ancestry(l)
                .windows(2)
                .map(|w| (w[0], tree.value(w[1]) - tree.value(w[0])))
                .collect()
        })
        .collect()
}

pub(crate) fn leaf_probabilities(tree: &ScenarioTree) -> Vec<f64> {
    let prob = tree.node_probabilities();
    tree.leaves().into_iter().map(|l| prob[l]).collect()
}

pub(crate) fn inner_nodes(tree: &ScenarioTree) -> Vec<NodeId> {
    (0..tree.len()).filter(|&u| !tree.is_leaf(u)).collect()
}

fn check_bound(k: f64) -> Result<()> {
    if k >= 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("strategy bound k = {k} must be finite and >= 0")))
    }
}

fn check_budget(vars: usize) -> Result<()> {
    if vars > DEFAULT_VAR_BUDGET {
        return Err(Error::SizeExceeded {
            what: "hedging LP variables",
            size: vars,
            budget: DEFAULT_VAR_BUDGET,
        });
    }
    Ok(())
}

/// Law of `C − m − (H·X)_T`; without a claim, of `m + (H·X)_T`.
pub fn wealth_distribution(
    tree: &ScenarioTree,
    strategy: &Strategy,
    claim: Option<&Claim>,
    m: f64,
) -> Result<DiscreteDistribution> {
    strategy.validate(tree)?;
    let gains = strategy.gains(tree);
    let prob = leaf_probabilities(tree);
    let values: Vec<f64> = match claim {
        Some(c) => c.payoffs(tree).iter().zip(&gains).map(|(c, g)| c - m - g).collect(),
        None => gains.iter().map(|g| m + g).collect(),
    };
    DiscreteDistribution::new(values.into_iter().zip(prob))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvarHedge {
    pub value: f64,
    #[serde(skip)]
    pub strategy: Strategy,
    /// Minimising level `m*` of the Rockafellar–Uryasev representation.
    pub m: f64,
}

/// `inf_{|H| ≤ k} AVaR_α(C − (H·X)_T)` by a single LP over `(m, h, s)`.
pub fn optimal_avar_hedge(tree: &ScenarioTree, claim: &Claim, k: f64, alpha: f64) -> Result<AvarHedge> {
    check_bound(k)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    tree.ensure_valid()?;
    let inner = inner_nodes(tree);
    let exposures = leaf_exposures(tree);
    let prob = leaf_probabilities(tree);
    let payoffs = claim.payoffs(tree);
    check_budget(1 + inner.len() + exposures.len())?;

    let mut lp = LinearProgram::new();
    let m = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
    let mut hvar = vec![usize::MAX; tree.len()];
    for &u in &inner {
        hvar[u] = lp.add_var(0.0, -k, k);
    }
    for (leaf, edges) in exposures.iter().enumerate() {
        let s = lp.add_var(prob[leaf] / alpha, 0.0, f64::INFINITY);
        let mut row = vec![(s, 1.0), (m, 1.0)];
        row.extend(edges.iter().map(|&(u, dx)| (hvar[u], dx)));
        lp.add_constraint(row, ConstraintOp::Ge, payoffs[leaf]);
    }
    let sol = solve_lp(&lp)?.require_optimal("AVaR hedge")?;
    let mut strategy = Strategy::zeros(tree, k);
    for &u in &inner {
        strategy.positions[u] = sol.x[hvar[u]].clamp(-k, k);
    }
    Ok(AvarHedge {
        value: sol.value,
        strategy,
        m: sol.x[m],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMethod {
    Lp,
    CuttingPlane,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossHedge {
    pub value: f64,
    #[serde(skip)]
    pub strategy: Strategy,
    pub method: LossMethod,
    pub iterations: usize,
    /// Upper minus lower bound at exit.
    pub gap: f64,
}

pub const LOSS_GAP_TOL: f64 = 1e-6;
const MAX_CUTS: usize = 5_000;

/// `inf_{|H| ≤ k} E[ℓ(C − m − (H·X)_T)]`.
///
/// Piecewise-linear losses give an LP. Smooth losses use Kelley's cutting
/// plane method until the duality gap drops below [`LOSS_GAP_TOL`].
pub fn expected_loss_hedge(tree: &ScenarioTree, claim: &Claim, k: f64, m: f64, loss: &LossSpec) -> Result<LossHedge> {
    check_bound(k)?;
    loss.validate()?;
    tree.ensure_valid()?;
    match loss {
        LossSpec::PiecewiseLinear(pieces) => loss_lp(tree, claim, k, m, pieces),
        _ => loss_cutting_plane(tree, claim, k, m, loss),
    }
}

fn loss_lp(tree: &ScenarioTree, claim: &Claim, k: f64, m: f64, pieces: &[(f64, f64)]) -> Result<LossHedge> {
    let inner = inner_nodes(tree);
    let exposures = leaf_exposures(tree);
    let prob = leaf_probabilities(tree);
    let payoffs = claim.payoffs(tree);
    check_budget(inner.len() + exposures.len())?;

    let mut lp = LinearProgram::new();
    let mut hvar = vec![usize::MAX; tree.len()];
    for &u in &inner {
        hvar[u] = lp.add_var(0.0, -k, k);
    }
    for (leaf, edges) in exposures.iter().enumerate() {
        let s = lp.add_var(prob[leaf], f64::NEG_INFINITY, f64::INFINITY);
        // s ≥ a (C − m − Σ h Δx) + b
        for &(a, b) in pieces {
            let mut row = vec![(s, 1.0)];
            row.extend(edges.iter().map(|&(u, dx)| (hvar[u], a * dx)));
            lp.add_constraint(row, ConstraintOp::Ge, a * (payoffs[leaf] - m) + b);
        }
    }
    let sol = solve_lp(&lp)?.require_optimal("expected-loss hedge")?;
    let mut strategy = Strategy::zeros(tree, k);
    for &u in &inner {
        strategy.positions[u] = sol.x[hvar[u]].clamp(-k, k);
    }
    Ok(LossHedge {
        value: sol.value,
        strategy,
        method: LossMethod::Lp,
        iterations: 1,
        gap: 0.0,
    })
}

/// Value and subgradient of `h ↦ E[ℓ(C − m − (H·X)_T)]` in the inner-node
/// coordinates.
struct LossObjective<'a> {
    exposures: Vec<Vec<(usize, f64)>>,
    prob: Vec<f64>,
    payoffs: Vec<f64>,
    m: f64,
    loss: &'a LossSpec,
    dim: usize,
}

impl LossObjective<'_> {
    fn eval(&self, h: &[f64]) -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let mut grad = vec![0.0; self.dim];
        for (leaf, edges) in self.exposures.iter().enumerate() {
            let gain: f64 = edges.iter().map(|&(i, dx)| h[i] * dx).sum();
            let z = self.payoffs[leaf] - self.m - gain;
            value += self.prob[leaf] * self.loss.eval(z);
            let d = self.prob[leaf] * self.loss.derivative(z);
            for &(i, dx) in edges {
                grad[i] -= d * dx;
            }
        }
        (value, grad)
    }
}

fn loss_cutting_plane(tree: &ScenarioTree, claim: &Claim, k: f64, m: f64, loss: &LossSpec) -> Result<LossHedge> {
    let inner = inner_nodes(tree);
    let mut coord = vec![usize::MAX; tree.len()];
    for (i, &u) in inner.iter().enumerate() {
        coord[u] = i;
    }
    let obj = LossObjective {
        exposures: leaf_exposures(tree)
            .into_iter()
            .map(|e| e.into_iter().map(|(u, dx)| (coord[u], dx)).collect())
            .collect(),
        prob: leaf_probabilities(tree),
        payoffs: claim.payoffs(tree),
        m,
        loss,
        dim: inner.len(),
    };
    let to_strategy = |h: &[f64]| {
        let mut s = Strategy::zeros(tree, k);
        for (i, &u) in inner.iter().enumerate() {
            s.positions[u] = h[i].clamp(-k, k);
        }
        s
    };
    let mut h = vec![0.0; obj.dim];
    let (f0, _) = obj.eval(&h);
    if obj.dim == 0 || k == 0.0 {
        return Ok(LossHedge {
            value: f0,
            strategy: to_strategy(&h),
            method: LossMethod::CuttingPlane,
            iterations: 0,
            gap: 0.0,
        });
    }
    let mut lp = LinearProgram::new();
    let vars: Vec<usize> = (0..obj.dim).map(|_| lp.add_var(0.0, -k, k)).collect();
    // ℓ ≥ 0 keeps the epigraph variable bounded below.
    let t = lp.add_var(1.0, 0.0, f64::INFINITY);
    let mut best = (f0, h.clone());
    let mut lower = 0.0;
    for iter in 1..=MAX_CUTS {
        let (f, g) = obj.eval(&h);
        if f < best.0 {
            best = (f, h.clone());
        }
        // t ≥ f + g·(x − h)
        let mut row = vec![(t, 1.0)];
        row.extend(vars.iter().zip(&g).map(|(&v, &gi)| (v, -gi)));
        let rhs = f - g.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
        lp.add_constraint(row, ConstraintOp::Ge, rhs);
        let sol = solve_lp(&lp)?.require_optimal("cutting-plane master")?;
        lower = f64::max(lower, sol.value);
        if best.0 - lower < LOSS_GAP_TOL {
            return Ok(LossHedge {
                value: best.0,
                strategy: to_strategy(&best.1),
                method: LossMethod::CuttingPlane,
                iterations: iter,
                gap: best.0 - lower,
            });
        }
        h = vars.iter().map(|&v| sol.x[v].clamp(-k, k)).collect();
    }
    Err(Error::Solver(format!(
        "cutting plane stopped after {MAX_CUTS} cuts with gap {}",
        best.0 - lower
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OceHedge {
    pub value: f64,
    #[serde(skip)]
    pub strategy: Strategy,
    pub m: f64,
}

/// `inf_{|H| ≤ k} ρ(C − (H·X)_T)` for the OCE `ρ` of `loss`.
///
/// Joint LP over `(m, h, s)` for piecewise-linear losses. Otherwise the
/// partial minimum over `h` is convex in `m` and is searched by golden
/// section with [`expected_loss_hedge`] inside.
pub fn optimal_oce_hedge(tree: &ScenarioTree, claim: &Claim, k: f64, loss: &LossSpec) -> Result<OceHedge> {
    check_bound(k)?;
    loss.validate()?;
    loss.check_oce_finite()?;
    tree.ensure_valid()?;
    if let LossSpec::PiecewiseLinear(pieces) = loss {
        let inner = inner_nodes(tree);
        let exposures = leaf_exposures(tree);
        let prob = leaf_probabilities(tree);
        let payoffs = claim.payoffs(tree);
        check_budget(1 + inner.len() + exposures.len())?;
        let mut lp = LinearProgram::new();
        let m = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        let mut hvar = vec![usize::MAX; tree.len()];
        for &u in &inner {
            hvar[u] = lp.add_var(0.0, -k, k);
        }
        for (leaf, edges) in exposures.iter().enumerate() {
            let s = lp.add_var(prob[leaf], f64::NEG_INFINITY, f64::INFINITY);
            for &(a, b) in pieces {
                let mut row = vec![(s, 1.0), (m, a)];
                row.extend(edges.iter().map(|&(u, dx)| (hvar[u], a * dx)));
                lp.add_constraint(row, ConstraintOp::Ge, a * payoffs[leaf] + b);
            }
        }
        let sol = solve_lp(&lp)?.require_optimal("OCE hedge")?;
        let mut strategy = Strategy::zeros(tree, k);
        for &u in &inner {
            strategy.positions[u] = sol.x[hvar[u]].clamp(-k, k);
        }
        return Ok(OceHedge {
            value: sol.value,
            strategy,
            m: sol.x[m],
        });
    }
    let inner_solve = |m: f64| expected_loss_hedge(tree, claim, k, m, loss);
    // Envelope slope 1 − E[ℓ'(Z* − m)] at the inner optimiser.
    let slope = |m: f64| -> Result<f64> {
        let r = inner_solve(m)?;
        let z = wealth_distribution(tree, &r.strategy, Some(claim), m)?;
        Ok(1.0 - z.expect(|x| loss.derivative(x)))
    };
    let payoffs = claim.payoffs(tree);
    let reach: f64 = leaf_exposures(tree)
        .iter()
        .map(|e| e.iter().map(|(_, dx)| dx.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let lo = payoffs.iter().copied().fold(f64::INFINITY, f64::min) - k * reach;
    let hi = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + k * reach;
    let (lo, hi) = bracket_minimiser(slope, lo - 1.0, hi + 1.0)?;
    let phi = |m: f64| inner_solve(m).map(|r| m + r.value).unwrap_or(f64::INFINITY);
    let m = golden_section(phi, lo, hi, 1e-7);
    let r = inner_solve(m)?;
    Ok(OceHedge {
        value: m + r.value,
        strategy: r.strategy,
        m,
    })
}
