//! Claims (path payoffs) and bounded predictable strategies on a tree.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{NodeId, ScenarioTree};
use crate::transport::ot::sup_distance;

/// Slack allowed on `|h| ≤ k`.
pub const BOUND_TOL: f64 = 1e-12;

pub type PayoffFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A payoff on paths `(x_0, …, x_T)` with a declared Lipschitz constant for
/// the maximum norm.
#[derive(Clone)]
pub struct Claim {
    name: String,
    lipschitz: f64,
    payoff: PayoffFn,
}

impl fmt::Debug for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Claim")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

/// `intercept + Σ_t coeffs[t] x_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub intercept: f64,
    pub coeffs: Vec<f64>,
}

impl AffinePiece {
    pub fn eval(&self, path: &[f64]) -> f64 {
        self.intercept + self.coeffs.iter().zip(path).map(|(a, x)| a * x).sum::<f64>()
    }
}

impl Claim {
    pub fn new(name: impl Into<String>, lipschitz: f64, payoff: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Claim {
            name: name.into(),
            lipschitz,
            payoff: Arc::new(payoff),
        }
    }

    pub fn zero() -> Self {
        Claim::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        Claim::new(format!("constant({c})"), 0.0, move |_| c)
    }

    /// `(x_T − strike)^+`.
    pub fn call(strike: f64) -> Self {
        Claim::new(format!("call({strike})"), 1.0, move |x: &[f64]| {
            (x[x.len() - 1] - strike).max(0.0)
        })
    }

    /// Pointwise maximum of affine path functionals; `L = max_j Σ_t |a_jt|`.
    pub fn max_affine(pieces: Vec<AffinePiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidParameter("max of zero affine pieces".into()));
        }
        let lipschitz = pieces
            .iter()
            .map(|p| p.coeffs.iter().map(|a| a.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(Claim::new("max-affine", lipschitz, move |x: &[f64]| {
            pieces.iter().map(|p| p.eval(x)).fold(f64::NEG_INFINITY, f64::max)
        }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn eval(&self, path: &[f64]) -> f64 {
        (self.payoff)(path)
    }

    /// `C + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let f = self.payoff.clone();
        Claim {
            name: format!("{}+{c}", self.name),
            lipschitz: self.lipschitz,
            payoff: Arc::new(move |x: &[f64]| f(x) + c),
        }
    }

    /// Payoff per leaf, leaves in depth-first order.
    pub fn payoffs(&self, tree: &ScenarioTree) -> Vec<f64> {
        tree.leaves()
            .into_iter()
            .map(|l| self.eval(&tree.path_values(l)))
            .collect()
    }

    /// Largest ratio `|C(ω) − C(ω')| / ‖ω − ω'‖_∞` over all leaf pairs drawn
    /// from the given trees.
    pub fn empirical_lipschitz(&self, trees: &[&ScenarioTree]) -> f64 {
        let paths: Vec<Vec<f64>> = trees
            .iter()
            .flat_map(|t| t.leaves().into_iter().map(|l| t.path_values(l)).collect::<Vec<_>>())
            .collect();
        let vals: Vec<f64> = paths.iter().map(|p| self.eval(p)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..paths.len() {
            for j in i + 1..paths.len() {
                let d = sup_distance(&paths[i], &paths[j]);
                let dv = (vals[i] - vals[j]).abs();
                if d > 0.0 {
                    worst = worst.max(dv / d);
                } else if dv > 0.0 {
                    return f64::INFINITY;
                }
            }
        }
        worst
    }

    /// Rejects the claim if some leaf pair violates the declared constant.
    pub fn check_lipschitz(&self, trees: &[&ScenarioTree]) -> Result<f64> {
        let l = self.empirical_lipschitz(trees);
        if l <= self.lipschitz * (1.0 + 1e-12) + 1e-12 {
            Ok(l)
        } else {
            Err(Error::InvalidParameter(format!(
                "claim {} has empirical Lipschitz constant {l} above declared {}",
                self.name, self.lipschitz
            )))
        }
    }
}

/// Positions `h(u) ∈ [−k, k]` held over `(t, t+1]` from node `u` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub bound: f64,
    /// Indexed by node id; entries at leaves are unused and kept at zero.
    pub positions: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategyFile {
    bound: f64,
    positions: Vec<f64>,
}

impl Strategy {
    pub fn zeros(tree: &ScenarioTree, bound: f64) -> Self {
        Strategy {
            bound,
            positions: vec![0.0; tree.len()],
        }
    }

    pub fn from_fn(tree: &ScenarioTree, bound: f64, mut f: impl FnMut(NodeId) -> f64) -> Result<Self> {
        let mut s = Strategy::zeros(tree, bound);
        for u in 0..tree.len() {
            if !tree.is_leaf(u) {
                s.positions[u] = f(u);
            }
        }
        s.validate(tree)?;
        Ok(s)
    }

    pub fn position(&self, u: NodeId) -> f64 {
        self.positions[u]
    }

    pub fn validate(&self, tree: &ScenarioTree) -> Result<()> {
        if !(self.bound >= 0.0 && self.bound.is_finite()) {
            return Err(Error::InvalidParameter(format!("strategy bound {} must be >= 0", self.bound)));
        }
        if self.positions.len() != tree.len() {
            return Err(Error::StrategyMismatch(format!(
                "{} positions for a tree with {} nodes",
                self.positions.len(),
                tree.len()
            )));
        }
        for u in 0..tree.len() {
            let h = self.positions[u];
            if !tree.is_leaf(u) && !(h.abs() <= self.bound + BOUND_TOL) {
                return Err(Error::StrategyMismatch(format!(
                    "position {h} at node {} exceeds bound {}",
                    tree.node_name(u),
                    self.bound
                )));
            }
        }
        Ok(())
    }

    /// `(H·X)_T` per leaf, leaves in depth-first order.
    pub fn gains(&self, tree: &ScenarioTree) -> Vec<f64> {
        tree.leaves()
            .into_iter()
            .map(|l| {
                tree.ancestry(l)
                    .windows(2)
                    .map(|w| self.positions[w[0]] * (tree.value(w[1]) - tree.value(w[0])))
                    .sum()
            })
            .collect()
    }

    /// Serialises positions of non-terminal nodes in preorder.
    pub fn to_json(&self, tree: &ScenarioTree) -> Result<String> {
        let positions = tree
            .preorder()
            .into_iter()
            .filter(|&u| !tree.is_leaf(u))
            .map(|u| self.positions[u])
            .collect();
        Ok(serde_json::to_string_pretty(&StrategyFile {
            bound: self.bound,
            positions,
        })?)
    }

    pub fn from_json(tree: &ScenarioTree, text: &str) -> Result<Self> {
        let file: StrategyFile = serde_json::from_str(text)?;
        let inner: Vec<NodeId> = tree.preorder().into_iter().filter(|&u| !tree.is_leaf(u)).collect();
        if inner.len() != file.positions.len() {
            return Err(Error::StrategyMismatch(format!(
                "{} positions for {} non-terminal nodes",
                file.positions.len(),
                inner.len()
            )));
        }
        let mut s = Strategy::zeros(tree, file.bound);
        for (u, h) in inner.into_iter().zip(file.positions) {
            s.positions[u] = h;
        }
        s.validate(tree)?;
        Ok(s)
    }
}

pub type PrefixFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A strategy given as a function of the path prefix `(x_0, …, x_t)`, valid
/// on any tree, with a declared Lipschitz constant per time.
#[derive(Clone)]
pub struct PrefixStrategy {
    pub bound: f64,
    pub lipschitz: f64,
    f: PrefixFn,
}

impl fmt::Debug for PrefixStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrefixStrategy")
            .field("bound", &self.bound)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl PrefixStrategy {
    pub fn new(bound: f64, lipschitz: f64, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        PrefixStrategy {
            bound,
            lipschitz,
            f: Arc::new(f),
        }
    }

    pub fn constant(bound: f64, h: f64) -> Self {
        PrefixStrategy::new(bound, 0.0, move |_| h)
    }

    /// `clamp(a_t + Σ_{s≤t} b_{t,s} x_s, −k, k)`; Lipschitz with
    /// `max_t Σ_s |b_{t,s}|`.
    pub fn affine_clamped(bound: f64, intercepts: Vec<f64>, slopes: Vec<Vec<f64>>) -> Self {
        let lipschitz = slopes
            .iter()
            .map(|row| row.iter().map(|b| b.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        PrefixStrategy::new(bound, lipschitz, move |x: &[f64]| {
            let t = x.len() - 1;
            let s: f64 = slopes[t].iter().zip(x).map(|(b, v)| b * v).sum();
            (intercepts[t] + s).clamp(-bound, bound)
        })
    }

    pub fn eval(&self, prefix: &[f64]) -> f64 {
        (self.f)(prefix)
    }

    pub fn on_tree(&self, tree: &ScenarioTree) -> Result<Strategy> {
        Strategy::from_fn(tree, self.bound, |u| self.eval(&tree.path_values(u)))
    }

    /// Largest `|H(a) − H(b)| / ‖a − b‖_∞` over same-time prefixes of
    /// non-terminal nodes in the given trees.
    pub fn empirical_lipschitz(&self, trees: &[&ScenarioTree]) -> f64 {
        let horizon = trees.iter().map(|t| t.horizon()).max().unwrap_or(0);
        let mut worst: f64 = 0.0;
        for t in 0..horizon {
            let prefixes: Vec<Vec<f64>> = trees
                .iter()
                .filter(|tr| tr.horizon() > t)
                .flat_map(|tr| tr.nodes_at(t).into_iter().map(|u| tr.path_values(u)).collect::<Vec<_>>())
                .collect();
            let vals: Vec<f64> = prefixes.iter().map(|p| self.eval(p)).collect();
            for i in 0..prefixes.len() {
                for j in i + 1..prefixes.len() {
                    let d = sup_distance(&prefixes[i], &prefixes[j]);
                    let dv = (vals[i] - vals[j]).abs();
                    if d > 0.0 {
                        worst = worst.max(dv / d);
                    } else if dv > 0.0 {
                        return f64::INFINITY;
                    }
                }
            }
        }
        worst
    }

    /// Certifies the declared constant over all prefix pairs.
    pub fn certify(&self, trees: &[&ScenarioTree]) -> Result<f64> {
        let l = self.empirical_lipschitz(trees);
        if l <= self.lipschitz * (1.0 + 1e-12) + 1e-12 {
            Ok(l)
        } else {
            Err(Error::NotCertifiable(format!(
                "strategy varies with ratio {l} across prefixes, declared {}",
                self.lipschitz
            )))
        }
    }
}
