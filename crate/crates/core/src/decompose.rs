//! Doob decomposition `X = M + A` of the canonical process on a tree.
//!
//! The drift increment at a non-terminal node `u` is the one-step conditional
//! mean `E[X_{t+1} - X_t | u]`; the martingale increment along the edge
//! `(u, c)` is what remains of `x_c - x_u`. The quadratic variation used in
//! the path cost is the realized one, `sum_t (dM_t)^2`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{NodeId, ScenarioTree};

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Drift increment per node; zero at leaves.
    pub delta_a: Vec<f64>,
    /// Martingale increment on the edge into each node; zero at the root.
    pub delta_m: Vec<f64>,
}

pub fn doob_decompose(tree: &ScenarioTree) -> Result<Decomposition> {
    tree.ensure_valid()?;
    let n = tree.len();
    let mut delta_a = vec![0.0; n];
    let mut delta_m = vec![0.0; n];
    for (u, node) in tree.nodes().iter().enumerate() {
        if node.children.is_empty() {
            continue;
        }
        let drift: f64 = node
            .children
            .iter()
            .map(|&(c, p)| p * (tree.value(c) - node.value))
            .sum();
        delta_a[u] = drift;
        for &(c, _) in &node.children {
            delta_m[c] = (tree.value(c) - node.value) - drift;
        }
    }
    Ok(Decomposition { delta_a, delta_m })
}

/// Per-step `(dM_t, dA_t)` along a root-to-node path, `t = 1..=time(node)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathIncrements {
    pub dm: Vec<f64>,
    pub da: Vec<f64>,
}

impl PathIncrements {
    pub fn quadratic_variation(&self) -> f64 {
        self.dm.iter().map(|d| d * d).sum()
    }

    pub fn first_variation(&self) -> f64 {
        self.da.iter().map(|d| d.abs()).sum()
    }

    /// `[M]^{p/2} + |A|_{1-var}^p`.
    pub fn cost(&self, p: f64) -> f64 {
        self.quadratic_variation().powf(p / 2.0) + self.first_variation().powf(p)
    }
}

impl Decomposition {
    pub fn path_increments(&self, tree: &ScenarioTree, node: NodeId) -> PathIncrements {
        let anc = tree.ancestry(node);
        let mut out = PathIncrements::default();
        for w in anc.windows(2) {
            out.dm.push(self.delta_m[w[1]]);
            out.da.push(self.delta_a[w[0]]);
        }
        out
    }

    /// Debug dump: one row per node with its drift, and one per edge with its
    /// martingale increment.
    pub fn to_csv(&self, tree: &ScenarioTree) -> String {
        let mut s = String::from("kind,node,parent,t,delta_a,delta_m\n");
        for u in tree.preorder() {
            let n = tree.node(u);
            if !n.children.is_empty() {
                let _ = writeln!(s, "node,{u},,{},{},", n.time, self.delta_a[u]);
            }
            if let Some(p) = n.parent {
                let _ = writeln!(s, "edge,{u},{p},{},,{}", n.time, self.delta_m[u]);
            }
        }
        s
    }
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p = {p} must be >= 1")))
    }
}

/// `AW_p(P, δ_0) = E[[M]_T^{p/2} + |A|_{1-var}^p]^{1/p}`.
pub fn seminorm(tree: &ScenarioTree, p: f64) -> Result<f64> {
    check_p(p)?;
    let dec = doob_decompose(tree)?;
    let prob = tree.node_probabilities();
    let total: f64 = tree
        .leaves()
        .into_iter()
        .map(|l| prob[l] * dec.path_increments(tree, l).cost(p))
        .sum();
    Ok(total.powf(1.0 / p))
}

/// Differences of the Doob increments of two paths, step by step.
///
/// The decompositions are those of the marginal trees; under a bi-causal
/// coupling they remain the decompositions of the coupled processes.
pub fn pair_increments(
    tree_p: &ScenarioTree,
    tree_q: &ScenarioTree,
    node_p: NodeId,
    node_q: NodeId,
) -> Result<PathIncrements> {
    if tree_p.horizon() != tree_q.horizon() {
        return Err(Error::HorizonMismatch(tree_p.horizon(), tree_q.horizon()));
    }
    let dp = doob_decompose(tree_p)?;
    let dq = doob_decompose(tree_q)?;
    Ok(increment_difference(
        &dp.path_increments(tree_p, node_p),
        &dq.path_increments(tree_q, node_q),
    ))
}

pub fn increment_difference(a: &PathIncrements, b: &PathIncrements) -> PathIncrements {
    PathIncrements {
        dm: a.dm.iter().zip(&b.dm).map(|(x, y)| x - y).collect(),
        da: a.da.iter().zip(&b.da).map(|(x, y)| x - y).collect(),
    }
}

/// How the quadratic variation of the martingale part is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadraticVariation {
    Realized,
}

/// Fixed Burkholder–Davis–Gundy constants and the derived constants of the
/// stability bounds. Derived constants are computed per call from their
/// inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantsLedger {
    pub b1: f64,
    pub b2: f64,
    pub quadratic_variation: QuadraticVariation,
}

impl Default for ConstantsLedger {
    fn default() -> Self {
        ConstantsLedger {
            b1: 6.0,
            b2: 2.0,
            quadratic_variation: QuadraticVariation::Realized,
        }
    }
}

impl ConstantsLedger {
    /// Upper BDG constant `b_p`; `b_p = p` for `p >= 2`. Unknown on `(1, 2)`.
    pub fn bdg(&self, p: f64) -> Result<f64> {
        if p == 1.0 {
            Ok(self.b1)
        } else if p == 2.0 {
            Ok(self.b2)
        } else if p > 2.0 {
            Ok(p)
        } else {
            Err(Error::InvalidParameter(format!(
                "no BDG constant available for p = {p}"
            )))
        }
    }

    /// `β = 2√2 b_1 L̃ min{AW_2(P,δ_0), AW_2(Q,δ_0)}`.
    pub fn beta(&self, strategy_lipschitz: f64, aw2_p0: f64, aw2_q0: f64) -> f64 {
        2.0 * 2f64.sqrt() * self.b1 * strategy_lipschitz * aw2_p0.min(aw2_q0)
    }

    /// `r = b_1 (L + k) / α`.
    pub fn avar_rate(&self, claim_lipschitz: f64, k: f64, alpha: f64) -> f64 {
        self.b1 * (claim_lipschitz + k) / alpha
    }

    /// `2^{3p-2} L̃^p b_p b_{2p}^{1/2} min{AW_{2p}(P,δ_0)^p, AW_{2p}(Q,δ_0)^p}`.
    pub fn strategy_gap_alpha(
        &self,
        p: f64,
        strategy_lipschitz: f64,
        aw2p_p0: f64,
        aw2p_q0: f64,
    ) -> Result<f64> {
        let bp = self.bdg(p)?;
        let b2p = self.bdg(2.0 * p)?;
        Ok(2f64.powf(3.0 * p - 2.0)
            * strategy_lipschitz.powf(p)
            * bp
            * b2p.sqrt()
            * aw2p_p0.powf(p).min(aw2p_q0.powf(p)))
    }

    /// Contraction factor `2^{(p-1)/p} b_p^{1/p} (k + L)`.
    pub fn contraction_factor(&self, p: f64, k: f64, claim_lipschitz: f64) -> Result<f64> {
        Ok(2f64.powf((p - 1.0) / p) * self.bdg(p)?.powf(1.0 / p) * (k + claim_lipschitz))
    }

    /// Constant controlling quadratic variation by terminal value; known
    /// only for `p = 2`, where it equals one.
    pub fn terminal_value_constant(&self, p: f64) -> Result<f64> {
        if p == 2.0 {
            Ok(1.0)
        } else {
            Err(Error::InvalidParameter(format!("c_p unknown for p = {p}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_step(up: f64, down: f64, q: f64) -> ScenarioTree {
        let mut t = ScenarioTree::new(1, 0.0);
        t.add_child(0, q, up);
        t.add_child(0, 1.0 - q, down);
        t
    }

    #[test]
    fn symmetric_step_has_no_drift() {
        let t = one_step(1.0, -1.0, 0.5);
        let d = doob_decompose(&t).unwrap();
        assert_eq!(d.delta_a[0], 0.0);
        assert_eq!(d.delta_m[1], 1.0);
        assert_eq!(d.delta_m[2], -1.0);
    }

    #[test]
    fn deterministic_drift() {
        let mut t = ScenarioTree::new(2, 0.0);
        let a = t.add_child(0, 1.0, 0.3);
        t.add_child(a, 1.0, 0.6);
        let d = doob_decompose(&t).unwrap();
        assert!((d.delta_a[0] - 0.3).abs() < 1e-15);
        assert!((d.delta_a[a] - 0.3).abs() < 1e-15);
        assert!(d.delta_m.iter().all(|&m| m.abs() < 1e-15));
        assert!((seminorm(&t, 1.0).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn martingale_property_and_reconstruction() {
        let t = one_step(2.0, -0.5, 0.3);
        let d = doob_decompose(&t).unwrap();
        let m: f64 = t.node(0).children.iter().map(|&(c, p)| p * d.delta_m[c]).sum();
        assert!(m.abs() < 1e-12);
        for &(c, _) in &t.node(0).children {
            assert!((d.delta_m[c] + d.delta_a[0] - t.value(c)).abs() < 1e-12);
        }
    }

    #[test]
    fn one_step_seminorm() {
        let t = one_step(0.7, -0.7, 0.5);
        assert!((seminorm(&t, 2.0).unwrap() - 0.7).abs() < 1e-15);
        assert!(seminorm(&t, 0.5).is_err());
        let c = ScenarioTree::new(1, 3.0);
        let mut c = c;
        c.add_child(0, 1.0, 3.0);
        assert_eq!(seminorm(&c, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn ledger_constants() {
        let l = ConstantsLedger::default();
        assert_eq!(l.bdg(1.0).unwrap(), 6.0);
        assert_eq!(l.bdg(2.0).unwrap(), 2.0);
        assert_eq!(l.bdg(4.0).unwrap(), 4.0);
        assert!(l.bdg(1.5).is_err());
        assert!((l.contraction_factor(1.0, 1.0, 1.0).unwrap() - 12.0).abs() < 1e-15);
        assert!((l.contraction_factor(2.0, 1.0, 0.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn csv_dump_lists_nodes_and_edges() {
        let t = one_step(1.0, -1.0, 0.5);
        let csv = doob_decompose(&t).unwrap().to_csv(&t);
        assert_eq!(csv.lines().count(), 4);
    }
}
