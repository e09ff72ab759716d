//! The adapted Wasserstein distance `AW_p` between two scenario trees.
//!
//! The cost of a pair of paths is `[M^X − M^Y]_T^{p/2} + |A^X − A^Y|_{1-var}^p`
//! with the Doob parts taken under each marginal. Three solvers are offered:
//! an exact LP over bi-causal couplings, a backward recursion for
//! stage-additive costs, and the synchronous (stepwise comonotone) coupling,
//! whose cost is an upper bound.
//!
//! The LP uses one variable per pair of nodes at the same time. A coupling
//! is bi-causal exactly when, from every node pair `(u, v)`, the mass sent to
//! the children pairs has the two one-step transition laws as marginals.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::decompose::{doob_decompose, increment_difference, PathIncrements};
use crate::error::{Error, Result};
use crate::scenario::{NodeId, ScenarioTree};
use crate::transport::lp::{solve_lp_with, Backend, ConstraintOp, LinearProgram};
use crate::transport::ot::{check_p, optimal_transport, quantile_coupling, Coupling};

/// Tolerance on marginals and causality of a returned coupling.
pub const COUPLING_TOL: f64 = 1e-9;

/// Default ceiling on LP variables.
pub const DEFAULT_VAR_BUDGET: usize = 50_000;

fn check_horizons(tp: &ScenarioTree, tq: &ScenarioTree) -> Result<()> {
    if tp.horizon() != tq.horizon() {
        return Err(Error::HorizonMismatch(tp.horizon(), tq.horizon()));
    }
    tp.ensure_valid()?;
    tq.ensure_valid()
}

fn leaf_increments(tree: &ScenarioTree) -> Result<Vec<PathIncrements>> {
    let dec = doob_decompose(tree)?;
    Ok(tree
        .leaves()
        .into_iter()
        .map(|l| dec.path_increments(tree, l))
        .collect())
}

/// Path-pair cost matrix, rows indexed by P-leaves and columns by Q-leaves,
/// both in depth-first order.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCost {
    pub p: f64,
    pub leaves_p: Vec<NodeId>,
    pub leaves_q: Vec<NodeId>,
    pub cost: Vec<f64>,
}

impl PairCost {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.leaves_q.len() + j]
    }
}

pub fn pair_cost(tp: &ScenarioTree, tq: &ScenarioTree, p: f64) -> Result<PairCost> {
    check_p(p)?;
    check_horizons(tp, tq)?;
    let (ip, iq) = (leaf_increments(tp)?, leaf_increments(tq)?);
    let mut cost = Vec::with_capacity(ip.len() * iq.len());
    for a in &ip {
        for b in &iq {
            cost.push(increment_difference(a, b).cost(p));
        }
    }
    Ok(PairCost {
        p,
        leaves_p: tp.leaves(),
        leaves_q: tq.leaves(),
        cost,
    })
}

/// Indexing of same-time node pairs.
struct PairIndex {
    p_nodes: Vec<Vec<NodeId>>,
    q_nodes: Vec<Vec<NodeId>>,
    p_local: Vec<usize>,
    q_local: Vec<usize>,
    offsets: Vec<usize>,
}

impl PairIndex {
    fn new(tp: &ScenarioTree, tq: &ScenarioTree) -> Self {
        let horizon = tp.horizon();
        let mut p_nodes = Vec::new();
        let mut q_nodes = Vec::new();
        let mut p_local = vec![0; tp.len()];
        let mut q_local = vec![0; tq.len()];
        let mut offsets = Vec::new();
        let mut total = 0;
        for t in 0..=horizon {
            let a = tp.nodes_at(t);
            let b = tq.nodes_at(t);
            for (k, &u) in a.iter().enumerate() {
                p_local[u] = k;
            }
            for (k, &v) in b.iter().enumerate() {
                q_local[v] = k;
            }
            offsets.push(total);
            total += a.len() * b.len();
            p_nodes.push(a);
            q_nodes.push(b);
        }
        offsets.push(total);
        PairIndex {
            p_nodes,
            q_nodes,
            p_local,
            q_local,
            offsets,
        }
    }

    fn total(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    fn index(&self, t: usize, u: NodeId, v: NodeId) -> usize {
        self.offsets[t] + self.p_local[u] * self.q_nodes[t].len() + self.q_local[v]
    }
}

/// A joint law on pairs of leaves that is causal in both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct BiCausalCoupling {
    pub leaves_p: Vec<NodeId>,
    pub leaves_q: Vec<NodeId>,
    /// Row-major over (P-leaf, Q-leaf).
    pub weights: Vec<f64>,
}

/// Outcome of checking a coupling against its defining constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingCheck {
    pub marginal_error: f64,
    pub causal_error_pq: f64,
    pub causal_error_qp: f64,
}

impl CouplingCheck {
    pub fn worst(&self) -> f64 {
        self.marginal_error
            .max(self.causal_error_pq)
            .max(self.causal_error_qp)
    }
}

impl BiCausalCoupling {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.leaves_q.len() + j]
    }

    pub fn diagonal(tree: &ScenarioTree) -> Self {
        let leaves = tree.leaves();
        let prob = tree.node_probabilities();
        let n = leaves.len();
        let mut weights = vec![0.0; n * n];
        for (i, &l) in leaves.iter().enumerate() {
            weights[i * n + i] = prob[l];
        }
        BiCausalCoupling {
            leaves_p: leaves.clone(),
            leaves_q: leaves,
            weights,
        }
    }

    pub fn product(tp: &ScenarioTree, tq: &ScenarioTree) -> Self {
        let (pp, pq) = (tp.node_probabilities(), tq.node_probabilities());
        let (lp, lq) = (tp.leaves(), tq.leaves());
        let weights = lp
            .iter()
            .flat_map(|&a| lq.iter().map(move |&b| (a, b)))
            .map(|(a, b)| pp[a] * pq[b])
            .collect();
        BiCausalCoupling {
            leaves_p: lp,
            leaves_q: lq,
            weights,
        }
    }

    pub fn as_coupling(&self, tp: &ScenarioTree, tq: &ScenarioTree) -> Coupling {
        let (pp, pq) = (tp.node_probabilities(), tq.node_probabilities());
        Coupling {
            row_marginal: self.leaves_p.iter().map(|&l| pp[l]).collect(),
            col_marginal: self.leaves_q.iter().map(|&l| pq[l]).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn expect(&self, cost: &PairCost) -> f64 {
        self.weights
            .iter()
            .zip(&cost.cost)
            .filter(|(w, _)| **w != 0.0)
            .map(|(w, c)| w * c)
            .sum()
    }

    /// Mass through each same-time node pair `(u, v)`.
    pub fn node_pair_masses(&self, tp: &ScenarioTree, tq: &ScenarioTree) -> HashMap<(NodeId, NodeId), f64> {
        let (rp, rq) = (tp.leaf_ranges(), tq.leaf_ranges());
        let m = self.leaves_q.len();
        // Row prefix sums make every (u, v) block sum cheap.
        let mut prefix = vec![0.0; self.leaves_p.len() * (m + 1)];
        for i in 0..self.leaves_p.len() {
            for j in 0..m {
                prefix[i * (m + 1) + j + 1] = prefix[i * (m + 1) + j] + self.get(i, j);
            }
        }
        let mut out = HashMap::new();
        for t in 0..=tp.horizon() {
            for u in tp.nodes_at(t) {
                for v in tq.nodes_at(t) {
                    let (a, b) = rp[u];
                    let (c, d) = rq[v];
                    let s: f64 = (a..b)
                        .map(|i| prefix[i * (m + 1) + d] - prefix[i * (m + 1) + c])
                        .sum();
                    out.insert((u, v), s);
                }
            }
        }
        out
    }

    /// Checks marginals and causality in both directions.
    ///
    /// Causality from P to Q: for P-leaves `ω, ω'` through the same time-`t`
    /// node and any time-`t` Q-node `g`,
    /// `P(ω')·π(ω, ⊒g) = P(ω)·π(ω', ⊒g)`. Consecutive leaves in each class are
    /// compared, which is equivalent.
    pub fn check(&self, tp: &ScenarioTree, tq: &ScenarioTree) -> CouplingCheck {
        let (pp, pq) = (tp.node_probabilities(), tq.node_probabilities());
        let (n, m) = (self.leaves_p.len(), self.leaves_q.len());
        let mut marginal_error: f64 = 0.0;
        for i in 0..n {
            let s: f64 = (0..m).map(|j| self.get(i, j)).sum();
            marginal_error = marginal_error.max((s - pp[self.leaves_p[i]]).abs());
        }
        for j in 0..m {
            let s: f64 = (0..n).map(|i| self.get(i, j)).sum();
            marginal_error = marginal_error.max((s - pq[self.leaves_q[j]]).abs());
        }
        for w in &self.weights {
            marginal_error = marginal_error.max(-w);
        }
        let transposed = BiCausalCoupling {
            leaves_p: self.leaves_q.clone(),
            leaves_q: self.leaves_p.clone(),
            weights: (0..m * n).map(|k| self.get(k % n, k / n)).collect(),
        };
        CouplingCheck {
            marginal_error,
            causal_error_pq: self.causal_error(tp, tq),
            causal_error_qp: transposed.causal_error(tq, tp),
        }
    }

    fn causal_error(&self, tp: &ScenarioTree, tq: &ScenarioTree) -> f64 {
        let pp = tp.node_probabilities();
        let (rp, rq) = (tp.leaf_ranges(), tq.leaf_ranges());
        let m = self.leaves_q.len();
        let mut worst: f64 = 0.0;
        for t in 0..tp.horizon() {
            for u in tp.nodes_at(t) {
                let (a, b) = rp[u];
                for v in tq.nodes_at(t) {
                    let (c, d) = rq[v];
                    let mass = |i: usize| -> f64 { (c..d).map(|j| self.weights[i * m + j]).sum() };
                    for i in a..b.saturating_sub(1) {
                        let (wi, wk) = (pp[self.leaves_p[i]], pp[self.leaves_p[i + 1]]);
                        worst = worst.max((wk * mass(i) - wi * mass(i + 1)).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn verify(&self, tp: &ScenarioTree, tq: &ScenarioTree, tol: f64) -> Result<CouplingCheck> {
        let c = self.check(tp, tq);
        if c.worst() <= tol {
            Ok(c)
        } else {
            Err(Error::InconsistentCoupling(format!(
                "marginal error {:e}, causality errors {:e} / {:e}",
                c.marginal_error, c.causal_error_pq, c.causal_error_qp
            )))
        }
    }

    /// Largest conditional mean of the P-martingale increment given the
    /// joint history, over node pairs carrying mass.
    pub fn martingale_defect(&self, tp: &ScenarioTree, tq: &ScenarioTree) -> Result<f64> {
        let dec = doob_decompose(tp)?;
        let masses = self.node_pair_masses(tp, tq);
        let mut worst: f64 = 0.0;
        for t in 0..tp.horizon() {
            for u in tp.nodes_at(t) {
                for v in tq.nodes_at(t) {
                    let mass = masses[&(u, v)];
                    if mass <= 1e-14 {
                        continue;
                    }
                    let mut s = 0.0;
                    for &(c, _) in &tp.node(u).children {
                        for &(d, _) in &tq.node(v).children {
                            s += masses[&(c, d)] * dec.delta_m[c];
                        }
                    }
                    worst = worst.max((s / mass).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Non-zero weights as `p_leaf,q_leaf,weight` rows.
    pub fn to_csv(&self, tp: &ScenarioTree, tq: &ScenarioTree) -> String {
        let mut s = String::from("p_leaf,q_leaf,weight\n");
        for (i, &a) in self.leaves_p.iter().enumerate() {
            for (j, &b) in self.leaves_q.iter().enumerate() {
                let w = self.get(i, j);
                if w != 0.0 {
                    let _ = writeln!(s, "{},{},{}", tp.node_name(a), tq.node_name(b), w);
                }
            }
        }
        s
    }
}

/// Builds a coupling forward from a one-step kernel at every node pair.
fn compose_forward(
    tp: &ScenarioTree,
    tq: &ScenarioTree,
    mut kernel: impl FnMut(NodeId, NodeId) -> Result<Vec<(NodeId, NodeId, f64)>>,
) -> Result<BiCausalCoupling> {
    let mut level: Vec<((NodeId, NodeId), f64)> = vec![((tp.root(), tq.root()), 1.0)];
    for _ in 0..tp.horizon() {
        let mut next: HashMap<(NodeId, NodeId), f64> = HashMap::new();
        for ((u, v), mass) in level {
            if mass == 0.0 {
                continue;
            }
            for (c, d, w) in kernel(u, v)? {
                if w > 0.0 {
                    *next.entry((c, d)).or_insert(0.0) += mass * w;
                }
            }
        }
        level = next.into_iter().collect();
    }
    let (lp, lq) = (tp.leaves(), tq.leaves());
    let (mut ip, mut iq) = (vec![usize::MAX; tp.len()], vec![usize::MAX; tq.len()]);
    for (k, &l) in lp.iter().enumerate() {
        ip[l] = k;
    }
    for (k, &l) in lq.iter().enumerate() {
        iq[l] = k;
    }
    let mut weights = vec![0.0; lp.len() * lq.len()];
    for ((a, b), w) in level {
        weights[ip[a] * lq.len() + iq[b]] += w;
    }
    Ok(BiCausalCoupling {
        leaves_p: lp,
        leaves_q: lq,
        weights,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedDistance {
    /// `AW_p`, the p-th root of `cost`.
    pub value: f64,
    pub cost: f64,
    /// An optimiser; ties are resolved by the solver.
    pub coupling: BiCausalCoupling,
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub var_budget: usize,
    pub backend: Backend,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            var_budget: DEFAULT_VAR_BUDGET,
            backend: Backend::Auto,
        }
    }
}

pub fn adapted_wasserstein_lp(tp: &ScenarioTree, tq: &ScenarioTree, p: f64) -> Result<AdaptedDistance> {
    adapted_wasserstein_lp_with(tp, tq, p, LpOptions::default())
}

pub fn adapted_wasserstein_lp_with(
    tp: &ScenarioTree,
    tq: &ScenarioTree,
    p: f64,
    opts: LpOptions,
) -> Result<AdaptedDistance> {
    check_p(p)?;
    check_horizons(tp, tq)?;
    let idx = PairIndex::new(tp, tq);
    // The root pair is fixed at mass one and carries no variable.
    let nvars = idx.total() - 1;
    if nvars > opts.var_budget {
        return Err(Error::SizeExceeded {
            what: "bi-causal LP variables",
            size: nvars,
            budget: opts.var_budget,
        });
    }
    let costs = pair_cost(tp, tq, p)?;
    let horizon = tp.horizon();
    let var = |t: usize, u: NodeId, v: NodeId| idx.index(t, u, v) - 1;
    let mut lp = LinearProgram::new();
    for t in 1..=horizon {
        let nq = idx.q_nodes[t].len();
        for (a, _) in idx.p_nodes[t].iter().enumerate() {
            for b in 0..nq {
                let c = if t == horizon { costs.cost[a * nq + b] } else { 0.0 };
                lp.add_var(c, 0.0, f64::INFINITY);
            }
        }
    }
    for t in 0..horizon {
        for &u in &idx.p_nodes[t] {
            for &v in &idx.q_nodes[t] {
                let (pu, qv) = (&tp.node(u).children, &tq.node(v).children);
                // Mass of the parent pair: a variable, or the constant one at the root.
                let parent = if t == 0 { None } else { Some(var(t, u, v)) };
                let row = |mut coeffs: Vec<(usize, f64)>, prob: f64, lp: &mut LinearProgram| match parent {
                    Some(k) => {
                        coeffs.push((k, -prob));
                        lp.add_constraint(coeffs, ConstraintOp::Eq, 0.0);
                    }
                    None => lp.add_constraint(coeffs, ConstraintOp::Eq, prob),
                };
                for &(c, pc) in pu {
                    let coeffs = qv.iter().map(|&(d, _)| (var(t + 1, c, d), 1.0)).collect();
                    row(coeffs, pc, &mut lp);
                }
                for &(d, qd) in &qv[..qv.len() - 1] {
                    let coeffs = pu.iter().map(|&(c, _)| (var(t + 1, c, d), 1.0)).collect();
                    row(coeffs, qd, &mut lp);
                }
            }
        }
    }
    let sol = solve_lp_with(&lp, opts.backend)?.require_optimal("bi-causal LP")?;
    let start = idx.offsets[horizon] - 1;
    let weights: Vec<f64> = sol.x[start..].iter().map(|w| w.max(0.0)).collect();
    let coupling = BiCausalCoupling {
        leaves_p: costs.leaves_p.clone(),
        leaves_q: costs.leaves_q.clone(),
        weights,
    };
    let cost = coupling.expect(&costs).max(0.0);
    Ok(AdaptedDistance {
        value: cost.powf(1.0 / p),
        cost,
        coupling,
    })
}

/// One transition of each process, as seen by a stage cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    /// Time of the transition's end point.
    pub time: usize,
    pub x_from: f64,
    pub x_to: f64,
    pub y_from: f64,
    pub y_to: f64,
}

pub type StageFn = Arc<dyn Fn(&Step) -> f64 + Send + Sync>;

/// Per-transition cost for the backward recursion.
#[derive(Clone)]
pub enum StageCost {
    /// `(ΔX_t − ΔY_t)^2`; the total is reported through a square root.
    SquaredIncrement,
    /// The adapted path cost. Stage-additive only for `p = 2` between
    /// martingales, where it reduces to [`StageCost::SquaredIncrement`].
    Adapted { p: f64 },
    /// Arbitrary stage cost; the total is reported as is.
    Custom(StageFn),
}

impl fmt::Debug for StageCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageCost::SquaredIncrement => write!(f, "SquaredIncrement"),
            StageCost::Adapted { p } => write!(f, "Adapted {{ p: {p} }}"),
            StageCost::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Martingale tolerance for accepting the `p = 2` shortcut.
const MARTINGALE_TOL: f64 = 1e-12;

impl StageCost {
    fn resolve(&self, tp: &ScenarioTree, tq: &ScenarioTree) -> Result<(StageFn, f64)> {
        let squared: StageFn = Arc::new(|s: &Step| {
            let d = (s.x_to - s.x_from) - (s.y_to - s.y_from);
            d * d
        });
        match self {
            StageCost::SquaredIncrement => Ok((squared, 2.0)),
            StageCost::Adapted { p } => {
                if *p != 2.0 {
                    return Err(Error::NotStageAdditive(format!(
                        "the adapted cost with p = {p} couples all stages through the outer power; use the LP solver"
                    )));
                }
                if !tp.is_martingale(MARTINGALE_TOL) || !tq.is_martingale(MARTINGALE_TOL) {
                    return Err(Error::NotStageAdditive(
                        "with drift, the squared 1-variation term couples all stages; use the LP solver".into(),
                    ));
                }
                Ok((squared, 2.0))
            }
            StageCost::Custom(f) => Ok((f.clone(), 1.0)),
        }
    }
}

/// `value` is `cost^{1/e}` with `e = 2` for the squared costs and `e = 1`
/// for custom ones.
pub fn adapted_wasserstein_dp(tp: &ScenarioTree, tq: &ScenarioTree, stage: &StageCost) -> Result<AdaptedDistance> {
    check_horizons(tp, tq)?;
    let (f, exponent) = stage.resolve(tp, tq)?;
    let idx = PairIndex::new(tp, tq);
    let horizon = tp.horizon();
    let mut value = vec![0.0; idx.total()];
    let mut inner: HashMap<(NodeId, NodeId), Vec<(NodeId, NodeId, f64)>> = HashMap::new();
    for t in (0..horizon).rev() {
        for &u in &idx.p_nodes[t] {
            for &v in &idx.q_nodes[t] {
                let (pu, qv) = (&tp.node(u).children, &tq.node(v).children);
                let mut cost = Vec::with_capacity(pu.len() * qv.len());
                for &(c, _) in pu {
                    for &(d, _) in qv {
                        let step = Step {
                            time: t + 1,
                            x_from: tp.value(u),
                            x_to: tp.value(c),
                            y_from: tq.value(v),
                            y_to: tq.value(d),
                        };
                        cost.push(f(&step) + value[idx.index(t + 1, c, d)]);
                    }
                }
                let mu: Vec<f64> = pu.iter().map(|c| c.1).collect();
                let nu: Vec<f64> = qv.iter().map(|c| c.1).collect();
                let (v_uv, gamma) = optimal_transport(&mu, &nu, &cost)?;
                value[idx.index(t, u, v)] = v_uv;
                let mut kernel = Vec::new();
                for (a, &(c, _)) in pu.iter().enumerate() {
                    for (b, &(d, _)) in qv.iter().enumerate() {
                        let g = gamma.get(a, b);
                        if g > 0.0 {
                            kernel.push((c, d, g));
                        }
                    }
                }
                inner.insert((u, v), kernel);
            }
        }
    }
    let coupling = compose_forward(tp, tq, |u, v| Ok(inner[&(u, v)].clone()))?;
    let cost = value[0].max(0.0);
    Ok(AdaptedDistance {
        value: cost.powf(1.0 / exponent),
        cost,
        coupling,
    })
}

fn sorted_children(tree: &ScenarioTree, u: NodeId) -> Vec<(NodeId, f64)> {
    let mut ch = tree.node(u).children.clone();
    ch.sort_by(|a, b| tree.value(a.0).total_cmp(&tree.value(b.0)).then(a.0.cmp(&b.0)));
    ch
}

/// Stepwise comonotone coupling: at each node pair the two one-step laws
/// are coupled through their quantile functions.
pub fn synchronous_coupling(tp: &ScenarioTree, tq: &ScenarioTree) -> Result<BiCausalCoupling> {
    check_horizons(tp, tq)?;
    compose_forward(tp, tq, |u, v| {
        let (a, b) = (sorted_children(tp, u), sorted_children(tq, v));
        let mu: Vec<f64> = a.iter().map(|c| c.1).collect();
        let nu: Vec<f64> = b.iter().map(|c| c.1).collect();
        let q = quantile_coupling(&mu, &nu);
        let mut out = Vec::new();
        for (i, &(c, _)) in a.iter().enumerate() {
            for (j, &(d, _)) in b.iter().enumerate() {
                let w = q.get(i, j);
                if w > 0.0 {
                    out.push((c, d, w));
                }
            }
        }
        Ok(out)
    })
}

/// Cost of the synchronous coupling: an upper bound on `AW_p`.
pub fn synchronous_distance(tp: &ScenarioTree, tq: &ScenarioTree, p: f64) -> Result<AdaptedDistance> {
    let costs = pair_cost(tp, tq, p)?;
    let coupling = synchronous_coupling(tp, tq)?;
    let cost = coupling.expect(&costs).max(0.0);
    Ok(AdaptedDistance {
        value: cost.powf(1.0 / p),
        cost,
        coupling,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub p: f64,
    pub distances: Vec<Vec<f64>>,
    /// Largest `|d(i,j) − d(j,i)|`.
    pub symmetry_gap: f64,
    /// Pairs where "distance below 1e-8" and "equal path laws" disagree.
    pub identity_failures: Vec<(usize, usize)>,
    /// Smallest `d(i,k) + d(k,j) − d(i,j)`.
    pub triangle_slack: f64,
}

impl MetricReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.symmetry_gap <= tol && self.identity_failures.is_empty() && self.triangle_slack >= -tol
    }
}

/// Costs `d^p` below this count as zero distance.
pub const ZERO_COST_TOL: f64 = 1e-9;

pub fn check_metric_axioms(trees: &[ScenarioTree], p: f64) -> Result<MetricReport> {
    if trees.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "metric check needs at least 3 trees, got {}",
            trees.len()
        )));
    }
    let n = trees.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            d[i][j] = adapted_wasserstein_lp(&trees[i], &trees[j], p)?.value;
        }
    }
    let laws: Vec<_> = trees
        .iter()
        .map(|t| t.canonicalize().to_path_law())
        .collect::<Result<_>>()?;
    let mut symmetry_gap: f64 = 0.0;
    let mut identity_failures = Vec::new();
    let mut triangle_slack = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            symmetry_gap = symmetry_gap.max((d[i][j] - d[j][i]).abs());
            // Zero is judged on the cost scale: the sparse backend is accurate to
            // about 1e-9 there, which a square root would inflate to 3e-5.
            let zero = d[i][j].powf(p) < ZERO_COST_TOL;
            let equal = laws[i].approx_eq(&laws[j], 1e-9);
            if zero != equal {
                identity_failures.push((i, j));
            }
            for k in (0..n).filter(|&k| k != i && k != j) {
                triangle_slack = triangle_slack.min(d[i][k] + d[k][j] - d[i][j]);
            }
        }
    }
    Ok(MetricReport {
        p,
        distances: d,
        symmetry_gap,
        identity_failures,
        triangle_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(sigma: f64) -> ScenarioTree {
        let mut t = ScenarioTree::new(1, 0.0);
        t.add_child(0, 0.5, -sigma);
        t.add_child(0, 0.5, sigma);
        t
    }

    fn walk(sigmas: &[f64]) -> ScenarioTree {
        let mut t = ScenarioTree::new(sigmas.len(), 0.0);
        let mut frontier = vec![0];
        for &s in sigmas {
            let mut next = Vec::new();
            for u in frontier {
                let x = t.value(u);
                next.push(t.add_child(u, 0.5, x - s));
                next.push(t.add_child(u, 0.5, x + s));
            }
            frontier = next;
        }
        t
    }

    #[test]
    fn self_distance_is_zero() {
        let t = walk(&[1.0, 0.5]);
        for p in [1.0, 2.0] {
            let r = adapted_wasserstein_lp(&t, &t, p).unwrap();
            assert!(r.value < 1e-12);
            r.coupling.verify(&t, &t, COUPLING_TOL).unwrap();
        }
    }

    #[test]
    fn comonotone_one_step() {
        let c = pair_cost(&step(1.0), &step(0.25), 2.0).unwrap();
        assert!((c.get(0, 0) - 0.5625).abs() < 1e-15);
        let r = adapted_wasserstein_lp(&step(1.0), &step(0.25), 2.0).unwrap();
        assert!((r.value - 0.75).abs() < 1e-12);
    }

    #[test]
    fn volatility_walks() {
        let a = walk(&[0.5 / 2f64.sqrt(), 1.5 / 2f64.sqrt()]);
        let b = walk(&[1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()]);
        let lp = adapted_wasserstein_lp(&a, &b, 2.0).unwrap();
        assert!((lp.value - 0.5).abs() < 1e-9, "{}", lp.value);
        let dp = adapted_wasserstein_dp(&a, &b, &StageCost::Adapted { p: 2.0 }).unwrap();
        assert!((dp.cost - 0.25).abs() < 1e-9);
        let sync = synchronous_distance(&a, &b, 2.0).unwrap();
        assert!((sync.cost - 0.25).abs() < 1e-12);
        for c in [&lp.coupling, &dp.coupling, &sync.coupling] {
            c.verify(&a, &b, COUPLING_TOL).unwrap();
        }
    }

    #[test]
    fn dp_rejects_non_additive_costs() {
        let a = walk(&[1.0]);
        let r = adapted_wasserstein_dp(&a, &a, &StageCost::Adapted { p: 1.0 });
        assert!(matches!(r, Err(Error::NotStageAdditive(_))));
        let mut drift = ScenarioTree::new(1, 0.0);
        drift.add_child(0, 1.0, 1.0);
        let r = adapted_wasserstein_dp(&drift, &drift, &StageCost::Adapted { p: 2.0 });
        assert!(matches!(r, Err(Error::NotStageAdditive(_))));
    }

    #[test]
    fn product_coupling_is_bicausal_and_anticausal_is_not() {
        let a = walk(&[1.0, 1.0]);
        let pc = BiCausalCoupling::product(&a, &a);
        assert!(pc.check(&a, &a).worst() < 1e-15);
        // Matching the first P-step with the second Q-step looks ahead.
        let leaves = a.leaves();
        let n = leaves.len();
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            let (b0, b1) = (i / 2, i % 2);
            w[i * n + (b1 * 2 + b0)] = 0.25;
        }
        let bad = BiCausalCoupling {
            leaves_p: leaves.clone(),
            leaves_q: leaves,
            weights: w,
        };
        let c = bad.check(&a, &a);
        assert!(c.marginal_error < 1e-15);
        assert!(c.causal_error_pq > 1e-3);
    }

    #[test]
    fn budget_is_enforced() {
        let a = walk(&[1.0; 6]);
        let opts = LpOptions {
            var_budget: 100,
            ..LpOptions::default()
        };
        assert!(matches!(
            adapted_wasserstein_lp_with(&a, &a, 2.0, opts),
            Err(Error::SizeExceeded { .. })
        ));
    }

    #[test]
    fn metric_needs_three_trees() {
        assert!(check_metric_axioms(&[step(1.0), step(2.0)], 1.0).is_err());
    }
}
