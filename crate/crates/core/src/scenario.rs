//! Finite scenario trees, their path laws and finite distributions on the line.
//!
//! A [`ScenarioTree`] is a rooted tree whose node at depth `t` carries the
//! asset price at time `t`. The root sits at time 0 with a deterministic
//! value; every leaf sits at the horizon `T`. Edge weights are transition
//! probabilities, so the product along a root-to-leaf path is the
//! probability of that path.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of the transition probabilities of one node.
pub const LOCAL_PROB_TOL: f64 = 1e-12;
/// Tolerance on the total mass of a path law.
pub const GLOBAL_PROB_TOL: f64 = 1e-10;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub time: usize,
    pub value: f64,
    pub parent: Option<NodeId>,
    /// `(child, transition probability)` in stored order.
    pub children: Vec<(NodeId, f64)>,
    /// Optional identifier carried through file I/O.
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    horizon: usize,
    nodes: Vec<Node>,
}

/// One violated tree invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroHorizon,
    NoRoot,
    RootNotAtTimeZero { node: NodeId },
    LeafDepth { node: NodeId, time: usize, horizon: usize },
    ChildTime { parent: NodeId, child: NodeId },
    BadParent { node: NodeId },
    ProbabilityRange { node: NodeId, prob: f64 },
    ProbabilitySum { node: NodeId, sum: f64 },
    NonFiniteValue { node: NodeId },
    TotalMass { mass: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroHorizon => write!(f, "horizon must be positive"),
            Violation::NoRoot => write!(f, "tree has no root"),
            Violation::RootNotAtTimeZero { node } => {
                write!(f, "root {node} is not at time 0")
            }
            Violation::LeafDepth {
                node,
                time,
                horizon,
            } => write!(f, "leaf depth: node {node} ends at time {time} < horizon {horizon}"),
            Violation::ChildTime { parent, child } => {
                write!(f, "child {child} of node {parent} is not one step later")
            }
            Violation::BadParent { node } => write!(f, "node {node} has inconsistent parent link"),
            Violation::ProbabilityRange { node, prob } => {
                write!(f, "transition probability {prob} into node {node} outside (0,1]")
            }
            Violation::ProbabilitySum { node, sum } => {
                write!(f, "probability sum {sum} ≠ 1 at node {node}")
            }
            Violation::NonFiniteValue { node } => write!(f, "node {node} has a non-finite value"),
            Violation::TotalMass { mass } => write!(f, "path probabilities sum to {mass} ≠ 1"),
        }
    }
}

impl ScenarioTree {
    /// Starts a tree with a single root at time 0.
    pub fn new(horizon: usize, root_value: f64) -> Self {
        ScenarioTree {
            horizon,
            nodes: vec![Node {
                time: 0,
                value: root_value,
                parent: None,
                children: Vec::new(),
                label: None,
            }],
        }
    }

    /// Builds a tree from raw nodes without any checking. Node 0 is the root.
    pub fn from_nodes(horizon: usize, nodes: Vec<Node>) -> Self {
        ScenarioTree { horizon, nodes }
    }

    pub fn add_child(&mut self, parent: NodeId, prob: f64, value: f64) -> NodeId {
        let id = self.nodes.len();
        let time = self.nodes[parent].time + 1;
        self.nodes.push(Node {
            time,
            value,
            parent: Some(parent),
            children: Vec::new(),
            label: None,
        });
        self.nodes[parent].children.push((id, prob));
        id
    }

    pub fn set_label(&mut self, node: NodeId, label: impl Into<String>) {
        self.nodes[node].label = Some(label.into());
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> f64 {
        self.nodes[id].value
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id].children.is_empty()
    }

    /// Reports every violated invariant; an empty report means the tree is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.horizon == 0 {
            out.push(Violation::ZeroHorizon);
        }
        if self.nodes.is_empty() {
            out.push(Violation::NoRoot);
            return out;
        }
        let root = &self.nodes[0];
        if root.time != 0 || root.parent.is_some() {
            out.push(Violation::RootNotAtTimeZero { node: 0 });
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if !node.value.is_finite() {
                out.push(Violation::NonFiniteValue { node: id });
            }
            if id > 0 {
                let ok = node
                    .parent
                    .filter(|&p| p < self.nodes.len())
                    .map(|p| self.nodes[p].children.iter().any(|&(c, _)| c == id))
                    .unwrap_or(false);
                if !ok {
                    out.push(Violation::BadParent { node: id });
                }
            }
            if node.children.is_empty() {
                if node.time != self.horizon {
                    out.push(Violation::LeafDepth {
                        node: id,
                        time: node.time,
                        horizon: self.horizon,
                    });
                }
                continue;
            }
            let mut sum = 0.0;
            for &(c, p) in &node.children {
                if c >= self.nodes.len() || self.nodes[c].time != node.time + 1 {
                    out.push(Violation::ChildTime {
                        parent: id,
                        child: c,
                    });
                }
                if !(p > 0.0 && p <= 1.0 + LOCAL_PROB_TOL) {
                    out.push(Violation::ProbabilityRange { node: c, prob: p });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > LOCAL_PROB_TOL {
                out.push(Violation::ProbabilitySum { node: id, sum });
            }
        }
        if out.is_empty() {
            let mass: f64 = self.leaf_probabilities().iter().map(|(_, p)| p).sum();
            if (mass - 1.0).abs() > GLOBAL_PROB_TOL {
                out.push(Violation::TotalMass { mass });
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidTree(report))
        }
    }

    /// Nodes in depth-first preorder, children in stored order.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0];
        while let Some(u) = stack.pop() {
            out.push(u);
            for &(c, _) in self.nodes[u].children.iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    /// Leaves in depth-first order.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&u| self.is_leaf(u))
            .collect()
    }

    /// For each node, the half-open range of its descendant leaves within
    /// [`leaves`](Self::leaves).
    pub fn leaf_ranges(&self) -> Vec<(usize, usize)> {
        let mut ranges = vec![(usize::MAX, 0); self.nodes.len()];
        let mut k = 0;
        for u in self.preorder() {
            if self.is_leaf(u) {
                let mut cur = Some(u);
                while let Some(a) = cur {
                    let r = &mut ranges[a];
                    r.0 = r.0.min(k);
                    r.1 = k + 1;
                    cur = self.nodes[a].parent;
                }
                k += 1;
            }
        }
        ranges
    }

    /// Nodes at time `t`, in depth-first order.
    pub fn nodes_at(&self, t: usize) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&u| self.nodes[u].time == t)
            .collect()
    }

    /// Probability of reaching each node from the root.
    pub fn node_probabilities(&self) -> Vec<f64> {
        let mut prob = vec![0.0; self.nodes.len()];
        prob[0] = 1.0;
        for u in self.preorder() {
            for &(c, p) in &self.nodes[u].children {
                prob[c] = prob[u] * p;
            }
        }
        prob
    }

    fn leaf_probabilities(&self) -> Vec<(NodeId, f64)> {
        let prob = self.node_probabilities();
        self.leaves().into_iter().map(|l| (l, prob[l])).collect()
    }

    /// Node ids from the root to `node`, inclusive.
    pub fn ancestry(&self, node: NodeId) -> Vec<NodeId> {
        let mut path = vec![node];
        let mut cur = node;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    pub fn path_values(&self, node: NodeId) -> Vec<f64> {
        self.ancestry(node)
            .into_iter()
            .map(|u| self.nodes[u].value)
            .collect()
    }

    pub fn to_path_law(&self) -> Result<PathLaw> {
        self.ensure_valid()?;
        let paths = self
            .leaf_probabilities()
            .into_iter()
            .map(|(leaf, prob)| WeightedPath {
                values: self.path_values(leaf),
                prob,
                leaf,
            })
            .collect();
        Ok(PathLaw { paths })
    }

    /// True when every conditional one-step mean equals the current value.
    pub fn is_martingale(&self, tol: f64) -> bool {
        self.nodes.iter().all(|n| {
            n.children.is_empty() || {
                let mean: f64 = n
                    .children
                    .iter()
                    .map(|&(c, p)| p * self.nodes[c].value)
                    .sum();
                (mean - n.value).abs() <= tol
            }
        })
    }

    /// Sorts children by value and merges equal-valued siblings.
    ///
    /// The result has the same path law. Applying it twice gives the same tree.
    pub fn canonicalize(&self) -> ScenarioTree {
        let mut out = ScenarioTree {
            horizon: self.horizon,
            nodes: Vec::new(),
        };
        out.nodes.push(Node {
            time: 0,
            value: self.nodes[0].value,
            parent: None,
            children: Vec::new(),
            label: None,
        });
        self.build_canonical(&mut out, 0, &[(1.0, 0)]);
        out
    }

    fn build_canonical(&self, out: &mut ScenarioTree, target: NodeId, group: &[(f64, NodeId)]) {
        let total: f64 = group.iter().map(|g| g.0).sum();
        let mut kids: Vec<(f64, f64, NodeId)> = Vec::new();
        for &(w, u) in group {
            for &(c, p) in &self.nodes[u].children {
                kids.push((self.nodes[c].value, w * p / total, c));
            }
        }
        kids.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut i = 0;
        while i < kids.len() {
            let mut j = i;
            while j < kids.len() && kids[j].0 == kids[i].0 {
                j += 1;
            }
            let sub: Vec<(f64, NodeId)> = kids[i..j].iter().map(|k| (k.1, k.2)).collect();
            let mass: f64 = sub.iter().map(|s| s.0).sum();
            let id = out.add_child(target, mass, kids[i].0);
            self.build_canonical(out, id, &sub);
            i = j;
        }
    }

    /// Readable name of a node: its label or its child-index path.
    pub fn node_name(&self, id: NodeId) -> String {
        if let Some(l) = &self.nodes[id].label {
            return l.clone();
        }
        let anc = self.ancestry(id);
        let mut s = String::from("root");
        for w in anc.windows(2) {
            let idx = self.nodes[w[0]]
                .children
                .iter()
                .position(|&(c, _)| c == w[1])
                .unwrap_or(0);
            s.push('/');
            s.push_str(&idx.to_string());
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ScenarioTree> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<ScenarioTree> {
        let file: TreeFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            node: "<document>".into(),
            message: e.to_string(),
        })?;
        if file.root.prob.is_some_and(|p| (p - 1.0).abs() > LOCAL_PROB_TOL) {
            return Err(Error::Parse {
                node: "root".into(),
                message: "root may not carry a transition probability".into(),
            });
        }
        let mut tree = ScenarioTree::new(file.horizon, file.root.value);
        let mut seen = HashSet::new();
        if let Some(id) = &file.root.id {
            seen.insert(id.clone());
            tree.set_label(0, id.clone());
        }
        let mut stack: Vec<(NodeId, &NodeFile)> = vec![(0, &file.root)];
        while let Some((u, nf)) = stack.pop() {
            let mut created = Vec::new();
            for cf in &nf.children {
                let prob = cf.prob.ok_or_else(|| Error::Parse {
                    node: cf.id.clone().unwrap_or_else(|| tree.node_name(u) + "/?"),
                    message: "child without \"prob\"".into(),
                })?;
                let c = tree.add_child(u, prob, cf.value);
                if let Some(id) = &cf.id {
                    if !seen.insert(id.clone()) {
                        return Err(Error::Parse {
                            node: id.clone(),
                            message: "duplicate node id".into(),
                        });
                    }
                    tree.set_label(c, id.clone());
                }
                created.push((c, cf));
            }
            for item in created.into_iter().rev() {
                stack.push(item);
            }
        }
        // Renumber into preorder so that node ids follow the file layout.
        let tree = tree.renumbered();
        if let Some(v) = tree.validate().first() {
            let node = violation_node(v)
                .map(|n| tree.node_name(n))
                .unwrap_or_else(|| "<tree>".into());
            return Err(Error::Parse {
                node,
                message: v.to_string(),
            });
        }
        Ok(tree)
    }

    pub fn to_json(&self) -> Result<String> {
        fn emit(t: &ScenarioTree, u: NodeId, prob: Option<f64>) -> NodeFile {
            let n = &t.nodes[u];
            NodeFile {
                id: n.label.clone(),
                prob,
                value: n.value,
                children: n
                    .children
                    .iter()
                    .map(|&(c, p)| emit(t, c, Some(p)))
                    .collect(),
            }
        }
        let file = TreeFile {
            horizon: self.horizon,
            root: emit(self, 0, None),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Copy with node ids reassigned in depth-first preorder.
    pub fn renumbered(&self) -> ScenarioTree {
        let order = self.preorder();
        let mut map = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            map[old] = new;
        }
        let nodes = order
            .iter()
            .map(|&old| {
                let n = &self.nodes[old];
                Node {
                    time: n.time,
                    value: n.value,
                    parent: n.parent.map(|p| map[p]),
                    children: n.children.iter().map(|&(c, p)| (map[c], p)).collect(),
                    label: n.label.clone(),
                }
            })
            .collect();
        ScenarioTree {
            horizon: self.horizon,
            nodes,
        }
    }

    /// Copy with every node value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> ScenarioTree {
        let mut t = self.clone();
        for n in &mut t.nodes {
            n.value *= factor;
        }
        t
    }
}

fn violation_node(v: &Violation) -> Option<NodeId> {
    match *v {
        Violation::RootNotAtTimeZero { node }
        | Violation::LeafDepth { node, .. }
        | Violation::BadParent { node }
        | Violation::ProbabilityRange { node, .. }
        | Violation::ProbabilitySum { node, .. }
        | Violation::NonFiniteValue { node } => Some(node),
        Violation::ChildTime { child, .. } => Some(child),
        _ => None,
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeFile {
    horizon: usize,
    root: NodeFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prob: Option<f64>,
    value: f64,
    #[serde(default)]
    children: Vec<NodeFile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPath {
    /// Values at times `0..=T`.
    pub values: Vec<f64>,
    pub prob: f64,
    pub leaf: NodeId,
}

/// The law of the canonical process as a list of weighted paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLaw {
    pub paths: Vec<WeightedPath>,
}

impl PathLaw {
    pub fn total_mass(&self) -> f64 {
        self.paths.iter().map(|p| p.prob).sum()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Compares two path laws as measures: equal paths are pooled first.
    pub fn approx_eq(&self, other: &PathLaw, tol: f64) -> bool {
        let a = pooled(self);
        let b = pooled(other);
        a.len() == b.len()
            && a.iter().zip(&b).all(|(x, y)| {
                (x.1 - y.1).abs() <= tol
                    && x.0.len() == y.0.len()
                    && x.0.iter().zip(&y.0).all(|(u, v)| (u - v).abs() <= tol)
            })
    }
}

fn pooled(law: &PathLaw) -> Vec<(Vec<f64>, f64)> {
    let mut v: Vec<(Vec<f64>, f64)> = law
        .paths
        .iter()
        .map(|p| (p.values.clone(), p.prob))
        .collect();
    v.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
    for (vals, p) in v {
        match out.last_mut() {
            Some(last) if last.0 == vals => last.1 += p,
            _ => out.push((vals, p)),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// A finite atomic probability law on the real line, kept in canonical form
/// (sorted by value, equal values merged).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct DiscreteDistribution {
    atoms: Vec<Atom>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistribution {
    atoms: Vec<Atom>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = Error;
    fn try_from(raw: RawDistribution) -> Result<Self> {
        DiscreteDistribution::new(raw.atoms.into_iter().map(|a| (a.value, a.weight)))
    }
}

impl From<DiscreteDistribution> for RawDistribution {
    fn from(d: DiscreteDistribution) -> Self {
        RawDistribution { atoms: d.atoms }
    }
}

impl DiscreteDistribution {
    /// Builds a distribution from `(value, weight)` pairs.
    ///
    /// Weights must be non-negative and sum to one within the path-law
    /// tolerance; they are renormalized exactly. Zero weights are dropped.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut v: Vec<Atom> = Vec::new();
        for (value, weight) in atoms {
            if !value.is_finite() || !weight.is_finite() {
                return Err(Error::InvalidDistribution("non-finite atom".into()));
            }
            if weight < 0.0 {
                return Err(Error::InvalidDistribution(format!("negative weight {weight}")));
            }
            if weight > 0.0 {
                v.push(Atom { value, weight });
            }
        }
        let total: f64 = v.iter().map(|a| a.weight).sum();
        if v.is_empty() || (total - 1.0).abs() > GLOBAL_PROB_TOL {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        v.sort_by(|a, b| a.value.total_cmp(&b.value));
        let mut atoms: Vec<Atom> = Vec::with_capacity(v.len());
        for a in v {
            match atoms.last_mut() {
                Some(last) if last.value == a.value => last.weight += a.weight,
                _ => atoms.push(a),
            }
        }
        for a in &mut atoms {
            a.weight /= total;
        }
        Ok(DiscreteDistribution { atoms })
    }

    pub fn dirac(value: f64) -> Self {
        DiscreteDistribution {
            atoms: vec![Atom { value, weight: 1.0 }],
        }
    }

    /// Equal weights on the given values.
    pub fn uniform(values: &[f64]) -> Result<Self> {
        let w = 1.0 / values.len() as f64;
        Self::new(values.iter().map(|&v| (v, w)))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.value).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.value * a.weight).sum()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|a| f(a.value) * a.weight).sum()
    }

    pub fn min(&self) -> f64 {
        self.atoms[0].value
    }

    pub fn max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].value
    }

    pub fn shifted(&self, c: f64) -> Self {
        DiscreteDistribution {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    value: a.value + c,
                    weight: a.weight,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial2() -> ScenarioTree {
        let mut t = ScenarioTree::new(2, 0.0);
        for s in [1.0, -1.0] {
            let c = t.add_child(0, 0.5, s);
            t.add_child(c, 0.5, s + 1.0);
            t.add_child(c, 0.5, s - 1.0);
        }
        t
    }

    #[test]
    fn valid_binomial_has_empty_report() {
        assert!(binomial2().validate().is_empty());
    }

    #[test]
    fn probability_sum_violation() {
        let mut t = ScenarioTree::new(1, 0.0);
        t.add_child(0, 0.5, 1.0);
        t.add_child(0, 0.6, -1.0);
        let r = t.validate();
        assert!(matches!(r[0], Violation::ProbabilitySum { node: 0, sum } if (sum - 1.1).abs() < 1e-12));
        assert!(r[0].to_string().contains("probability sum 1.1"));
    }

    #[test]
    fn short_leaf_violation() {
        let mut t = ScenarioTree::new(2, 0.0);
        let a = t.add_child(0, 0.5, 1.0);
        t.add_child(0, 0.5, -1.0);
        t.add_child(a, 1.0, 2.0);
        let r = t.validate();
        assert_eq!(r.len(), 1);
        assert!(matches!(r[0], Violation::LeafDepth { time: 1, .. }));
    }

    #[test]
    fn path_law_of_one_step_tree() {
        let mut t = ScenarioTree::new(1, 0.0);
        t.add_child(0, 0.5, 1.0);
        t.add_child(0, 0.5, -1.0);
        let law = t.to_path_law().unwrap();
        assert_eq!(law.paths[0].values, vec![0.0, 1.0]);
        assert_eq!(law.paths[1].values, vec![0.0, -1.0]);
        assert_eq!(law.paths[0].prob, 0.5);
    }

    #[test]
    fn deterministic_chain() {
        let mut t = ScenarioTree::new(2, 0.0);
        let a = t.add_child(0, 1.0, 1.0);
        t.add_child(a, 1.0, 2.0);
        let law = t.to_path_law().unwrap();
        assert_eq!(law.len(), 1);
        assert_eq!(law.paths[0].values, vec![0.0, 1.0, 2.0]);
        assert_eq!(law.paths[0].prob, 1.0);
    }

    #[test]
    fn invalid_tree_rejected_by_path_law() {
        let mut t = ScenarioTree::new(1, 0.0);
        t.add_child(0, 0.7, 1.0);
        assert!(matches!(t.to_path_law(), Err(Error::InvalidTree(_))));
    }

    #[test]
    fn canonicalize_merges_and_is_idempotent() {
        let mut t = ScenarioTree::new(2, 0.0);
        let a = t.add_child(0, 0.25, 1.0);
        let b = t.add_child(0, 0.5, -1.0);
        let c = t.add_child(0, 0.25, 1.0);
        t.add_child(a, 1.0, 3.0);
        t.add_child(b, 1.0, -1.0);
        t.add_child(c, 0.5, 3.0);
        t.add_child(c, 0.5, 0.0);
        let k = t.canonicalize();
        assert!(k.validate().is_empty());
        assert_eq!(k.node(0).children.len(), 2);
        assert_eq!(k.canonicalize(), k);
        assert!(k
            .to_path_law()
            .unwrap()
            .approx_eq(&t.to_path_law().unwrap(), 1e-12));
    }

    #[test]
    fn json_round_trip() {
        let t = binomial2();
        let back = ScenarioTree::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn duplicate_id_is_parse_error() {
        let text = r#"{"horizon":1,"root":{"value":0,"children":[
            {"id":"a","prob":0.5,"value":1,"children":[]},
            {"id":"a","prob":0.5,"value":-1,"children":[]}]}}"#;
        match ScenarioTree::from_json(text) {
            Err(Error::Parse { node, .. }) => assert_eq!(node, "a"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn tolerance_boundary_accepted() {
        let text = r#"{"horizon":1,"root":{"value":0,"children":[
            {"prob":0.499999999999,"value":1},
            {"prob":0.5,"value":-1}]}}"#;
        assert!(ScenarioTree::from_json(text).is_ok());
        let bad = r#"{"horizon":1,"root":{"value":0,"children":[
            {"prob":0.4999999,"value":1},
            {"prob":0.5,"value":-1}]}}"#;
        assert!(ScenarioTree::from_json(bad).is_err());
    }

    #[test]
    fn malformed_file_names_node() {
        let text = r#"{"horizon":2,"root":{"value":0,"children":[
            {"id":"short","prob":1.0,"value":1,"children":[]}]}}"#;
        match ScenarioTree::from_json(text) {
            Err(Error::Parse { node, message }) => {
                assert_eq!(node, "short");
                assert!(message.contains("leaf depth"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let text = r#"{"horizon":1,"extra":1,"root":{"value":0,"children":[{"prob":1,"value":1}]}}"#;
        assert!(ScenarioTree::from_json(text).is_err());
    }

    #[test]
    fn distribution_canonical_form() {
        let d = DiscreteDistribution::new([(2.0, 0.25), (1.0, 0.5), (2.0, 0.25)]).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.atoms()[0].value, 1.0);
        assert_eq!(d.atoms()[1].weight, 0.5);
        assert!(DiscreteDistribution::new([(1.0, 0.5)]).is_err());
        assert!(DiscreteDistribution::new([(1.0, 1.5), (0.0, -0.5)]).is_err());
    }
}
