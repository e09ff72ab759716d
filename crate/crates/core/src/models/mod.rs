//! Discretised diffusion models and the small counterexample trees.

pub mod lattice;
pub mod random;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hedging::Claim;
use crate::scenario::{NodeId, ScenarioTree};

pub use lattice::{BinomialLattice, LatticeKind, ReplicationHedge};

/// Largest tree the generators will build.
pub const MAX_TREE_NODES: usize = 1 << 21;

pub type CoefficientFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// Volatility `σ(n, x)` and drift `μ(n, x)` per step index `n` and current value.
#[derive(Clone)]
pub struct VolatilitySchedule {
    pub name: String,
    sigma: CoefficientFn,
    drift: CoefficientFn,
}

impl fmt::Debug for VolatilitySchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VolatilitySchedule({})", self.name)
    }
}

impl VolatilitySchedule {
    pub fn new(
        name: impl Into<String>,
        sigma: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
        drift: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        VolatilitySchedule {
            name: name.into(),
            sigma: Arc::new(sigma),
            drift: Arc::new(drift),
        }
    }

    pub fn constant(sigma: f64) -> Self {
        Self::new(format!("const({sigma})"), move |_, _| sigma, |_, _| 0.0)
    }

    /// One volatility per step; steps beyond the list reuse the last entry.
    pub fn piecewise(sigmas: Vec<f64>) -> Self {
        let name = format!("piecewise({sigmas:?})");
        Self::new(name, move |n, _| sigmas[n.min(sigmas.len() - 1)], |_, _| 0.0)
    }

    pub fn with_drift(mut self, drift: impl Fn(usize, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.drift = Arc::new(drift);
        self
    }

    pub fn sigma(&self, n: usize, x: f64) -> f64 {
        (self.sigma)(n, x)
    }

    pub fn drift(&self, n: usize, x: f64) -> f64 {
        (self.drift)(n, x)
    }

    fn coefficients(&self, n: usize, x: f64) -> Result<(f64, f64)> {
        let (s, m) = (self.sigma(n, x), self.drift(n, x));
        if !(s >= 0.0 && s.is_finite()) || !m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "schedule {} gives sigma {s}, drift {m} at step {n}, x = {x}",
                self.name
            )));
        }
        Ok((s, m))
    }
}

/// Discretisation of a standard normal increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantization {
    Binomial,
    GaussHermite(usize),
}

impl Quantization {
    /// Symmetric atoms with mean zero and unit variance.
    pub fn atoms(&self) -> Result<Vec<(f64, f64)>> {
        match *self {
            Quantization::Binomial => Ok(vec![(1.0, 0.5), (-1.0, 0.5)]),
            Quantization::GaussHermite(m) if m < 2 => Err(Error::InvalidParameter(format!(
                "Gauss-Hermite quantization needs m >= 2, got {m}"
            ))),
            Quantization::GaussHermite(m) => Ok(gauss_hermite(m)),
        }
    }
}

/// Golub–Welsch for the probabilists' Hermite weight, symmetrised and
/// rescaled so that the first two moments are exact in floating point.
fn gauss_hermite(m: usize) -> Vec<(f64, f64)> {
    let mut jacobi = DMatrix::<f64>::zeros(m, m);
    for i in 1..m {
        let b = (i as f64).sqrt();
        jacobi[(i, i - 1)] = b;
        jacobi[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pts: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let sym: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let j = m - 1 - i;
            let x = if i == j { 0.0 } else { 0.5 * (pts[i].0 - pts[j].0) };
            (x, 0.5 * (pts[i].1 + pts[j].1))
        })
        .collect();
    let total: f64 = sym.iter().map(|a| a.1).sum();
    let var: f64 = sym.iter().map(|(x, w)| w / total * x * x).sum();
    let scale = var.sqrt().recip();
    sym.into_iter().map(|(x, w)| (x * scale, w / total)).collect()
}

fn check_steps(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter("number of steps must be >= 1".into()))
    } else {
        Ok(())
    }
}

fn check_size(branching: usize, n: usize) -> Result<()> {
    let mut total: usize = 1;
    let mut level: usize = 1;
    for _ in 0..n {
        level = level.saturating_mul(branching);
        total = total.saturating_add(level);
    }
    if total > MAX_TREE_NODES {
        return Err(Error::SizeExceeded {
            what: "tree nodes",
            size: total,
            budget: MAX_TREE_NODES,
        });
    }
    Ok(())
}

/// Grows a tree level by level from `children(step, x)`.
fn grow(n: usize, root: f64, mut children: impl FnMut(usize, f64) -> Result<Vec<(f64, f64)>>) -> Result<ScenarioTree> {
    let mut tree = ScenarioTree::new(n, root);
    let mut frontier: Vec<NodeId> = vec![tree.root()];
    for step in 0..n {
        let mut next = Vec::new();
        for u in frontier {
            for (value, prob) in children(step, tree.value(u))? {
                next.push(tree.add_child(u, prob, value));
            }
        }
        frontier = next;
    }
    Ok(tree)
}

/// Walk on `{0, 1/N, …, 1}` with increments `σ_n/√N · ξ`, ξ quantized.
pub fn random_walk_tree(n: usize, schedule: &VolatilitySchedule, quantization: Quantization) -> Result<ScenarioTree> {
    check_steps(n)?;
    let atoms = quantization.atoms()?;
    check_size(atoms.len(), n)?;
    let scale = (n as f64).sqrt().recip();
    grow(n, 0.0, |step, x| {
        let (s, _) = schedule.coefficients(step, x)?;
        Ok(atoms.iter().map(|&(z, w)| (x + s * scale * z, w)).collect())
    })
}

/// Multiplicative binomial martingale from 1 with factors `1 ± σ√(T/N)`, each ½.
pub fn gbm_tree(n: usize, sigma: f64, horizon: f64) -> Result<ScenarioTree> {
    let a = gbm_step(n, sigma, horizon)?;
    check_size(2, n)?;
    grow(n, 1.0, |_, x| Ok(vec![(x * (1.0 + a), 0.5), (x * (1.0 - a), 0.5)]))
}

pub(crate) fn gbm_step(n: usize, sigma: f64, horizon: f64) -> Result<f64> {
    check_steps(n)?;
    if !(sigma >= 0.0 && horizon > 0.0 && sigma.is_finite() && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("gbm needs sigma >= 0, T > 0; got {sigma}, {horizon}")));
    }
    let a = sigma * (horizon / n as f64).sqrt();
    if a >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "step factor 1 - {a} is not positive; increase N"
        )));
    }
    Ok(a)
}

/// Euler tree on `[0, 1]`: `ΔX = μ Δt ± σ √Δt`, each ½.
pub fn drift_diffusion_tree(n: usize, schedule: &VolatilitySchedule) -> Result<ScenarioTree> {
    check_steps(n)?;
    check_size(2, n)?;
    let dt = 1.0 / n as f64;
    grow(n, 0.0, |step, x| {
        let (s, m) = schedule.coefficients(step, x)?;
        let mid = x + m * dt;
        let half = s * dt.sqrt();
        if half == 0.0 {
            Ok(vec![(mid, 1.0)])
        } else {
            Ok(vec![(mid + half, 0.5), (mid - half, 0.5)])
        }
    })
}

/// Two Euler trees with constant unit volatility and drifts `μ1`, `μ2`.
pub fn two_drift(n: usize, mu1: f64, mu2: f64) -> Result<(ScenarioTree, ScenarioTree)> {
    let p = drift_diffusion_tree(n, &VolatilitySchedule::constant(1.0).with_drift(move |_, _| mu1))?;
    let q = drift_diffusion_tree(n, &VolatilitySchedule::constant(1.0).with_drift(move |_, _| mu2))?;
    Ok((p, q))
}

/// Flat-then-split against split-early: close in `W`, far apart adaptedly.
pub fn figure1(delta: f64) -> (ScenarioTree, ScenarioTree) {
    let mut p = ScenarioTree::new(2, 1.0);
    let mid = p.add_child(0, 1.0, 1.0);
    p.add_child(mid, 0.5, 2.0);
    p.add_child(mid, 0.5, 0.0);
    let mut q = ScenarioTree::new(2, 1.0);
    let up = q.add_child(0, 0.5, 1.0 + delta);
    let down = q.add_child(0, 0.5, 1.0 - delta);
    q.add_child(up, 1.0, 2.0);
    q.add_child(down, 1.0, 0.0);
    (p, q)
}

/// `(P_n, P)`: the first step of `P_n` reveals the sign of the second.
pub fn remark51(n: usize) -> Result<(ScenarioTree, ScenarioTree)> {
    check_steps(n)?;
    let e = 1.0 / n as f64;
    let mut pn = ScenarioTree::new(2, 0.0);
    let up = pn.add_child(0, 0.5, e);
    let down = pn.add_child(0, 0.5, -e);
    pn.add_child(up, 0.5, 1.0);
    pn.add_child(up, 0.5, 0.0);
    pn.add_child(down, 0.5, 0.0);
    pn.add_child(down, 0.5, -1.0);
    let mut p = ScenarioTree::new(2, 0.0);
    let mid = p.add_child(0, 1.0, 0.0);
    p.add_child(mid, 0.25, 1.0);
    p.add_child(mid, 0.5, 0.0);
    p.add_child(mid, 0.25, -1.0);
    Ok((pn, p))
}

/// One period: `P^ε` moves to `ε` w.p. `1 − ε` and to `−ε` w.p. `ε`; `P` stays at 0.
pub fn remark53(eps: f64) -> Result<(ScenarioTree, ScenarioTree)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must lie in (0, 1)")));
    }
    let mut pe = ScenarioTree::new(1, 0.0);
    pe.add_child(0, 1.0 - eps, eps);
    pe.add_child(0, eps, -eps);
    let mut p = ScenarioTree::new(1, 0.0);
    p.add_child(0, 1.0, 0.0);
    Ok((pe, p))
}

/// `(P_ε, P)`: `X_1 = ±ε` or `0`, then an independent `±1` step.
pub fn contraction_cex(eps: f64) -> Result<(ScenarioTree, ScenarioTree)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be > 0")));
    }
    let mut pe = ScenarioTree::new(2, 0.0);
    for x in [eps, -eps] {
        let c = pe.add_child(0, 0.5, x);
        pe.add_child(c, 0.5, 1.0);
        pe.add_child(c, 0.5, -1.0);
    }
    let mut p = ScenarioTree::new(2, 0.0);
    let c = p.add_child(0, 1.0, 0.0);
    p.add_child(c, 0.5, 1.0);
    p.add_child(c, 0.5, -1.0);
    Ok((pe, p))
}

#[derive(Debug, Clone)]
pub struct NamedPair {
    pub name: String,
    pub p: ScenarioTree,
    pub q: ScenarioTree,
}

/// The counterexample pairs at representative parameters.
pub fn counterexample_suite(n: usize, eps: f64) -> Result<Vec<NamedPair>> {
    let pair = |name: &str, (p, q): (ScenarioTree, ScenarioTree)| NamedPair { name: name.into(), p, q };
    Ok(vec![
        pair("figure1", figure1(1.0 / n as f64)),
        pair("remark51", remark51(n)?),
        pair("remark53", remark53(eps)?),
        pair("contraction_cex", contraction_cex(eps)?),
    ])
}

/// `(x_T − K)^+`.
pub fn call_claim(strike: f64) -> Claim {
    Claim::call(strike)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::doob_decompose;

    #[test]
    fn gauss_hermite_moments() {
        for m in 2..=9 {
            let a = Quantization::GaussHermite(m).atoms().unwrap();
            let mean: f64 = a.iter().map(|(x, w)| x * w).sum();
            let var: f64 = a.iter().map(|(x, w)| x * x * w).sum();
            let fourth: f64 = a.iter().map(|(x, w)| x.powi(4) * w).sum();
            assert!(mean.abs() < 1e-15 && (var - 1.0).abs() < 1e-12, "m = {m}");
            if m >= 3 {
                assert!((fourth - 3.0).abs() < 1e-9, "m = {m}: {fourth}");
            }
        }
        assert!(Quantization::GaussHermite(1).atoms().is_err());
    }

    #[test]
    fn walks_are_martingales() {
        let s = VolatilitySchedule::new("state", |n, x| 0.5 + 0.1 * n as f64 + 0.2 * x.abs(), |_, _| 0.0);
        for q in [Quantization::Binomial, Quantization::GaussHermite(3)] {
            let t = random_walk_tree(3, &s, q).unwrap();
            assert!(t.is_martingale(1e-12));
            let d = doob_decompose(&t).unwrap();
            assert!(d.delta_a.iter().all(|a| a.abs() < 1e-12));
        }
        let flat = random_walk_tree(2, &VolatilitySchedule::constant(0.0), Quantization::Binomial).unwrap();
        assert!(flat.leaves().iter().all(|&l| flat.value(l) == 0.0));
    }

    #[test]
    fn gbm_mean_is_one() {
        let t = gbm_tree(6, 0.3, 1.0).unwrap();
        assert!(t.is_martingale(1e-12));
        let p = t.node_probabilities();
        let mean: f64 = t.leaves().iter().map(|&l| p[l] * t.value(l)).sum();
        assert!((mean - 1.0).abs() < 1e-14);
        assert!(gbm_tree(1, 2.0, 1.0).is_err());
        assert!(gbm_tree(30, 0.2, 1.0).is_err());
    }

    #[test]
    fn diffusion_drift_is_exact() {
        let s = VolatilitySchedule::constant(0.7).with_drift(|n, _| 0.3 + n as f64);
        let t = drift_diffusion_tree(3, &s).unwrap();
        let d = doob_decompose(&t).unwrap();
        for u in 0..t.len() {
            if !t.is_leaf(u) {
                let depth = t.ancestry(u).len() - 1;
                assert!((d.delta_a[u] - (0.3 + depth as f64) / 3.0).abs() < 1e-14);
            }
        }
        let pure = drift_diffusion_tree(4, &VolatilitySchedule::constant(0.0).with_drift(|_, _| 1.0)).unwrap();
        assert_eq!(pure.leaves().len(), 1);
    }

    #[test]
    fn counterexamples_are_valid() {
        for pair in counterexample_suite(10, 0.1).unwrap() {
            pair.p.ensure_valid().unwrap();
            pair.q.ensure_valid().unwrap();
            assert_eq!(pair.p.horizon(), pair.q.horizon(), "{}", pair.name);
        }
    }
}
