//! Recombining binomial lattices for step counts where trees cannot be
//! unrolled.
//!
//! All lattices here move up or down with probability ½ by a fixed step,
//! additively or multiplicatively, so they are martingales and the state
//! after `n` steps is the number of up moves.

use serde::Serialize;

use super::{check_size, check_steps, gbm_step};
use crate::error::{Error, Result};
use crate::scenario::{DiscreteDistribution, ScenarioTree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    /// `x ± a`.
    Additive,
    /// `x (1 ± a)`.
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinomialLattice {
    pub kind: LatticeKind,
    pub steps: usize,
    pub start: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationHedge {
    /// Initial capital of the replicating strategy, `E[C]`.
    pub value: f64,
    pub max_abs_delta: f64,
}

/// `C(n, j) / 2^n` for `j = 0..=n`.
pub fn binomial_weights(n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n + 1);
    let mut c = 0.5f64.powi(n as i32);
    for j in 0..=n {
        w.push(c);
        c *= (n - j) as f64 / (j + 1) as f64;
    }
    w
}

impl BinomialLattice {
    /// Random walk `σ/√N · (±1)` started at 0 over `[0, 1]`.
    pub fn walk(steps: usize, sigma: f64) -> Result<Self> {
        check_steps(steps)?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma = {sigma} must be >= 0")));
        }
        Ok(BinomialLattice {
            kind: LatticeKind::Additive,
            steps,
            start: 0.0,
            step: sigma / (steps as f64).sqrt(),
        })
    }

    /// The same process as [`super::gbm_tree`].
    pub fn gbm(steps: usize, sigma: f64, horizon: f64) -> Result<Self> {
        Ok(BinomialLattice {
            kind: LatticeKind::Multiplicative,
            steps,
            start: 1.0,
            step: gbm_step(steps, sigma, horizon)?,
        })
    }

    /// State after `n` steps with `j` up moves.
    pub fn value(&self, n: usize, j: usize) -> f64 {
        let (up, down) = (j as f64, (n - j) as f64);
        match self.kind {
            LatticeKind::Additive => self.start + self.step * (up - down),
            LatticeKind::Multiplicative => self.start * (1.0 + self.step).powf(up) * (1.0 - self.step).powf(down),
        }
    }

    /// Martingale increment size `|ΔX|` out of state `(n, j)`.
    fn increment(&self, n: usize, j: usize) -> f64 {
        match self.kind {
            LatticeKind::Additive => self.step,
            LatticeKind::Multiplicative => self.step * self.value(n, j),
        }
    }

    pub fn terminal_law(&self) -> Result<DiscreteDistribution> {
        let w = binomial_weights(self.steps);
        DiscreteDistribution::new((0..=self.steps).map(|j| (self.value(self.steps, j), w[j])))
    }

    /// Unrolls into a full binary tree, up child first.
    pub fn to_tree(&self) -> Result<ScenarioTree> {
        check_size(2, self.steps)?;
        let mut tree = ScenarioTree::new(self.steps, self.start);
        let mut frontier = vec![(tree.root(), 0usize)];
        for n in 0..self.steps {
            let mut next = Vec::with_capacity(frontier.len() * 2);
            for (u, j) in frontier {
                next.push((tree.add_child(u, 0.5, self.value(n + 1, j + 1)), j + 1));
                next.push((tree.add_child(u, 0.5, self.value(n + 1, j)), j));
            }
            frontier = next;
        }
        Ok(tree)
    }

    fn check_pair(&self, other: &BinomialLattice) -> Result<()> {
        if self.steps != other.steps || self.kind != other.kind {
            return Err(Error::InvalidParameter("lattices differ in step count or kind".into()));
        }
        Ok(())
    }

    /// Squared cost `E[Σ_n (ΔM_n − ΔN_n)²]` of the coupling that moves both
    /// lattices up together, i.e. `AW_2` squared along the synchronous coupling.
    pub fn synchronous_cost_squared(&self, other: &BinomialLattice) -> Result<f64> {
        self.check_pair(other)?;
        let mut total = 0.0;
        for n in 0..self.steps {
            let w = binomial_weights(n);
            for (j, wj) in w.iter().enumerate() {
                let d = self.increment(n, j) - other.increment(n, j);
                total += wj * d * d;
            }
        }
        Ok(total)
    }

    /// Closed form of [`Self::synchronous_cost_squared`] for two GBM lattices
    /// from 1: `(1+a²)^N − 2(1+ab)^N + (1+b²)^N`.
    pub fn gbm_synchronous_closed_form(&self, other: &BinomialLattice) -> Result<f64> {
        self.check_pair(other)?;
        if self.kind != LatticeKind::Multiplicative || self.start != 1.0 || other.start != 1.0 {
            return Err(Error::InvalidParameter("closed form needs multiplicative lattices from 1".into()));
        }
        let (a, b, n) = (self.step, other.step, self.steps as i32);
        Ok((1.0 + a * a).powi(n) - 2.0 * (1.0 + a * b).powi(n) + (1.0 + b * b).powi(n))
    }

    /// `AW_p` between two additive lattices, where the bound is attained:
    /// every step differs by at least `|a − b|` under any coupling, and
    /// the synchronous coupling achieves exactly that.
    pub fn additive_distance(&self, other: &BinomialLattice) -> Result<f64> {
        self.check_pair(other)?;
        if self.kind != LatticeKind::Additive {
            return Err(Error::InvalidParameter("exact distance is for additive lattices".into()));
        }
        Ok((self.steps as f64).sqrt() * (self.step - other.step).abs())
    }

    /// Replicates a terminal payoff by backward induction.
    ///
    /// When every delta lies in `[−k, k]` the hedged position is the constant
    /// `E[C]`. Since AVaR dominates the mean, which equals `E[C]` for every
    /// strategy on a martingale, `E[C]` is then the optimal AVaR hedge value
    /// for all `α`.
    pub fn replication_avar_hedge(&self, payoff: impl Fn(f64) -> f64, k: f64) -> Result<ReplicationHedge> {
        let n = self.steps;
        let mut v: Vec<f64> = (0..=n).map(|j| payoff(self.value(n, j))).collect();
        let mut max_delta: f64 = 0.0;
        for step in (0..n).rev() {
            for j in 0..=step {
                let (up, down) = (self.value(step + 1, j + 1), self.value(step + 1, j));
                if up > down {
                    max_delta = max_delta.max(((v[j + 1] - v[j]) / (up - down)).abs());
                }
                v[j] = 0.5 * (v[j] + v[j + 1]);
            }
            v.truncate(step + 1);
        }
        if max_delta > k + 1e-12 {
            return Err(Error::NotCertifiable(format!(
                "replicating delta {max_delta} exceeds the bound k = {k}"
            )));
        }
        Ok(ReplicationHedge {
            value: v[0],
            max_abs_delta: max_delta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicausal::synchronous_distance;
    use crate::hedging::{optimal_avar_hedge, Claim};

    #[test]
    fn weights_sum_to_one() {
        for n in [0, 1, 7, 100] {
            let s: f64 = binomial_weights(n).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lattice_sync_cost_matches_tree() {
        let a = BinomialLattice::gbm(5, 0.2, 1.0).unwrap();
        let b = BinomialLattice::gbm(5, 0.3, 1.0).unwrap();
        let tree = synchronous_distance(&a.to_tree().unwrap(), &b.to_tree().unwrap(), 2.0).unwrap();
        let lat = a.synchronous_cost_squared(&b).unwrap();
        assert!((tree.cost - lat).abs() < 1e-14);
        assert!((a.gbm_synchronous_closed_form(&b).unwrap() - lat).abs() < 1e-14);
    }

    #[test]
    fn replication_matches_lp_hedge() {
        let a = BinomialLattice::walk(6, 0.4).unwrap();
        let r = a.replication_avar_hedge(|x| x.max(0.0), 1.0).unwrap();
        let lp = optimal_avar_hedge(&a.to_tree().unwrap(), &Claim::call(0.0), 1.0, 0.3).unwrap();
        assert!((r.value - lp.value).abs() < 1e-9);
        assert!(a.replication_avar_hedge(|x| 5.0 * x.max(0.0), 1.0).is_err());
    }
}
