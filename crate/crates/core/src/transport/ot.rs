//! Classical optimal transport between finite laws.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scenario::{DiscreteDistribution, PathLaw};
use crate::transport::lp::{solve_lp, ConstraintOp, LinearProgram};

/// Joint weights of a coupling, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub row_marginal: Vec<f64>,
    pub col_marginal: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Coupling {
    pub fn zeros(row_marginal: Vec<f64>, col_marginal: Vec<f64>) -> Self {
        let weights = vec![0.0; row_marginal.len() * col_marginal.len()];
        Coupling {
            row_marginal,
            col_marginal,
            weights,
        }
    }

    pub fn product(row_marginal: &[f64], col_marginal: &[f64]) -> Self {
        let mut c = Coupling::zeros(row_marginal.to_vec(), col_marginal.to_vec());
        for (i, a) in row_marginal.iter().enumerate() {
            for (j, b) in col_marginal.iter().enumerate() {
                c.weights[i * col_marginal.len() + j] = a * b;
            }
        }
        c
    }

    pub fn rows(&self) -> usize {
        self.row_marginal.len()
    }

    pub fn cols(&self) -> usize {
        self.col_marginal.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.cols() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, w: f64) {
        let n = self.cols();
        self.weights[i * n + j] = w;
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let n = self.cols();
        self.weights.chunks(n.max(1)).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let n = self.cols();
        let mut out = vec![0.0; n];
        for (k, w) in self.weights.iter().enumerate() {
            out[k % n] += w;
        }
        out
    }

    /// Largest deviation of a marginal or negative entry.
    pub fn marginal_error(&self) -> f64 {
        let r = self
            .row_sums()
            .iter()
            .zip(&self.row_marginal)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let c = self
            .col_sums()
            .iter()
            .zip(&self.col_marginal)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let neg = self.weights.iter().map(|w| -w).fold(0.0, f64::max);
        r.max(c).max(neg)
    }

    pub fn check_marginals(&self, tol: f64) -> Result<()> {
        let e = self.marginal_error();
        if e <= tol {
            Ok(())
        } else {
            Err(Error::InconsistentCoupling(format!(
                "marginal error {e:e} exceeds {tol:e}"
            )))
        }
    }

    pub fn expect(&self, cost: impl Fn(usize, usize) -> f64) -> f64 {
        let n = self.cols();
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(k, w)| w * cost(k / n, k % n))
            .sum()
    }

    /// Dense matrix with a header row of column indices.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row");
        for j in 0..self.cols() {
            let _ = write!(s, ",{j}");
        }
        s.push('\n');
        for i in 0..self.rows() {
            let _ = write!(s, "{i}");
            for j in 0..self.cols() {
                let _ = write!(s, ",{}", self.get(i, j));
            }
            s.push('\n');
        }
        s
    }
}

/// An optimal value together with a coupling attaining it. `cost` is the
/// optimal expected cost and `value` its p-th root.
#[derive(Debug, Clone, PartialEq)]
pub struct Transport {
    pub value: f64,
    pub cost: f64,
    pub coupling: Coupling,
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p = {p} must be >= 1")))
    }
}

/// Exact discrete OT: minimises `Σ γ_ij cost_ij` over couplings of `mu`, `nu`.
pub fn optimal_transport(mu: &[f64], nu: &[f64], cost: &[f64]) -> Result<(f64, Coupling)> {
    let (n, m) = (mu.len(), nu.len());
    if cost.len() != n * m {
        return Err(Error::DimensionMismatch(format!(
            "cost has {} entries, expected {n}x{m}",
            cost.len()
        )));
    }
    if n == 0 || m == 0 {
        return Err(Error::InvalidDistribution("empty marginal".into()));
    }
    if n == 1 || m == 1 {
        let mut c = Coupling::zeros(mu.to_vec(), nu.to_vec());
        for i in 0..n {
            for j in 0..m {
                c.set(i, j, mu[i] * nu[j]);
            }
        }
        let v = c.expect(|i, j| cost[i * m + j]);
        return Ok((v, c));
    }
    let mut lp = LinearProgram::new();
    for &c in cost {
        lp.add_var(c, 0.0, f64::INFINITY);
    }
    for (i, &a) in mu.iter().enumerate() {
        lp.add_constraint((0..m).map(|j| (i * m + j, 1.0)).collect(), ConstraintOp::Eq, a);
    }
    // The last column constraint is implied by the others.
    for (j, &b) in nu.iter().enumerate().take(m - 1) {
        lp.add_constraint((0..n).map(|i| (i * m + j, 1.0)).collect(), ConstraintOp::Eq, b);
    }
    let sol = solve_lp(&lp)?.require_optimal("transport LP")?;
    let mut c = Coupling::zeros(mu.to_vec(), nu.to_vec());
    for (k, &x) in sol.x.iter().enumerate() {
        c.weights[k] = x.max(0.0);
    }
    Ok((sol.value, c))
}

/// Comonotone (north-west corner) coupling of two sorted weight vectors.
pub fn quantile_coupling(mu: &[f64], nu: &[f64]) -> Coupling {
    let mut c = Coupling::zeros(mu.to_vec(), nu.to_vec());
    if mu.is_empty() || nu.is_empty() {
        return c;
    }
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (mu[0], nu[0]);
    while i < mu.len() && j < nu.len() {
        let w = ra.min(rb);
        c.set(i, j, c.get(i, j) + w);
        ra -= w;
        rb -= w;
        if ra <= rb {
            i += 1;
            if i < mu.len() {
                ra = mu[i];
            }
        } else {
            j += 1;
            if j < nu.len() {
                rb = nu[j];
            }
        }
    }
    c
}

/// `W_p` between real-line laws; the quantile coupling is optimal for
/// convex costs of `x - y`.
pub fn wasserstein(mu: &DiscreteDistribution, nu: &DiscreteDistribution, p: f64) -> Result<Transport> {
    check_p(p)?;
    let (x, y) = (mu.values(), nu.values());
    let coupling = quantile_coupling(&mu.weights(), &nu.weights());
    let cost = coupling.expect(|i, j| (x[i] - y[j]).abs().powf(p));
    Ok(Transport {
        value: cost.powf(1.0 / p),
        cost,
        coupling,
    })
}

/// `W_p` between real-line laws through the generic LP; used as a check on
/// [`wasserstein`].
pub fn wasserstein_lp(mu: &DiscreteDistribution, nu: &DiscreteDistribution, p: f64) -> Result<Transport> {
    check_p(p)?;
    let (x, y) = (mu.values(), nu.values());
    let cost: Vec<f64> = x
        .iter()
        .flat_map(|a| y.iter().map(move |b| (a - b).abs().powf(p)))
        .collect();
    let (c, coupling) = optimal_transport(&mu.weights(), &nu.weights(), &cost)?;
    let c = c.max(0.0);
    Ok(Transport {
        value: c.powf(1.0 / p),
        cost: c,
        coupling,
    })
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `W_p` between path laws with the maximum norm on paths.
pub fn wasserstein_paths(p_law: &PathLaw, q_law: &PathLaw, p: f64) -> Result<Transport> {
    check_p(p)?;
    if let (Some(a), Some(b)) = (p_law.paths.first(), q_law.paths.first()) {
        if a.values.len() != b.values.len() {
            return Err(Error::HorizonMismatch(a.values.len() - 1, b.values.len() - 1));
        }
    }
    let cost: Vec<f64> = p_law
        .paths
        .iter()
        .flat_map(|a| {
            q_law
                .paths
                .iter()
                .map(move |b| sup_distance(&a.values, &b.values).powf(p))
        })
        .collect();
    let mu: Vec<f64> = p_law.paths.iter().map(|w| w.prob).collect();
    let nu: Vec<f64> = q_law.paths.iter().map(|w| w.prob).collect();
    let (c, coupling) = optimal_transport(&mu, &nu, &cost)?;
    let c = c.max(0.0);
    Ok(Transport {
        value: c.powf(1.0 / p),
        cost: c,
        coupling,
    })
}
