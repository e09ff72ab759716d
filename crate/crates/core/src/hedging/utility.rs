//! Expected-utility maximisation over bounded strategies and indifference
//! prices.

use serde::Serialize;

use super::claim::{Claim, Strategy};
use super::hedge::{inner_nodes, leaf_exposures, leaf_probabilities};
use super::risk::UtilitySpec;
use crate::error::{Error, Result};
use crate::scenario::ScenarioTree;

pub const GRADIENT_TOL: f64 = 1e-8;

/// `E[U(C + (H·X)_T)]`.
pub fn utility_objective(tree: &ScenarioTree, claim: &Claim, strategy: &Strategy, utility: &UtilitySpec) -> Result<f64> {
    strategy.validate(tree)?;
    let prob = leaf_probabilities(tree);
    Ok(claim
        .payoffs(tree)
        .iter()
        .zip(strategy.gains(tree))
        .zip(prob)
        .map(|((c, g), p)| p * utility.eval(c + g))
        .sum())
}

/// Derivative of [`utility_objective`] in each node position, indexed by
/// node id (zero at leaves). Uses the left derivative of `U`.
pub fn utility_gradient(
    tree: &ScenarioTree,
    claim: &Claim,
    strategy: &Strategy,
    utility: &UtilitySpec,
) -> Result<Vec<f64>> {
    strategy.validate(tree)?;
    let prob = leaf_probabilities(tree);
    let payoffs = claim.payoffs(tree);
    let mut grad = vec![0.0; tree.len()];
    for (leaf, edges) in leaf_exposures(tree).iter().enumerate() {
        let w = payoffs[leaf] + edges.iter().map(|&(u, dx)| strategy.positions[u] * dx).sum::<f64>();
        let d = prob[leaf] * utility.derivative(w);
        for &(u, dx) in edges {
            grad[u] += d * dx;
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityMax {
    /// Objective at the returned strategy; a lower bound on the supremum.
    pub value: f64,
    /// `f(h) + max_{|x| ≤ k} ∇f(h)·(x − h)`, an upper bound by concavity.
    pub upper_bound: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub strategy: Strategy,
}

#[derive(Debug, Clone, Copy)]
pub struct AscentOptions {
    pub gradient_tol: f64,
    pub max_iter: usize,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            gradient_tol: GRADIENT_TOL,
            max_iter: 20_000,
        }
    }
}

/// `sup_{|H| ≤ k} E[U(C + (H·X)_T)]` by projected gradient ascent with
/// Armijo backtracking.
pub fn utility_maximize(tree: &ScenarioTree, claim: &Claim, k: f64, utility: &UtilitySpec) -> Result<UtilityMax> {
    utility_maximize_with(tree, claim, k, utility, AscentOptions::default())
}

pub fn utility_maximize_with(
    tree: &ScenarioTree,
    claim: &Claim,
    k: f64,
    utility: &UtilitySpec,
    opts: AscentOptions,
) -> Result<UtilityMax> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("strategy bound k = {k} must be finite and >= 0")));
    }
    utility.validate()?;
    tree.ensure_valid()?;
    let inner = inner_nodes(tree);
    let f = |s: &Strategy| utility_objective(tree, claim, s, utility);
    let g = |s: &Strategy| utility_gradient(tree, claim, s, utility);
    let project = |s: &Strategy, grad: &[f64], step: f64| {
        let mut out = s.clone();
        for &u in &inner {
            out.positions[u] = (s.positions[u] + step * grad[u]).clamp(-k, k);
        }
        out
    };
    let certificate = |s: &Strategy, val: f64, grad: &[f64]| {
        let lift: f64 = inner.iter().map(|&u| k * grad[u].abs() - grad[u] * s.positions[u]).sum();
        let pg = inner
            .iter()
            .map(|&u| ((s.positions[u] + grad[u]).clamp(-k, k) - s.positions[u]).powi(2))
            .sum::<f64>()
            .sqrt();
        (val + lift, pg)
    };

    let mut h = Strategy::zeros(tree, k);
    let mut val = f(&h)?;
    let mut grad = g(&h)?;
    let mut step = 1.0;
    let mut iterations = 0;
    loop {
        let (upper, pg) = certificate(&h, val, &grad);
        let certified = upper - val <= 1e-12 * (1.0 + val.abs());
        if pg < opts.gradient_tol || certified || iterations >= opts.max_iter {
            return Ok(UtilityMax {
                value: val,
                upper_bound: upper,
                gradient_norm: pg,
                iterations,
                converged: pg < opts.gradient_tol || certified,
                strategy: h,
            });
        }
        iterations += 1;
        step *= 2.0;
        loop {
            let cand = project(&h, &grad, step);
            let ascent: f64 = inner.iter().map(|&u| grad[u] * (cand.positions[u] - h.positions[u])).sum();
            let cv = f(&cand)?;
            if cv >= val + 1e-4 * ascent || step < 1e-16 {
                if step < 1e-16 && cv < val {
                    // Numerical floor reached; keep the current point.
                    let (upper, pg) = certificate(&h, val, &grad);
                    return Ok(UtilityMax {
                        value: val,
                        upper_bound: upper,
                        gradient_norm: pg,
                        iterations,
                        converged: pg < opts.gradient_tol,
                        strategy: h,
                    });
                }
                h = cand;
                val = cv;
                break;
            }
            step *= 0.5;
        }
        grad = g(&h)?;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndifferencePrice {
    pub price: f64,
    /// `f(price)`, the utility difference at the returned price.
    pub residual: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
}

const MAX_BRACKET_DOUBLINGS: usize = 60;
const MAX_BISECTIONS: usize = 200;

/// Solves `sup_H E[U(C − v + (H·X)_T)] = sup_H E[U((H·X)_T)]` for `v`.
pub fn indifference_price(
    tree: &ScenarioTree,
    claim: &Claim,
    k: f64,
    utility: &UtilitySpec,
    tol: f64,
) -> Result<IndifferencePrice> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be > 0")));
    }
    if !utility.is_strictly_increasing() {
        return Err(Error::InvalidParameter("indifference pricing needs a strictly increasing utility".into()));
    }
    let base = utility_maximize(tree, &Claim::zero(), k, utility)?.value;
    let residual = |v: f64| -> Result<f64> { Ok(utility_maximize(tree, &claim.shifted(-v), k, utility)?.value - base) };
    let payoffs = claim.payoffs(tree);
    let lo_c = payoffs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_c = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo_c - 1.0, hi_c + 1.0);
    let mut f_lo = residual(lo)?;
    let mut f_hi = residual(hi)?;
    let mut width = 1.0;
    let mut doublings = 0;
    while !(f_lo > 0.0 && f_hi < 0.0) {
        if doublings == MAX_BRACKET_DOUBLINGS {
            return Err(Error::Solver(format!(
                "no sign change for the indifference equation on [{lo}, {hi}]"
            )));
        }
        width *= 2.0;
        doublings += 1;
        if f_lo <= 0.0 {
            lo = lo_c - width;
            f_lo = residual(lo)?;
        }
        if f_hi >= 0.0 {
            hi = hi_c + width;
            f_hi = residual(hi)?;
        }
    }
    let bracket = (lo, hi);
    for iter in 1..=MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let fm = residual(mid)?;
        if fm.abs() < tol {
            return Ok(IndifferencePrice {
                price: mid,
                residual: fm,
                iterations: iter,
                bracket,
            });
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Solver(format!("bisection did not reach |f| < {tol}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walk(up: f64) -> ScenarioTree {
        let mut t = ScenarioTree::new(2, 0.0);
        let a = t.add_child(0, 0.5, up);
        let b = t.add_child(0, 0.5, -1.0);
        t.add_child(a, 0.5, up + 1.0);
        t.add_child(a, 0.5, up - 1.0);
        t.add_child(b, 0.5, 0.0);
        t.add_child(b, 0.5, -2.0);
        t
    }

    #[test]
    fn martingale_gives_utility_of_zero() {
        let u = UtilitySpec::ExponentialLinear { risk_aversion: 1.0 };
        let r = utility_maximize(&walk(1.0), &Claim::zero(), 1.0, &u).unwrap();
        assert!(r.converged);
        assert!(r.value.abs() < 1e-12 && r.upper_bound.abs() < 1e-9);
    }

    #[test]
    fn drift_is_exploited_up_to_the_bound() {
        let u = UtilitySpec::ExponentialLinear { risk_aversion: 0.2 };
        let r = utility_maximize(&walk(2.0), &Claim::zero(), 0.5, &u).unwrap();
        assert!(r.converged);
        assert!(r.value > 0.0);
        assert!(r.upper_bound - r.value < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = walk(1.5);
        let u = UtilitySpec::Exponential { risk_aversion: 0.8 };
        let c = Claim::call(0.3);
        let s = Strategy::from_fn(&t, 1.0, |n| 0.1 * n as f64 - 0.2).unwrap();
        let g = utility_gradient(&t, &c, &s, &u).unwrap();
        for n in 0..t.len() {
            if t.is_leaf(n) {
                continue;
            }
            let mut a = s.clone();
            let mut b = s.clone();
            a.positions[n] += 1e-6;
            b.positions[n] -= 1e-6;
            let fd = (utility_objective(&t, &c, &a, &u).unwrap() - utility_objective(&t, &c, &b, &u).unwrap()) / 2e-6;
            assert!((fd - g[n]).abs() <= 1e-5 * g[n].abs().max(1e-3));
        }
    }

    #[test]
    fn constant_claim_price_is_the_constant() {
        let u = UtilitySpec::ExponentialLinear { risk_aversion: 0.5 };
        let t = walk(1.2);
        let tol = 1e-7;
        let v = indifference_price(&t, &Claim::constant(0.7), 1.0, &u, tol).unwrap();
        assert!((v.price - 0.7).abs() < 1e-5, "{}", v.price);
        let z = indifference_price(&t, &Claim::zero(), 1.0, &u, tol).unwrap();
        assert!(z.price.abs() < 1e-5);
    }

    #[test]
    fn capped_utility_rejected_for_pricing() {
        let u = UtilitySpec::CappedLinear { cap: 1.0 };
        assert!(indifference_price(&walk(1.0), &Claim::zero(), 1.0, &u, 1e-6).is_err());
    }
}
