//! Transfer of a strategy along a bi-causal coupling.

use super::claim::Strategy;
use crate::bicausal::BiCausalCoupling;
use crate::error::{Error, Result};
use crate::scenario::ScenarioTree;

const MASS_TOL: f64 = 1e-9;

fn check_shapes(tp: &ScenarioTree, tq: &ScenarioTree, pi: &BiCausalCoupling) -> Result<()> {
    if tp.horizon() != tq.horizon() {
        return Err(Error::HorizonMismatch(tp.horizon(), tq.horizon()));
    }
    if pi.leaves_p != tp.leaves() || pi.leaves_q != tq.leaves() {
        return Err(Error::InconsistentCoupling("coupling leaves do not match the trees".into()));
    }
    Ok(())
}

/// `G_t(Y) = E_π[H_t(X) | Y]`, evaluated at every non-terminal node of `tq`.
pub fn project_strategy(
    h: &Strategy,
    tp: &ScenarioTree,
    pi: &BiCausalCoupling,
    tq: &ScenarioTree,
) -> Result<Strategy> {
    h.validate(tp)?;
    check_shapes(tp, tq, pi)?;
    let anc_p: Vec<Vec<usize>> = pi.leaves_p.iter().map(|&l| tp.ancestry(l)).collect();
    let anc_q: Vec<Vec<usize>> = pi.leaves_q.iter().map(|&l| tq.ancestry(l)).collect();
    let mut num = vec![0.0; tq.len()];
    let mut mass = vec![0.0; tq.len()];
    for (i, ap) in anc_p.iter().enumerate() {
        for (j, aq) in anc_q.iter().enumerate() {
            let w = pi.get(i, j);
            if w == 0.0 {
                continue;
            }
            for t in 0..tq.horizon() {
                num[aq[t]] += w * h.positions[ap[t]];
                mass[aq[t]] += w;
            }
        }
    }
    let prob = tq.node_probabilities();
    let mut g = Strategy::zeros(tq, h.bound);
    for v in 0..tq.len() {
        if tq.is_leaf(v) {
            continue;
        }
        if mass[v] <= 0.0 || (mass[v] - prob[v]).abs() > MASS_TOL {
            return Err(Error::InconsistentCoupling(format!(
                "coupling puts mass {} on node {} of probability {}",
                mass[v],
                tq.node_name(v),
                prob[v]
            )));
        }
        // A convex combination of values in [−k, k]; clamp only rounding.
        g.positions[v] = (num[v] / mass[v]).clamp(-h.bound, h.bound);
    }
    Ok(g)
}

/// Largest deviation over Q-leaves between `(G·Y)_T` and
/// `E_π[(H·Y)_T | Y]`.
pub fn conditional_gain_defect(
    h: &Strategy,
    g: &Strategy,
    tp: &ScenarioTree,
    pi: &BiCausalCoupling,
    tq: &ScenarioTree,
) -> Result<f64> {
    h.validate(tp)?;
    g.validate(tq)?;
    check_shapes(tp, tq, pi)?;
    let anc_p: Vec<Vec<usize>> = pi.leaves_p.iter().map(|&l| tp.ancestry(l)).collect();
    let g_gains = g.gains(tq);
    let mut worst: f64 = 0.0;
    for (j, &lq) in pi.leaves_q.iter().enumerate() {
        let aq = tq.ancestry(lq);
        let mut mass = 0.0;
        let mut cond = 0.0;
        for (i, ap) in anc_p.iter().enumerate() {
            let w = pi.get(i, j);
            if w == 0.0 {
                continue;
            }
            let mixed: f64 = (0..tq.horizon())
                .map(|t| h.positions[ap[t]] * (tq.value(aq[t + 1]) - tq.value(aq[t])))
                .sum();
            mass += w;
            cond += w * mixed;
        }
        if mass > 0.0 {
            worst = worst.max((g_gains[j] - cond / mass).abs());
        }
    }
    Ok(worst)
}
