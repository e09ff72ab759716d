//! Numerical checks of the stability bounds between two tree models.

use std::collections::BTreeMap;

use serde::Serialize;

use super::claim::{Claim, PrefixStrategy, Strategy};
use super::hedge::{optimal_avar_hedge, optimal_oce_hedge, wealth_distribution};
use super::project::{conditional_gain_defect, project_strategy};
use super::risk::{avar, LossSpec};
use crate::bicausal::{adapted_wasserstein_lp, pair_cost, AdaptedDistance};
use crate::decompose::{seminorm, ConstantsLedger};
use crate::error::{Error, Result};
use crate::scenario::{DiscreteDistribution, ScenarioTree};
use crate::transport::{wasserstein, weak_ot};

pub const SLACK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Whi,
    Shi,
    AvarLipschitz,
    AvarFixedStrategy,
    Contraction,
    ContractionLipschitz,
    OceLipschitz,
}

/// One inequality `lhs ≤ rhs` with everything that went into `rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub slack: f64,
    pub holds: bool,
    pub constants: BTreeMap<String, f64>,
    /// Named summands and inputs of `rhs` and `lhs`.
    pub terms: BTreeMap<String, f64>,
    pub solver: String,
}

impl BoundReport {
    fn new(kind: BoundKind, lhs: f64, rhs: f64, solver: &str) -> Self {
        let slack = rhs - lhs;
        BoundReport {
            kind,
            lhs,
            rhs,
            slack,
            holds: slack >= -SLACK_TOL,
            constants: BTreeMap::new(),
            terms: BTreeMap::new(),
            solver: solver.to_string(),
        }
    }

    fn constant(mut self, name: &str, v: f64) -> Self {
        self.constants.insert(name.to_string(), v);
        self
    }

    fn term(mut self, name: &str, v: f64) -> Self {
        self.terms.insert(name.to_string(), v);
        self
    }

    /// Converts a violated bound into an error.
    pub fn assert_holds(&self) -> Result<()> {
        if self.holds {
            Ok(())
        } else {
            Err(Error::NotCertifiable(format!(
                "{:?} fails: lhs {} > rhs {} (slack {})",
                self.kind, self.lhs, self.rhs, self.slack
            )))
        }
    }
}

/// A bound together with the strategy transferred to the second model.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub report: BoundReport,
    pub projected: Strategy,
}

const LP_SOLVER: &str = "bicausal-lp";

fn mean_positive_part(d: &DiscreteDistribution) -> f64 {
    d.expect(|x| x.max(0.0))
}

fn check_strategy_bound(bound: f64, k: f64) -> Result<()> {
    if bound > k + 1e-12 {
        return Err(Error::InvalidParameter(format!("strategy bound {bound} exceeds k = {k}")));
    }
    Ok(())
}

/// Weak hedging inequality at an optimal `AW_1` coupling.
pub fn verify_whi(
    tp: &ScenarioTree,
    tq: &ScenarioTree,
    h: &Strategy,
    claim: &Claim,
    m: f64,
    k: f64,
) -> Result<TransferReport> {
    check_strategy_bound(h.bound, k)?;
    let ledger = ConstantsLedger::default();
    let aw1 = adapted_wasserstein_lp(tp, tq, 1.0)?;
    let g = project_strategy(h, tp, &aw1.coupling, tq)?;
    let defect = conditional_gain_defect(h, &g, tp, &aw1.coupling, tq)?;
    let lhs = mean_positive_part(&wealth_distribution(tq, &g, Some(claim), m)?);
    let base = mean_positive_part(&wealth_distribution(tp, h, Some(claim), m)?);
    let rate = ledger.b1 * (k + claim.lipschitz());
    let report = BoundReport::new(BoundKind::Whi, lhs, base + rate * aw1.value, LP_SOLVER)
        .constant("b1", ledger.b1)
        .constant("k", k)
        .constant("L", claim.lipschitz())
        .term("base_error", base)
        .term("aw1", aw1.value)
        .term("projection_defect", defect);
    Ok(TransferReport { report, projected: g })
}

/// Strong hedging inequality: the same prefix strategy runs in both models.
pub fn verify_shi(
    tp: &ScenarioTree,
    tq: &ScenarioTree,
    h: &PrefixStrategy,
    claim: &Claim,
    m: f64,
    k: f64,
) -> Result<BoundReport> {
    check_strategy_bound(h.bound, k)?;
    h.certify(&[tp, tq])?;
    let ledger = ConstantsLedger::default();
    let aw1 = adapted_wasserstein_lp(tp, tq, 1.0)?;
    let aw2 = adapted_wasserstein_lp(tp, tq, 2.0)?;
    let beta = ledger.beta(h.lipschitz, seminorm(tp, 2.0)?, seminorm(tq, 2.0)?);
    let hp = h.on_tree(tp)?;
    let hq = h.on_tree(tq)?;
    let lhs = mean_positive_part(&wealth_distribution(tq, &hq, Some(claim), m)?);
    let base = mean_positive_part(&wealth_distribution(tp, &hp, Some(claim), m)?);
    let rate = ledger.b1 * (k + claim.lipschitz());
    let rhs = base + rate * aw1.value + beta * aw2.value;
    Ok(BoundReport::new(BoundKind::Shi, lhs, rhs, LP_SOLVER)
        .constant("b1", ledger.b1)
        .constant("k", k)
        .constant("L", claim.lipschitz())
        .constant("L_strategy", h.lipschitz)
        .constant("beta", beta)
        .term("base_error", base)
        .term("aw1", aw1.value)
        .term("aw2", aw2.value))
}

/// `|inf_H AVaR^P − inf_H AVaR^Q| ≤ r · AW_1` with both infima from the hedge LP.
pub fn verify_avar_lipschitz(
    tp: &ScenarioTree,
    tq: &ScenarioTree,
    claim: &Claim,
    k: f64,
    alpha: f64,
) -> Result<BoundReport> {
    let ledger = ConstantsLedger::default();
    let vp = optimal_avar_hedge(tp, claim, k, alpha)?.value;
    let vq = optimal_avar_hedge(tq, claim, k, alpha)?.value;
    let aw1 = adapted_wasserstein_lp(tp, tq, 1.0)?;
    let r = ledger.avar_rate(claim.lipschitz(), k, alpha);
    Ok(BoundReport::new(BoundKind::AvarLipschitz, (vp - vq).abs(), r * aw1.value, LP_SOLVER)
        .constant("b1", ledger.b1)
        .constant("r", r)
        .constant("alpha", alpha)
        .term("value_p", vp)
        .term("value_q", vq)
        .term("aw1", aw1.value))
}

/// Fixed prefix-Lipschitz strategy: `|AVaR^P(C − H·X) − AVaR^Q(C − H·Y)|`
/// against `r · AW_1 + (β/α) · AW_2`.
pub fn verify_avar_fixed_strategy(
    tp: &ScenarioTree,
    tq: &ScenarioTree,
    h: &PrefixStrategy,
    claim: &Claim,
    k: f64,
    alpha: f64,
) -> Result<BoundReport> {
    check_strategy_bound(h.bound, k)?;
    h.certify(&[tp, tq])?;
    let ledger = ConstantsLedger::default();
    let ap = avar(&wealth_distribution(tp, &h.on_tree(tp)?, Some(claim), 0.0)?, alpha)?;
    let aq = avar(&wealth_distribution(tq, &h.on_tree(tq)?, Some(claim), 0.0)?, alpha)?;
    let aw1 = adapted_wasserstein_lp(tp, tq, 1.0)?;
    let aw2 = adapted_wasserstein_lp(tp, tq, 2.0)?;
    let r = ledger.avar_rate(claim.lipschitz(), k, alpha);
    let beta = ledger.beta(h.lipschitz, seminorm(tp, 2.0)?, seminorm(tq, 2.0)?);
    let rhs = r * aw1.value + beta / alpha * aw2.value;
    Ok(BoundReport::new(BoundKind::AvarFixedStrategy, (ap - aq).abs(), rhs, LP_SOLVER)
        .constant("r", r)
        .constant("beta", beta)
        .constant("alpha", alpha)
        .term("avar_p", ap)
        .term("avar_q", aq)
        .term("aw1", aw1.value)
        .term("aw2", aw2.value))
}

fn payoff_law(tree: &ScenarioTree, h: &Strategy, claim: &Claim) -> Result<DiscreteDistribution> {
    let prob = tree.node_probabilities();
    let values = claim.payoffs(tree).into_iter().zip(h.gains(tree)).map(|(c, g)| c + g);
    DiscreteDistribution::new(values.zip(tree.leaves().into_iter().map(|l| prob[l])))
}

fn check_weak_p(p: f64) -> Result<()> {
    if p == 1.0 || p == 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("weak transport is available for p = 1, 2; got {p}")))
    }
}

/// `d_p^w(law_Q(C + G·Y), law_P(C + H·X)) ≤ 2^{(p−1)/p} b_p^{1/p} (k + L) AW_p`,
/// with `G` projected along an optimal `AW_p` coupling.
pub fn verify_contraction(
    tp: &ScenarioTree,
    tq: &ScenarioTree,
    h: &Strategy,
    claim: &Claim,
    k: f64,
    p: f64,
) -> Result<TransferReport> {
    check_weak_p(p)?;
    check_strategy_bound(h.bound, k)?;
    let ledger = ConstantsLedger::default();
    let AdaptedDistance { value: awp, coupling, .. } = adapted_wasserstein_lp(tp, tq, p)?;
    let g = project_strategy(h, tp, &coupling, tq)?;
    let law_q = payoff_law(tq, &g, claim)?;
    let law_p = payoff_law(tp, h, claim)?;
    let weak = weak_ot(&law_q, &law_p, p)?;
    let factor = ledger.contraction_factor(p, k, claim.lipschitz())?;
    let report = BoundReport::new(BoundKind::Contraction, weak.value, factor * awp, LP_SOLVER)
        .constant("factor", factor)
        .constant("p", p)
        .constant("bdg", ledger.bdg(p)?)
        .term("awp", awp)
        .term("weak_gap", weak.gap);
    Ok(TransferReport { report, projected: g })
}

/// Same prefix strategy in both models, measured in plain `d_p`:
/// `d_p ≤ 2^{(3p−3)/p} b_p^{1/p} (k + L) E_π[c_p]^{1/p} + α^{1/p} E_π[c_{2p}]^{1/(2p)}`.
pub fn verify_contraction_lipschitz(
    tp: &ScenarioTree,
    tq: &ScenarioTree,
    h: &PrefixStrategy,
    claim: &Claim,
    k: f64,
    p: f64,
) -> Result<BoundReport> {
    check_strategy_bound(h.bound, k)?;
    h.certify(&[tp, tq])?;
    let ledger = ConstantsLedger::default();
    let AdaptedDistance { value: awp, coupling, .. } = adapted_wasserstein_lp(tp, tq, p)?;
    let c2p = coupling.expect(&pair_cost(tp, tq, 2.0 * p)?);
    let alpha = ledger.strategy_gap_alpha(p, h.lipschitz, seminorm(tp, 2.0 * p)?, seminorm(tq, 2.0 * p)?)?;
    let lead = 2f64.powf((3.0 * p - 3.0) / p) * ledger.bdg(p)?.powf(1.0 / p) * (k + claim.lipschitz());
    let rhs = lead * awp + alpha.powf(1.0 / p) * c2p.powf(1.0 / (2.0 * p));
    let law_q = payoff_law(tq, &h.on_tree(tq)?, claim)?;
    let law_p = payoff_law(tp, &h.on_tree(tp)?, claim)?;
    let dp = wasserstein(&law_q, &law_p, p)?.value;
    Ok(BoundReport::new(BoundKind::ContractionLipschitz, dp, rhs, LP_SOLVER)
        .constant("lead", lead)
        .constant("strategy_gap_alpha", alpha)
        .constant("p", p)
        .term("awp", awp)
        .term("cost_2p", c2p))
}

/// OCE analogue of [`verify_avar_lipschitz`] with rate `b_1 (L + k) Lip(ℓ)`;
/// needs a loss with a global Lipschitz constant.
pub fn verify_oce_stability(
    tp: &ScenarioTree,
    tq: &ScenarioTree,
    claim: &Claim,
    k: f64,
    loss: &LossSpec,
) -> Result<BoundReport> {
    let lip = loss
        .lipschitz()
        .ok_or_else(|| Error::NotCertifiable("OCE stability needs a globally Lipschitz loss".into()))?;
    let ledger = ConstantsLedger::default();
    let vp = optimal_oce_hedge(tp, claim, k, loss)?.value;
    let vq = optimal_oce_hedge(tq, claim, k, loss)?.value;
    let aw1 = adapted_wasserstein_lp(tp, tq, 1.0)?;
    let r = ledger.b1 * (claim.lipschitz() + k) * lip;
    Ok(BoundReport::new(BoundKind::OceLipschitz, (vp - vq).abs(), r * aw1.value, LP_SOLVER)
        .constant("r", r)
        .constant("loss_lipschitz", lip)
        .term("value_p", vp)
        .term("value_q", vq)
        .term("aw1", aw1.value))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walk(up: f64, down: f64) -> ScenarioTree {
        let mut t = ScenarioTree::new(2, 0.0);
        for x in [up, down] {
            let c = t.add_child(0, 0.5, x);
            t.add_child(c, 0.5, x + 1.0);
            t.add_child(c, 0.5, x - 1.0);
        }
        t
    }

    #[test]
    fn identity_pairs_have_zero_rate_terms() {
        let t = walk(1.0, -1.0);
        let h = Strategy::from_fn(&t, 1.0, |u| if u == 0 { 0.5 } else { -0.25 }).unwrap();
        let c = Claim::call(0.0);
        let w = verify_whi(&t, &t, &h, &c, 0.2, 1.0).unwrap();
        assert!(w.report.holds && w.report.slack.abs() < 1e-9);
        assert!(w.report.terms["projection_defect"] < 1e-9);
        let a = verify_avar_lipschitz(&t, &t, &c, 1.0, 0.5).unwrap();
        assert!(a.lhs < 1e-9 && a.holds);
        let k = verify_contraction(&t, &t, &h, &c, 1.0, 2.0).unwrap();
        assert!(k.report.lhs < 1e-6 && k.report.holds);
    }

    #[test]
    fn volatility_shift_pair() {
        let tp = walk(1.0, -1.0);
        let tq = walk(1.5, -1.5);
        let c = Claim::call(0.5);
        let s = PrefixStrategy::affine_clamped(1.0, vec![0.2, 0.0], vec![vec![0.0], vec![0.0, 0.5]]);
        for r in [
            verify_shi(&tp, &tq, &s, &c, 0.1, 1.0).unwrap(),
            verify_avar_fixed_strategy(&tp, &tq, &s, &c, 1.0, 0.4).unwrap(),
            verify_contraction_lipschitz(&tp, &tq, &s, &c, 1.0, 1.0).unwrap(),
            verify_oce_stability(&tp, &tq, &c, 1.0, &LossSpec::avar(0.4).unwrap()).unwrap(),
        ] {
            assert!(r.holds, "{r:?}");
        }
    }

    #[test]
    fn smooth_loss_is_not_certifiable() {
        let t = walk(1.0, -1.0);
        let e = verify_oce_stability(&t, &t, &Claim::zero(), 1.0, &LossSpec::Exponential { rate: 1.0 });
        assert!(matches!(e, Err(Error::NotCertifiable(_))));
    }

    #[test]
    fn report_serialises() {
        let t = walk(1.0, -1.0);
        let r = verify_avar_lipschitz(&t, &t, &Claim::call(0.0), 1.0, 0.5).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["kind"], "avar_lipschitz");
        assert!(json["constants"]["r"].as_f64().unwrap() > 0.0);
    }
}
