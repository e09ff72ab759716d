use awd_core::bicausal::adapted_wasserstein_lp;
use awd_core::hedging::{
    avar, conditional_gain_defect, expected_loss_hedge, indifference_price, optimal_avar_hedge, project_strategy,
    utility_maximize, verify_avar_fixed_strategy, verify_contraction_lipschitz, verify_oce_stability, wealth_distribution,
    Claim, LossMethod, LossSpec, Strategy, UtilitySpec,
};
use awd_core::models::random::{random_claim, random_prefix_strategy, random_tree, rng, TreeShape};
use awd_core::models::{remark51, remark53};
use awd_core::scenario::ScenarioTree;
use rand::Rng;

fn two_step(r: &mut impl Rng) -> ScenarioTree {
    random_tree(
        r,
        TreeShape {
            horizon: 2,
            max_children: 3,
            spread: 1.0,
            martingale: false,
        },
    )
}

fn random_positions(r: &mut impl Rng, tree: &ScenarioTree, k: f64) -> Strategy {
    Strategy::from_fn(tree, k, |_| r.gen_range(-k..=k)).unwrap()
}

#[test]
fn avar_hedge_improves_with_the_bound() {
    let mut r = rng(40);
    for _ in 0..10 {
        let t = two_step(&mut r);
        let c = random_claim(&mut r, 2, 3).unwrap();
        let values: Vec<f64> = [0.0, 0.25, 0.5, 1.0, 2.0]
            .iter()
            .map(|&k| optimal_avar_hedge(&t, &c, k, 0.3).unwrap().value)
            .collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{values:?}");
    }
}

#[test]
fn avar_is_translation_equivariant() {
    let mut r = rng(41);
    for _ in 0..20 {
        let t = two_step(&mut r);
        let h = random_positions(&mut r, &t, 1.0);
        let w = wealth_distribution(&t, &h, None, 0.0).unwrap();
        let a = avar(&w, 0.2).unwrap();
        assert!((avar(&w.shifted(1.5), 0.2).unwrap() - a - 1.5).abs() < 1e-12);
        assert!(a >= w.mean() - 1e-15);
    }
}

#[test]
fn remark51_sign_strategy_wealth() {
    let (n, k) = (5usize, 0.7);
    let (pn, _) = remark51(n).unwrap();
    let root = pn.root();
    let h = Strategy::from_fn(&pn, k, |u| if u == root { 0.0 } else { k * pn.value(u).signum() }).unwrap();
    let w = wealth_distribution(&pn, &h, None, 0.0).unwrap();
    let e = 1.0 / n as f64;
    let atoms: Vec<(f64, f64)> = w.atoms().iter().map(|a| (a.value, a.weight)).collect();
    assert_eq!(atoms.len(), 2);
    assert!((atoms[0].0 + k * e).abs() < 1e-12 && (atoms[0].1 - 0.5).abs() < 1e-12);
    assert!((atoms[1].0 - k * (1.0 - e)).abs() < 1e-12 && (atoms[1].1 - 0.5).abs() < 1e-12);
}

#[test]
fn smooth_loss_hedge_is_certified() {
    let mut r = rng(42);
    for _ in 0..5 {
        let t = two_step(&mut r);
        let c = random_claim(&mut r, 2, 2).unwrap();
        let smooth = expected_loss_hedge(&t, &c, 1.0, 0.1, &LossSpec::Exponential { rate: 1.0 }).unwrap();
        assert!(smooth.gap < 1e-6);
        let lp = expected_loss_hedge(&t, &c, 1.0, 0.1, &LossSpec::positive_part()).unwrap();
        assert_eq!(lp.method, LossMethod::Lp);
        let w = wealth_distribution(&t, &lp.strategy, Some(&c), 0.1).unwrap();
        assert!((w.expect(|x| x.max(0.0)) - lp.value).abs() < 1e-9);
    }
}

#[test]
fn projection_is_bounded_and_preserves_conditional_gains() {
    let mut r = rng(43);
    for _ in 0..10 {
        let tp = two_step(&mut r);
        let tq = two_step(&mut r);
        let k = r.gen_range(0.1..2.0);
        let h = random_positions(&mut r, &tp, k);
        let pi = adapted_wasserstein_lp(&tp, &tq, 1.0).unwrap().coupling;
        let g = project_strategy(&h, &tp, &pi, &tq).unwrap();
        assert!(g.positions.iter().all(|x| x.abs() <= k + 1e-12));
        assert!(conditional_gain_defect(&h, &g, &tp, &pi, &tq).unwrap() < 1e-9);
    }
}

#[test]
fn indifference_price_shifts_with_the_claim() {
    let mut r = rng(44);
    let u = UtilitySpec::ExponentialLinear { risk_aversion: 1.0 };
    for _ in 0..3 {
        let t = two_step(&mut r);
        let c = random_claim(&mut r, 2, 2).unwrap();
        let tol = 1e-7;
        let base = indifference_price(&t, &c, 0.5, &u, tol).unwrap().price;
        let shifted = indifference_price(&t, &c.shifted(0.8), 0.5, &u, tol).unwrap().price;
        assert!((shifted - base - 0.8).abs() <= 2.0 * tol);
    }
}

#[test]
fn indifference_price_matches_grid_search() {
    let mut r = rng(45);
    let u = UtilitySpec::ExponentialLinear { risk_aversion: 2.0 };
    let t = two_step(&mut r);
    let c = random_claim(&mut r, 2, 2).unwrap();
    let k = 0.5;
    let price = indifference_price(&t, &c, k, &u, 1e-8).unwrap().price;
    let reference = utility_maximize(&t, &Claim::zero(), k, &u).unwrap().value;
    let gap = |v: f64| utility_maximize(&t, &c.shifted(-v), k, &u).unwrap().value - reference;
    let payoffs = c.payoffs(&t);
    let lo = payoffs.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = payoffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let steps = 400;
    let h = (hi - lo) / steps as f64;
    let grid = (0..=steps).map(|i| lo + i as f64 * h).find(|&v| gap(v) <= 0.0).unwrap();
    assert!(price <= grid + 1e-9 && price >= grid - h - 1e-9, "price {price}, grid {grid}");
}

#[test]
fn unbounded_positions_break_avar_on_remark53() {
    let (pe, _) = remark53(0.1).unwrap();
    let mut last = f64::INFINITY;
    for n in [1.0, 10.0, 100.0] {
        // Long n units: the loss −n·ΔX is negative on the likely up move.
        let h = Strategy::from_fn(&pe, n, |_| n).unwrap();
        let v = avar(&wealth_distribution(&pe, &h, Some(&Claim::zero()), 0.0).unwrap(), 0.5).unwrap();
        assert!(v < last);
        last = v;
    }
    assert!(last < -5.0);
    assert!(optimal_avar_hedge(&pe, &Claim::zero(), 1.0, 0.5).unwrap().value.is_finite());
}

#[test]
fn side_verifiers_hold() {
    let mut r = rng(46);
    for _ in 0..10 {
        let tp = two_step(&mut r);
        let tq = two_step(&mut r);
        let c = random_claim(&mut r, 2, 2).unwrap();
        let k = r.gen_range(0.1..1.5);
        let prefix = random_prefix_strategy(&mut r, 2, k);
        verify_avar_fixed_strategy(&tp, &tq, &prefix, &c, k, 0.25).unwrap().assert_holds().unwrap();
        verify_oce_stability(&tp, &tq, &c, k, &LossSpec::avar(0.4).unwrap()).unwrap().assert_holds().unwrap();
        for p in [1.0, 2.0] {
            verify_contraction_lipschitz(&tp, &tq, &prefix, &c, k, p).unwrap().assert_holds().unwrap();
        }
    }
}

/// With `U = min(x, 5)` every reachable wealth under `P_n` is below the cap,
/// so the attainable gap is `k(½ − 1/n)`, short of the required `0.9 k`.
#[test]
#[ignore = "unattainable: the utility gap on remark51 is bounded by k(1/2 - 1/n); see README"]
fn remark51_utility_gap_reaches_ninety_percent() {
    let (pn, p) = remark51(100).unwrap();
    let u = UtilitySpec::CappedLinear { cap: 5.0 };
    let k = 1.0;
    let sup = |t: &ScenarioTree| utility_maximize(t, &Claim::zero(), k, &u).unwrap().value;
    let gap = (sup(&pn) - sup(&p)).abs();
    assert!(gap >= 0.9 * (u.eval(k) - u.eval(0.0)), "gap {gap}");
}
