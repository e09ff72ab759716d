use awd_core::bicausal::{
    adapted_wasserstein_dp, adapted_wasserstein_lp, adapted_wasserstein_lp_with, pair_cost, synchronous_distance,
    BiCausalCoupling, LpOptions, StageCost,
};
use awd_core::decompose::{doob_decompose, ConstantsLedger};
use awd_core::models::random::{random_martingale_tree, random_tree, rng, TreeShape};
use awd_core::models::{contraction_cex, random_walk_tree, Quantization, VolatilitySchedule};
use awd_core::scenario::ScenarioTree;
use awd_core::transport::{wasserstein_paths, Backend};
use rand::Rng;

fn shape(r: &mut impl Rng) -> TreeShape {
    TreeShape {
        horizon: r.gen_range(1..=2),
        max_children: 3,
        spread: 1.0,
        martingale: r.gen_bool(0.5),
    }
}

#[test]
fn dense_simplex_handles_degenerate_self_pair() {
    // A 36-node tree whose self-pair LP once stalled in phase one.
    let mut r = rng(1);
    let mut tree = None;
    for i in 0..3 {
        let s = TreeShape {
            horizon: r.gen_range(1..=3),
            max_children: 4,
            spread: 1.0,
            martingale: false,
        };
        let trees: Vec<ScenarioTree> = (0..3).map(|_| random_tree(&mut r, s)).collect();
        if i == 2 {
            tree = Some(trees[2].clone());
        }
    }
    let t = tree.unwrap();
    for backend in [Backend::Dense, Backend::Sparse] {
        let opts = LpOptions {
            backend,
            ..Default::default()
        };
        let d = adapted_wasserstein_lp_with(&t, &t, 1.0, opts).unwrap();
        assert!(d.cost.abs() < 1e-9, "{backend:?}: {}", d.cost);
    }
}

#[test]
fn optimal_couplings_are_bicausal() {
    let mut r = rng(20);
    for _ in 0..15 {
        let (sp, sq) = (shape(&mut r), shape(&mut r));
        let tp = random_tree(&mut r, sp);
        let tq = random_tree(&mut r, TreeShape { horizon: sp.horizon, ..sq });
        for p in [1.0, 2.0] {
            let d = adapted_wasserstein_lp(&tp, &tq, p).unwrap();
            assert!(d.coupling.check(&tp, &tq).worst() < 1e-9);
            let sync = synchronous_distance(&tp, &tq, p).unwrap();
            assert!(sync.coupling.check(&tp, &tq).worst() < 1e-9);
            assert!(d.value <= sync.value + 1e-9);
        }
    }
}

#[test]
fn backends_agree() {
    let mut r = rng(21);
    for _ in 0..10 {
        let s = shape(&mut r);
        let tp = random_tree(&mut r, s);
        let tq = random_tree(&mut r, s);
        let solve = |backend| {
            adapted_wasserstein_lp_with(&tp, &tq, 1.0, LpOptions { backend, ..Default::default() })
                .unwrap()
                .cost
        };
        assert!((solve(Backend::Dense) - solve(Backend::Sparse)).abs() < 1e-7);
    }
}

/// Under a bi-causal coupling each marginal martingale increment has zero
/// mean given the joint history.
fn joint_martingale_defect(tp: &ScenarioTree, tq: &ScenarioTree, pi: &BiCausalCoupling) -> f64 {
    let dec = doob_decompose(tp).unwrap();
    let anc_p: Vec<Vec<usize>> = pi.leaves_p.iter().map(|&l| tp.ancestry(l)).collect();
    let anc_q: Vec<Vec<usize>> = pi.leaves_q.iter().map(|&l| tq.ancestry(l)).collect();
    let mut worst: f64 = 0.0;
    for t in 0..tp.horizon() {
        let mut sums = std::collections::HashMap::new();
        for (i, ap) in anc_p.iter().enumerate() {
            for (j, aq) in anc_q.iter().enumerate() {
                let e = sums.entry((ap[t], aq[t])).or_insert(0.0);
                *e += pi.get(i, j) * dec.delta_m[ap[t + 1]];
            }
        }
        worst = sums.values().fold(worst, |w, s: &f64| w.max(s.abs()));
    }
    worst
}

#[test]
fn martingale_increments_stay_centred_under_optimal_couplings() {
    let mut r = rng(22);
    for _ in 0..15 {
        let s = shape(&mut r);
        let tp = random_tree(&mut r, s);
        let tq = random_tree(&mut r, s);
        let d = adapted_wasserstein_lp(&tp, &tq, 2.0).unwrap();
        assert!(joint_martingale_defect(&tp, &tq, &d.coupling) < 1e-8);
    }
}

#[test]
fn sup_norm_distance_is_controlled() {
    let ledger = ConstantsLedger::default();
    let mut r = rng(23);
    for _ in 0..15 {
        let s = shape(&mut r);
        let tp = random_tree(&mut r, s);
        let tq = random_tree(&mut r, s);
        for p in [1.0, 2.0] {
            let aw = adapted_wasserstein_lp(&tp, &tq, p).unwrap().value;
            let w = wasserstein_paths(&tp.to_path_law().unwrap(), &tq.to_path_law().unwrap(), p)
                .unwrap()
                .value;
            let factor: f64 = (2f64.powf(p - 1.0) * ledger.bdg(p).unwrap()).powf(1.0 / p);
            assert!(w <= factor * aw + 1e-9, "W_{p} = {w} > {factor} * {aw}");
        }
    }
}

#[test]
fn dp_matches_lp_on_martingales() {
    let mut r = rng(24);
    for _ in 0..10 {
        let tp = random_martingale_tree(&mut r, 2, 3);
        let tq = random_martingale_tree(&mut r, 2, 3);
        let dp = adapted_wasserstein_dp(&tp, &tq, &StageCost::Adapted { p: 2.0 }).unwrap();
        let lp = adapted_wasserstein_lp(&tp, &tq, 2.0).unwrap();
        assert!((dp.value - lp.value).abs() < 1e-8);
    }
}

#[test]
fn synchronous_coupling_is_optimal_for_deterministic_volatilities() {
    let walk = |s: Vec<f64>| random_walk_tree(3, &VolatilitySchedule::piecewise(s), Quantization::Binomial).unwrap();
    let (a, b) = (walk(vec![0.3, 1.0, 0.5]), walk(vec![0.8, 0.2, 0.5]));
    let lp = adapted_wasserstein_lp(&a, &b, 2.0).unwrap();
    let sync = synchronous_distance(&a, &b, 2.0).unwrap();
    assert!((lp.value - sync.value).abs() < 1e-9);
}

/// Two steps of `±σ`; the second has drift `+c·sign(X_1)` under P and the
/// opposite under Q.
fn sign_drift(sigma: f64, c: f64, flip: f64) -> ScenarioTree {
    let mut t = ScenarioTree::new(2, 0.0);
    for x in [sigma, -sigma] {
        let u = t.add_child(0, 0.5, x);
        let mid = x + flip * c * x.signum();
        t.add_child(u, 0.5, mid + sigma);
        t.add_child(u, 0.5, mid - sigma);
    }
    t
}

#[test]
fn synchronous_coupling_loses_to_a_sign_swap() {
    let (sigma, c) = (0.5, 2.0);
    let (tp, tq) = (sign_drift(sigma, c, 1.0), sign_drift(sigma, c, -1.0));
    for p in [1.0, 2.0] {
        let sync = synchronous_distance(&tp, &tq, p).unwrap();
        assert!((sync.cost - (2.0 * c).powf(p)).abs() < 1e-12);
        let lp = adapted_wasserstein_lp(&tp, &tq, p).unwrap();
        assert!(lp.cost <= (8.0 * sigma * sigma).powf(p / 2.0) + 1e-9);
        assert!(lp.cost < sync.cost - 1.0);
    }
}

#[test]
fn perturbed_first_step_costs_two_eps_squared() {
    let eps = 0.1;
    let (pe, p) = contraction_cex(eps).unwrap();
    let cost = pair_cost(&pe, &p, 2.0).unwrap();
    let value = |leaf| pe.value(leaf);
    for (i, &a) in cost.leaves_p.iter().enumerate() {
        for (j, &b) in cost.leaves_q.iter().enumerate() {
            if value(a) == p.value(b) {
                assert!((cost.get(i, j) - 2.0 * eps * eps).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn scaled_copies_are_symmetric() {
    let mut r = rng(25);
    let s = shape(&mut r);
    let t = random_tree(&mut r, s);
    let big = t.scaled(1.7);
    let ab = adapted_wasserstein_lp(&t, &big, 2.0).unwrap().value;
    let ba = adapted_wasserstein_lp(&big, &t, 2.0).unwrap().value;
    assert!((ab - ba).abs() < 1e-9);
}
